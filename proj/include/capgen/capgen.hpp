// capgen/capgen.hpp
//
// Umbrella header: pulls in the whole library.

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "capgen/checkpoint.hpp"
#include "capgen/data.hpp"
#include "capgen/embedding.hpp"
#include "capgen/errors.hpp"
#include "capgen/hash.hpp"
#include "capgen/inference.hpp"
#include "capgen/metrics.hpp"
#include "capgen/model.hpp"
#include "capgen/numerics.hpp"
#include "capgen/training.hpp"
