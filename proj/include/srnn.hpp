// Copyright 2026 The srnn-traffic Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "srnn/autodiff.hpp"
#include "srnn/checkpoint.hpp"
#include "srnn/dataset.hpp"
#include "srnn/evaluation.hpp"
#include "srnn/grad_check.hpp"
#include "srnn/graph.hpp"
#include "srnn/model.hpp"
#include "srnn/prepared.hpp"
#include "srnn/synth.hpp"
#include "srnn/training.hpp"
