/*
 * Copyright 2026 The dpimb Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "dpimb/analytic.hpp"
#include "dpimb/data.hpp"
#include "dpimb/dataset.hpp"
#include "dpimb/dp_core.hpp"
#include "dpimb/error.hpp"
#include "dpimb/eval.hpp"
#include "dpimb/format.hpp"
#include "dpimb/io.hpp"
#include "dpimb/matrix.hpp"
#include "dpimb/models.hpp"
#include "dpimb/normal.hpp"
#include "dpimb/preprocess.hpp"
#include "dpimb/random.hpp"
#include "dpimb/synth.hpp"
