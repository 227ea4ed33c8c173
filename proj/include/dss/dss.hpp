/*
 * Copyright 2026 The DSS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "dss/acquisition.hpp"
#include "dss/config_space.hpp"
#include "dss/ffm.hpp"
#include "dss/gaussian_process.hpp"
#include "dss/harness.hpp"
#include "dss/io.hpp"
#include "dss/objectives.hpp"
#include "dss/optimizer.hpp"
#include "dss/random.hpp"
#include "dss/surrogates.hpp"
#include "dss/tree.hpp"
