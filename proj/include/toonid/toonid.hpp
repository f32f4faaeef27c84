// Copyright 2026 The ToonID Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include "toonid/applications.hpp"
#include "toonid/audio_recognition.hpp"
#include "toonid/bank_builder.hpp"
#include "toonid/core.hpp"
#include "toonid/embedding_adapter.hpp"
#include "toonid/error.hpp"
#include "toonid/evaluation.hpp"
#include "toonid/generation_client.hpp"
#include "toonid/manifest.hpp"
#include "toonid/pipeline.hpp"
#include "toonid/visual_recognition.hpp"
