// Copyright 2026 The defex Authors.
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

// JSON forms of the configuration and report types. Keys mirror field
// names. Reading merges onto the current values and rejects unknown keys.

#ifndef DEFEX_SERIALIZATION_H_
#define DEFEX_SERIALIZATION_H_

#include "defex/encoder.h"
#include "defex/inference.h"
#include "defex/synthetic.h"
#include "defex/training.h"
#include "defex/warming.h"
#include "json.hpp"

namespace defex {

using Json = nlohmann::json;

Json ToJson(const EncoderConfig& config);
Json ToJson(const TrainConfig& config);
Json ToJson(const RetrievalConfig& config);
Json ToJson(const InferenceConfig& config);
Json ToJson(const SyntheticSpec& spec);
Json ToJson(const TrainReport& report);

// Throw kConfiguration on unknown keys or mistyped values.
void MergeJson(const Json& j, EncoderConfig& config);
void MergeJson(const Json& j, TrainConfig& config);
void MergeJson(const Json& j, RetrievalConfig& config);
void MergeJson(const Json& j, InferenceConfig& config);
void MergeJson(const Json& j, SyntheticSpec& spec);

EncoderConfig EncoderConfigFromJson(const Json& j);

// Parses a whole file; kInputNotFound when missing, kParse when malformed.
Json ReadJsonFile(const std::string& path);
void WriteJsonFile(const Json& j, const std::string& path);

}  // namespace defex

#endif  // DEFEX_SERIALIZATION_H_
