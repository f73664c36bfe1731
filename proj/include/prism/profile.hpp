// Copyright 2026 The Prism Audit Authors.
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

#include <map>
#include <optional>
#include <string>

#include "prism/cascade.hpp"
#include "prism/gateway.hpp"
#include "prism/metrics.hpp"

#include "json.hpp"

namespace prism::profile {

struct ProfileInputs {
  std::string respondent_id;
  gateway::DecodeParams decode;
  metrics::Thresholds thresholds;
  cascade::CompositeWeights weights;
  std::optional<cascade::MappingRuleSet> rules;  // nullopt -> no cascade block
};

// The full measured profile as a deterministic, format-versioned JSON
// record: per-layer profiles, the reliability metrics, the TRR x SRS
// diagnosis, and (when rules are given) predictions, CCI and pollution
// flags. Contains no timestamps so identical inputs serialize to identical
// bytes. Metrics lacking data are marked undefined with a reason.
nlohmann::json build_profile(const gateway::TranscriptSet& transcripts,
                             const Bank& bank, const ProfileInputs& inputs);

// Derived-prediction block appended by the predict step: per-fixture stance
// predictions, ASPA, and the > 0.65 success-gate evaluation.
nlohmann::json build_aspa_block(
    const nlohmann::json& profile_json, const Bank& bank,
    const std::vector<cascade::FreeformScenario>& fixtures,
    const cascade::CompositeWeights& weights);

// Reconstructs the layer profiles stored in a profile record (used by the
// predict step so predictions are reproducible from the persisted record).
std::map<LayerId, metrics::LayerProfile> profiles_from_json(
    const nlohmann::json& profile_json);

// Human-readable audit report; byte-identical when regenerated from the
// same profile record.
std::string render_report(const nlohmann::json& profile_json);

}  // namespace prism::profile
