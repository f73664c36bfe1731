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

// Cascade machinery: declarative rules predict evidence- and source-layer
// preferences from the measured value profile; concordance against the
// independently measured layers gives CCI; the composite of the three
// profiles derives data-selection scores and free-form stance predictions.
// Rules are data, not code — every output records the rule-set version.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "prism/metrics.hpp"
#include "prism/taxonomy.hpp"

namespace prism::cascade {

struct ItemInTopK {
  std::string item;  // L4 item name
  int k = 2;
};

struct CategoryDominant {
  std::string category;  // strictly highest mean rank score among categories
};

using Antecedent = std::variant<ItemInTopK, CategoryDominant>;

// Consequents reference items by taxonomy name; they are resolved to
// indices against the target layer's taxonomy when predictions are made.
struct OrderedPref {
  LayerId layer = LayerId::L3;
  std::string preferred;  // item expected to win
  std::string other;
};

struct Rule {
  std::string id;
  Antecedent antecedent;
  std::vector<OrderedPref> consequents;
  std::string provenance;
};

struct MappingRuleSet {
  std::string name;
  std::string version;
  std::vector<Rule> rules;
};

MappingRuleSet load_rule_set(const std::string& path);
MappingRuleSet parse_rule_set(const std::string& json_text);

bool antecedent_holds(const Antecedent& antecedent,
                      const metrics::LayerProfile& l4,
                      const Taxonomy& l4_taxonomy);

struct PredictedPref {
  int preferred = 0;  // item index expected to win
  int other = 0;
  std::string rule_id;
};

struct PredictedPrefs {
  LayerId layer = LayerId::L3;
  std::vector<PredictedPref> prefs;  // no pair in both orientations
};

// Fires every rule whose antecedent holds and unions the consequents.
// Contradictory orientations raise rule-set-error naming both rules; so
// does any cycle in the active constraint set. Consequent names must
// resolve in the given taxonomies.
std::map<LayerId, PredictedPrefs> predict_lower_layers(
    const metrics::LayerProfile& l4, const TaxonomySet& taxonomies,
    const MappingRuleSet& rules);

struct CciResult {
  metrics::MetricValue overall;
  std::map<std::string, metrics::MetricValue> per_domain;
  int ties_excluded = 0;
  int missing_excluded = 0;
  int domains_above_060 = 0;
  bool gate_cci_060_in_3_of_7 = false;  // per-domain success-gate form
};

// Concordance: fraction of predicted pairs whose measured win rate favors
// the predicted item (> 0.5). Rate exactly 0.5 is excluded and counted.
// Chance level is 0.5 by construction.
metrics::MetricValue cci(const PredictedPrefs& predicted,
                         const metrics::WinMatrix& measured);

CciResult cci_report(const PredictedPrefs& predicted,
                     const metrics::WinMatrix& global,
                     const std::map<std::string, metrics::WinMatrix>&
                         per_domain /* domain name -> matrix */);

struct CompositeWeights {
  double w4 = 1.0 / 3.0;
  double w3 = 1.0 / 3.0;
  double w2 = 1.0 / 3.0;
};

// Normalizes to sum 1; throws config-error on negatives or zero sum.
CompositeWeights normalize_weights(double w4, double w3, double w2);

struct DataItemTag {
  std::vector<double> value_relevance;  // 10 reals in [0,1], >= 1 positive
  int evidence_type = 0;                // L3 item index
  int source_type = 0;                  // L2 item index
};

// Rank r in 1..n maps to (n - r) / (n - 1); only ordinal information from
// the forced-choice profiles is consumed.
double rank_score(const std::vector<int>& ranking, int item);

struct ScoredItem {
  std::size_t input_index = 0;
  double score = 0.0;
};

// score = w4 * (relevance . L4 rank scores) + w3 * rank_score(evidence)
//       + w2 * rank_score(source); relevance is normalized to unit sum.
// Returns items sorted by score descending, ties by input order.
std::vector<ScoredItem> derive_l1(const metrics::LayerProfile& l4,
                                  const metrics::LayerProfile& l3,
                                  const metrics::LayerProfile& l2,
                                  const CompositeWeights& weights,
                                  const std::vector<DataItemTag>& items);

struct FreeformStance {
  std::string summary;
  DataItemTag tag;
};

struct FreeformScenario {
  std::string id;
  std::string domain;
  std::string narrative;
  FreeformStance stance1;
  FreeformStance stance2;
  std::string label;  // "1", "2" or "abstain"
};

std::vector<FreeformScenario> load_fixtures(const std::string& path);

struct StancePrediction {
  std::string fixture_id;
  std::string predicted;  // "1", "2" or "undetermined"
  double score1 = 0.0;
  double score2 = 0.0;
  bool correct = false;
};

// Higher composite score wins; exact tie predicts "undetermined", which
// scores as incorrect unless the label is abstain.
StancePrediction predict_freeform(const metrics::LayerProfile& l4,
                                  const metrics::LayerProfile& l3,
                                  const metrics::LayerProfile& l2,
                                  const CompositeWeights& weights,
                                  const FreeformScenario& scenario);

double aspa(const std::vector<StancePrediction>& predictions);

struct PollutionFlag {
  LayerId layer = LayerId::L3;
  ItemPair pair;
  int preferred = 0;  // the item the prediction expected to win
  std::vector<std::string> discordant_domains;
  int concordant_domains = 0;
  std::string rule_id;
};

// Selective deviation: a predicted pair reversed in at most `max_discordant`
// domains while concordant in at least `min_concordant` others. A pair that
// deviates uniformly across all domains is consistent recalibration, not
// pollution, and is never flagged.
std::vector<PollutionFlag> flag_pollution(
    const PredictedPrefs& predicted,
    const std::map<std::string, metrics::WinMatrix>& per_domain,
    double tolerance = 0.0, int max_discordant = 2, int min_concordant = 4);

}  // namespace prism::cascade
