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

#include "prism/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "prism/errors.hpp"

namespace prism::cascade {

using nlohmann::json;

MappingRuleSet parse_rule_set(const std::string& json_text) {
  MappingRuleSet rules;
  try {
    json doc = json::parse(json_text);
    if (doc.value("format_version", "") != kFormatVersion) {
      raise(ErrorKind::Config, "rule set has unsupported format_version");
    }
    rules.name = doc.value("name", "unnamed");
    rules.version = doc.at("version").get<std::string>();
    for (const auto& r : doc.at("rules")) {
      Rule rule;
      rule.id = r.at("id").get<std::string>();
      rule.provenance = r.value("provenance", "");
      const auto& ant = r.at("antecedent");
      const std::string kind = ant.at("kind").get<std::string>();
      if (kind == "item_in_top_k") {
        rule.antecedent = ItemInTopK{ant.at("item").get<std::string>(),
                                     ant.at("k").get<int>()};
      } else if (kind == "category_dominant") {
        rule.antecedent =
            CategoryDominant{ant.at("category").get<std::string>()};
      } else {
        raise(ErrorKind::Config, "unknown antecedent kind '" + kind + "'");
      }
      for (const auto& c : r.at("consequents")) {
        OrderedPref pref;
        auto layer = parse_layer(c.at("layer").get<std::string>());
        if (!layer || *layer == LayerId::L4) {
          raise(ErrorKind::Config,
                "rule " + rule.id + " consequent must target L3 or L2");
        }
        pref.layer = *layer;
        pref.preferred = c.at("preferred").get<std::string>();
        pref.other = c.at("other").get<std::string>();
        rule.consequents.push_back(std::move(pref));
      }
      rules.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("rule set: ") + e.what());
  }
  return rules;
}

MappingRuleSet load_rule_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open rule set " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_rule_set(buf.str());
}

double rank_score(const std::vector<int>& ranking, int item) {
  const int n = static_cast<int>(ranking.size());
  for (int r = 0; r < n; ++r) {
    if (ranking[static_cast<std::size_t>(r)] == item) {
      return static_cast<double>(n - 1 - r) / static_cast<double>(n - 1);
    }
  }
  raise(ErrorKind::Data, "item " + std::to_string(item) + " not in ranking");
}

bool antecedent_holds(const Antecedent& antecedent,
                      const metrics::LayerProfile& l4,
                      const Taxonomy& l4_taxonomy) {
  if (const auto* top = std::get_if<ItemInTopK>(&antecedent)) {
    auto index = l4_taxonomy.index_of(top->item);
    if (!index) {
      raise(ErrorKind::Data,
            "antecedent references unknown item '" + top->item + "'");
    }
    const int k = std::min<int>(top->k,
                                static_cast<int>(l4.ranking.size()));
    for (int r = 0; r < k; ++r) {
      if (l4.ranking[static_cast<std::size_t>(r)] == *index) return true;
    }
    return false;
  }
  const auto& dominant = std::get<CategoryDominant>(antecedent);
  // Mean rank score per higher-order category; dominant means strictly
  // highest. Ties leave no category dominant.
  std::map<std::string, std::pair<double, int>> sums;
  for (const auto& item : l4_taxonomy.items) {
    sums[item.category].first += rank_score(l4.ranking, item.index);
    sums[item.category].second += 1;
  }
  auto target = sums.find(dominant.category);
  if (target == sums.end()) {
    raise(ErrorKind::Data, "antecedent references unknown category '" +
                               dominant.category + "'");
  }
  const double target_mean = target->second.first / target->second.second;
  for (const auto& [category, sum] : sums) {
    if (category == dominant.category) continue;
    if (sum.first / sum.second >= target_mean) return false;
  }
  return true;
}

namespace {

struct ResolvedPref {
  LayerId layer;
  int preferred;
  int other;
  std::string rule_id;
};

ResolvedPref resolve_pref(const OrderedPref& pref, const std::string& rule_id,
                          const TaxonomySet& taxonomies) {
  const Taxonomy& taxonomy = taxonomies.layer(pref.layer);
  auto preferred = taxonomy.index_of(pref.preferred);
  auto other = taxonomy.index_of(pref.other);
  if (!preferred || !other) {
    raise(ErrorKind::RuleSet,
          "rule " + rule_id + " references unknown " +
              std::string(layer_tag(pref.layer)) + " item '" +
              (!preferred ? pref.preferred : pref.other) + "'");
  }
  if (*preferred == *other) {
    raise(ErrorKind::RuleSet, "rule " + rule_id + " orders an item against itself");
  }
  return ResolvedPref{pref.layer, *preferred, *other, rule_id};
}

void check_acyclic(const PredictedPrefs& prefs, int items) {
  // DFS over the active constraint digraph.
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(items));
  for (const auto& p : prefs.prefs) {
    adjacency[static_cast<std::size_t>(p.preferred)].push_back(p.other);
  }
  std::vector<int> state(static_cast<std::size_t>(items), 0);  // 0/1/2
  std::vector<int> stack;
  for (int start = 0; start < items; ++start) {
    if (state[static_cast<std::size_t>(start)] != 0) continue;
    stack.push_back(~start);
    stack.push_back(start);
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      if (node < 0) {
        state[static_cast<std::size_t>(~node)] = 2;
        continue;
      }
      if (state[static_cast<std::size_t>(node)] == 2) continue;
      if (state[static_cast<std::size_t>(node)] == 1) continue;
      state[static_cast<std::size_t>(node)] = 1;
      for (int next : adjacency[static_cast<std::size_t>(node)]) {
        if (state[static_cast<std::size_t>(next)] == 1) {
          raise(ErrorKind::RuleSet,
                "active constraint set for " +
                    std::string(layer_tag(prefs.layer)) +
                    " contains a cycle through items " +
                    std::to_string(node) + " and " + std::to_string(next));
        }
        if (state[static_cast<std::size_t>(next)] == 0) {
          stack.push_back(~next);
          stack.push_back(next);
        }
      }
    }
  }
}

}  // namespace

std::map<LayerId, PredictedPrefs> predict_lower_layers(
    const metrics::LayerProfile& l4, const TaxonomySet& taxonomies,
    const MappingRuleSet& rules) {
  const Taxonomy& l4_taxonomy = taxonomies.layer(LayerId::L4);
  std::vector<ResolvedPref> fired;
  for (const Rule& rule : rules.rules) {
    // Resolve every consequent so invalid references fail even when the
    // antecedent does not hold.
    std::vector<ResolvedPref> resolved;
    for (const OrderedPref& pref : rule.consequents) {
      resolved.push_back(resolve_pref(pref, rule.id, taxonomies));
    }
    if (!antecedent_holds(rule.antecedent, l4, l4_taxonomy)) continue;
    fired.insert(fired.end(), resolved.begin(), resolved.end());
  }

  std::map<LayerId, PredictedPrefs> out;
  out[LayerId::L3].layer = LayerId::L3;
  out[LayerId::L2].layer = LayerId::L2;

  // Union with contradiction detection; duplicates from different rules
  // collapse to the first firing rule.
  std::map<std::tuple<LayerId, int, int>, std::string> seen;
  for (const ResolvedPref& p : fired) {
    auto forward = seen.find({p.layer, p.preferred, p.other});
    if (forward != seen.end()) continue;
    auto reverse = seen.find({p.layer, p.other, p.preferred});
    if (reverse != seen.end()) {
      raise(ErrorKind::RuleSet,
            "rules " + reverse->second + " and " + p.rule_id +
                " order the same " + layer_tag(p.layer) +
                " pair in opposite directions");
    }
    seen[{p.layer, p.preferred, p.other}] = p.rule_id;
    out[p.layer].prefs.push_back(
        PredictedPref{p.preferred, p.other, p.rule_id});
  }
  for (auto& [layer, prefs] : out) {
    check_acyclic(prefs, taxonomies.layer(layer).size());
  }
  return out;
}

metrics::MetricValue cci(const PredictedPrefs& predicted,
                         const metrics::WinMatrix& measured) {
  int concordant = 0, scorable = 0, ties = 0, missing = 0;
  for (const PredictedPref& p : predicted.prefs) {
    const int lo = std::min(p.preferred, p.other);
    const int hi = std::max(p.preferred, p.other);
    const auto rate = measured.win_rate(ItemPair{predicted.layer, lo, hi});
    if (!rate) {
      ++missing;
      continue;
    }
    const double preferred_rate = p.preferred == lo ? *rate : 1.0 - *rate;
    if (preferred_rate == 0.5) {
      ++ties;
      continue;
    }
    ++scorable;
    if (preferred_rate > 0.5) ++concordant;
  }
  if (scorable == 0) {
    return metrics::undefined_metric(
        predicted.prefs.empty()
            ? "no predicted pairs (empty fired set)"
            : "no predicted pair has decisive measured data");
  }
  auto value = metrics::defined_metric(
      static_cast<double>(concordant) / static_cast<double>(scorable),
      scorable, ties + missing);
  return value;
}

CciResult cci_report(
    const PredictedPrefs& predicted, const metrics::WinMatrix& global,
    const std::map<std::string, metrics::WinMatrix>& per_domain) {
  CciResult result;
  result.overall = cci(predicted, global);
  for (const auto& [domain, matrix] : per_domain) {
    auto value = cci(predicted, matrix);
    if (value.defined && value.value > 0.60) ++result.domains_above_060;
    result.per_domain[domain] = std::move(value);
  }
  result.gate_cci_060_in_3_of_7 = result.domains_above_060 >= 3;
  return result;
}

CompositeWeights normalize_weights(double w4, double w3, double w2) {
  if (w4 < 0.0 || w3 < 0.0 || w2 < 0.0) {
    raise(ErrorKind::Config, "composite weights must be non-negative");
  }
  const double sum = w4 + w3 + w2;
  if (!(sum > 0.0)) {
    raise(ErrorKind::Config, "composite weights must not all be zero");
  }
  return CompositeWeights{w4 / sum, w3 / sum, w2 / sum};
}

namespace {

double composite_score(const metrics::LayerProfile& l4,
                       const metrics::LayerProfile& l3,
                       const metrics::LayerProfile& l2,
                       const CompositeWeights& weights,
                       const DataItemTag& tag) {
  if (tag.value_relevance.size() != l4.ranking.size()) {
    raise(ErrorKind::Data, "value-relevance vector must have " +
                               std::to_string(l4.ranking.size()) +
                               " entries");
  }
  double relevance_sum = 0.0;
  for (double r : tag.value_relevance) {
    if (r < 0.0 || r > 1.0) {
      raise(ErrorKind::Data, "value-relevance entries must be in [0,1]");
    }
    relevance_sum += r;
  }
  if (!(relevance_sum > 0.0)) {
    raise(ErrorKind::Data, "value-relevance needs at least one positive entry");
  }
  // Unit-sum normalization keeps the L4 term in [0,1]; a one-hot vector
  // reduces it to the plain rank score of that value.
  double l4_term = 0.0;
  for (std::size_t i = 0; i < tag.value_relevance.size(); ++i) {
    l4_term += (tag.value_relevance[i] / relevance_sum) *
               rank_score(l4.ranking, static_cast<int>(i));
  }
  return weights.w4 * l4_term +
         weights.w3 * rank_score(l3.ranking, tag.evidence_type) +
         weights.w2 * rank_score(l2.ranking, tag.source_type);
}

}  // namespace

std::vector<ScoredItem> derive_l1(const metrics::LayerProfile& l4,
                                  const metrics::LayerProfile& l3,
                                  const metrics::LayerProfile& l2,
                                  const CompositeWeights& weights,
                                  const std::vector<DataItemTag>& items) {
  std::vector<ScoredItem> scored;
  scored.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    scored.push_back(
        ScoredItem{i, composite_score(l4, l3, l2, weights, items[i])});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredItem& a, const ScoredItem& b) {
                     return a.score > b.score;  // ties keep input order
                   });
  return scored;
}

std::vector<FreeformScenario> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open fixture file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, "fixture file " + path + ": " + e.what());
  }
  if (doc.value("format_version", "") != kFormatVersion) {
    raise(ErrorKind::Config, "fixture file has unsupported format_version");
  }
  std::vector<FreeformScenario> out;
  auto parse_tag = [](const json& t) {
    DataItemTag tag;
    tag.value_relevance = t.at("value_relevance").get<std::vector<double>>();
    tag.evidence_type = t.at("evidence_type").get<int>();
    tag.source_type = t.at("source_type").get<int>();
    return tag;
  };
  for (const auto& f : doc.at("fixtures")) {
    FreeformScenario s;
    s.id = f.at("id").get<std::string>();
    s.domain = f.at("domain").get<std::string>();
    s.narrative = f.value("narrative", "");
    const auto& stances = f.at("stances");
    if (stances.size() != 2) {
      raise(ErrorKind::Data, "fixture " + s.id + " must have two stances");
    }
    if (!stances.at(0).contains("tag") || !stances.at(1).contains("tag")) {
      raise(ErrorKind::Data, "fixture " + s.id + " has an untagged stance");
    }
    s.stance1.summary = stances.at(0).value("summary", "");
    s.stance1.tag = parse_tag(stances.at(0).at("tag"));
    s.stance2.summary = stances.at(1).value("summary", "");
    s.stance2.tag = parse_tag(stances.at(1).at("tag"));
    s.label = f.at("label").is_string()
                  ? f.at("label").get<std::string>()
                  : std::to_string(f.at("label").get<int>());
    if (s.label != "1" && s.label != "2" && s.label != "abstain") {
      raise(ErrorKind::Data,
            "fixture " + s.id + " label must be 1, 2 or abstain");
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) raise(ErrorKind::Data, "fixture file is empty");
  return out;
}

StancePrediction predict_freeform(const metrics::LayerProfile& l4,
                                  const metrics::LayerProfile& l3,
                                  const metrics::LayerProfile& l2,
                                  const CompositeWeights& weights,
                                  const FreeformScenario& scenario) {
  StancePrediction p;
  p.fixture_id = scenario.id;
  p.score1 = composite_score(l4, l3, l2, weights, scenario.stance1.tag);
  p.score2 = composite_score(l4, l3, l2, weights, scenario.stance2.tag);
  if (p.score1 == p.score2) {
    p.predicted = "undetermined";
    p.correct = scenario.label == "abstain";
  } else {
    p.predicted = p.score1 > p.score2 ? "1" : "2";
    p.correct = p.predicted == scenario.label;
  }
  return p;
}

double aspa(const std::vector<StancePrediction>& predictions) {
  if (predictions.empty()) {
    raise(ErrorKind::UndefinedMetric, "no predictions to score");
  }
  long correct = 0;
  for (const auto& p : predictions) {
    if (p.correct) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(predictions.size());
}

std::vector<PollutionFlag> flag_pollution(
    const PredictedPrefs& predicted,
    const std::map<std::string, metrics::WinMatrix>& per_domain,
    double tolerance, int max_discordant, int min_concordant) {
  std::vector<PollutionFlag> flags;
  for (const PredictedPref& p : predicted.prefs) {
    const int lo = std::min(p.preferred, p.other);
    const int hi = std::max(p.preferred, p.other);
    std::vector<std::string> discordant;
    int concordant = 0;
    for (const auto& [domain, matrix] : per_domain) {
      const auto rate = matrix.win_rate(ItemPair{predicted.layer, lo, hi});
      if (!rate) continue;
      const double preferred_rate = p.preferred == lo ? *rate : 1.0 - *rate;
      if (preferred_rate > 0.5 + tolerance) {
        ++concordant;
      } else if (preferred_rate < 0.5 - tolerance) {
        discordant.push_back(domain);
      }
      // Rates inside the tolerance band are undecided and count neither way.
    }
    // Selective deviation only: a uniformly reversed pair is consistent
    // recalibration and stays unflagged.
    if (!discordant.empty() &&
        static_cast<int>(discordant.size()) <= max_discordant &&
        concordant >= min_concordant) {
      PollutionFlag flag;
      flag.layer = predicted.layer;
      flag.pair = ItemPair{predicted.layer, lo, hi};
      flag.preferred = p.preferred;
      flag.discordant_domains = discordant;
      flag.concordant_domains = concordant;
      flag.rule_id = p.rule_id;
      flags.push_back(std::move(flag));
    }
  }
  return flags;
}

}  // namespace prism::cascade
