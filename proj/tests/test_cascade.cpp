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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <map>
#include <string>

#include "helpers.hpp"
#include "prism/cascade.hpp"
#include "prism/errors.hpp"
#include "prism/hash.hpp"
#include "prism/metrics.hpp"

using namespace prism;
using cascade::MappingRuleSet;
using cascade::PredictedPrefs;
using test::data_file;

namespace {

// Profile whose matrix realizes a strict order with unit win margins.
metrics::LayerProfile profile_from_order(LayerId layer,
                                         const agents::Order& order) {
  metrics::LayerProfile p;
  p.layer = layer;
  p.matrix = metrics::WinMatrix(layer, 10);
  std::vector<int> rank(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
  }
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (i == j) continue;
      if (rank[static_cast<std::size_t>(i)] <
          rank[static_cast<std::size_t>(j)]) {
        p.matrix.wins[static_cast<std::size_t>(i)]
                     [static_cast<std::size_t>(j)] = 1;
      }
    }
  }
  p.ranking = metrics::ranking(p.matrix);
  return p;
}

// Per-domain matrices from a deterministic chooser in item space.
std::map<std::string, metrics::WinMatrix> matrices_from_chooser(
    LayerId layer, const std::vector<std::string>& domains,
    const std::function<int(int, int, const std::string&)>& winner) {
  std::map<std::string, metrics::WinMatrix> out;
  for (const auto& domain : domains) {
    metrics::WinMatrix m(layer, 10);
    for (int lo = 0; lo < 10; ++lo) {
      for (int hi = lo + 1; hi < 10; ++hi) {
        const int w = winner(lo, hi, domain);
        const int l = w == lo ? hi : lo;
        m.wins[static_cast<std::size_t>(w)][static_cast<std::size_t>(l)] = 6;
      }
    }
    out.emplace(domain, std::move(m));
  }
  return out;
}

MappingRuleSet top2_rule() {
  return cascade::parse_rule_set(R"({
    "format_version": "prism/1",
    "name": "test",
    "version": "test-v1",
    "rules": [{
      "id": "u-top2",
      "antecedent": {"kind": "item_in_top_k", "item": "universalism", "k": 2},
      "consequents": [
        {"layer": "L3", "preferred": "systematic-review",
         "other": "anecdotal-testimony"}
      ],
      "provenance": "test"
    }]
  })");
}

const std::vector<std::string> kSevenDomains = {
    "healthcare", "law",        "defense",      "education",
    "finance",    "journalism", "public-policy"};

}  // namespace

TEST_CASE("a rule fires when its item sits in the top k") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  // Universalism is item 0; the identity order ranks it first.
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions =
      cascade::predict_lower_layers(l4, taxonomies, top2_rule());
  REQUIRE(predictions.at(LayerId::L3).prefs.size() == 1);
  const auto& pref = predictions.at(LayerId::L3).prefs[0];
  CHECK(pref.preferred == 0);  // systematic-review
  CHECK(pref.other == 8);      // anecdotal-testimony
  CHECK(pref.rule_id == "u-top2");
  CHECK(predictions.at(LayerId::L2).prefs.empty());

  // Push universalism to the bottom: nothing fires.
  const agents::Order base = test::identity_order();
  const agents::Order reversed(base.rbegin(), base.rend());
  const auto low = profile_from_order(LayerId::L4, reversed);
  const auto none = cascade::predict_lower_layers(low, taxonomies, top2_rule());
  CHECK(none.at(LayerId::L3).prefs.empty());
}

TEST_CASE("category dominance requires a strictly highest mean rank score") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const Taxonomy& l4_tax = taxonomies.layer(LayerId::L4);
  // Identity order: self-transcendence items hold ranks 1 and 2.
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  CHECK(cascade::antecedent_holds(
      cascade::CategoryDominant{"self-transcendence"}, l4, l4_tax));
  CHECK(!cascade::antecedent_holds(cascade::CategoryDominant{"conservation"},
                                   l4, l4_tax));
  CHECK_THROWS_AS(cascade::antecedent_holds(
                      cascade::CategoryDominant{"no-such-category"}, l4,
                      l4_tax),
                  Error);
}

TEST_CASE("empty rule set yields empty predictions and undefined CCI") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto rules = cascade::parse_rule_set(R"({
    "format_version": "prism/1", "name": "empty", "version": "v0",
    "rules": []})");
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions =
      cascade::predict_lower_layers(l4, taxonomies, rules);
  CHECK(predictions.at(LayerId::L3).prefs.empty());
  CHECK(predictions.at(LayerId::L2).prefs.empty());

  const auto measured = profile_from_order(LayerId::L3, test::identity_order());
  const auto value = cascade::cci(predictions.at(LayerId::L3), measured.matrix);
  CHECK(!value.defined);
}

TEST_CASE("contradictory consequents raise an error naming both rules") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto rules = cascade::parse_rule_set(R"({
    "format_version": "prism/1", "name": "bad", "version": "v0",
    "rules": [
      {"id": "one",
       "antecedent": {"kind": "item_in_top_k", "item": "universalism", "k": 10},
       "consequents": [{"layer": "L3", "preferred": "systematic-review",
                        "other": "expert-opinion"}]},
      {"id": "two",
       "antecedent": {"kind": "item_in_top_k", "item": "benevolence", "k": 10},
       "consequents": [{"layer": "L3", "preferred": "expert-opinion",
                        "other": "systematic-review"}]}
    ]})");
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  try {
    cascade::predict_lower_layers(l4, taxonomies, rules);
    FAIL("expected rule-set-error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RuleSet);
    CHECK(std::string(e.what()).find("one") != std::string::npos);
    CHECK(std::string(e.what()).find("two") != std::string::npos);
  }
}

TEST_CASE("cyclic constraint sets are rejected") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto rules = cascade::parse_rule_set(R"({
    "format_version": "prism/1", "name": "cycle", "version": "v0",
    "rules": [{
      "id": "loop",
      "antecedent": {"kind": "item_in_top_k", "item": "universalism", "k": 10},
      "consequents": [
        {"layer": "L2", "preferred": "government-agency", "other": "ngo-advocacy"},
        {"layer": "L2", "preferred": "ngo-advocacy", "other": "direct-stakeholder"},
        {"layer": "L2", "preferred": "direct-stakeholder", "other": "government-agency"}
      ]}]})");
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  CHECK_THROWS_AS(cascade::predict_lower_layers(l4, taxonomies, rules), Error);
}

TEST_CASE("unknown consequent items are rejected even when rules do not fire") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto rules = cascade::parse_rule_set(R"({
    "format_version": "prism/1", "name": "ghost", "version": "v0",
    "rules": [{
      "id": "ghost",
      "antecedent": {"kind": "item_in_top_k", "item": "universalism", "k": 1},
      "consequents": [{"layer": "L3", "preferred": "astrology",
                       "other": "expert-opinion"}]}]})");
  const agents::Order base = test::identity_order();
  const agents::Order reversed(base.rbegin(), base.rend());
  const auto l4 = profile_from_order(LayerId::L4, reversed);
  CHECK_THROWS_AS(cascade::predict_lower_layers(l4, taxonomies, rules), Error);
}

TEST_CASE("CCI is 1.0 when measurements satisfy every consequent") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto rules = cascade::load_rule_set(
      data_file("rules/baseline_rules.json"));
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions = cascade::predict_lower_layers(l4, taxonomies, rules);
  REQUIRE(!predictions.at(LayerId::L3).prefs.empty());
  REQUIRE(!predictions.at(LayerId::L2).prefs.empty());

  // The shipped strength-gradient orders satisfy the baseline consequents.
  const auto l3 = profile_from_order(LayerId::L3, test::identity_order());
  const auto l2 = profile_from_order(LayerId::L2, test::identity_order());
  CHECK(cascade::cci(predictions.at(LayerId::L3), l3.matrix).value ==
        doctest::Approx(1.0));
  CHECK(cascade::cci(predictions.at(LayerId::L2), l2.matrix).value ==
        doctest::Approx(1.0));
}

TEST_CASE("CCI excludes exact 0.5 win rates and counts them") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions =
      cascade::predict_lower_layers(l4, taxonomies, top2_rule());

  metrics::WinMatrix tied(LayerId::L3, 10);
  tied.wins[0][8] = 3;
  tied.wins[8][0] = 3;
  const auto value = cascade::cci(predictions.at(LayerId::L3), tied);
  CHECK(!value.defined);  // the only predicted pair is tied

  tied.wins[0][8] = 4;
  const auto decisive = cascade::cci(predictions.at(LayerId::L3), tied);
  CHECK(decisive.defined);
  CHECK(decisive.value == doctest::Approx(1.0));
}

TEST_CASE("CCI is invariant under positive rescaling of win counts") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions =
      cascade::predict_lower_layers(l4, taxonomies,
                                    cascade::load_rule_set(
                                        data_file("rules/baseline_rules.json")));
  SplitMix rng(31);
  metrics::WinMatrix base(LayerId::L3, 10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (i != j) base.wins[i][j] = static_cast<int>(rng.bounded(9));
    }
  }
  metrics::WinMatrix scaled(LayerId::L3, 10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) scaled.wins[i][j] = base.wins[i][j] * 7;
  }
  const auto v1 = cascade::cci(predictions.at(LayerId::L3), base);
  const auto v2 = cascade::cci(predictions.at(LayerId::L3), scaled);
  CHECK(v1.defined == v2.defined);
  if (v1.defined) CHECK(v1.value == doctest::Approx(v2.value));
}

TEST_CASE("per-domain CCI report evaluates the 3-of-7 gate form") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions =
      cascade::predict_lower_layers(l4, taxonomies, top2_rule());

  // Concordant in 3 domains, discordant in 4: the gate form still passes.
  int flip_count = 0;
  auto matrices = matrices_from_chooser(
      LayerId::L3, kSevenDomains, [&](int lo, int hi, const std::string& d) {
        (void)lo;
        (void)hi;
        const bool flip = d == "defense" || d == "education" ||
                          d == "finance" || d == "journalism";
        if (flip) ++flip_count;
        return flip ? hi : lo;
      });
  metrics::WinMatrix global(LayerId::L3, 10);
  const auto report = cascade::cci_report(predictions.at(LayerId::L3), global,
                                          matrices);
  CHECK(report.domains_above_060 == 3);
  CHECK(report.gate_cci_060_in_3_of_7);
  CHECK(report.per_domain.size() == 7);
}

TEST_CASE("derive_l1 endpoints: dominant tags score 1, dominated score 0") {
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto l3 = profile_from_order(LayerId::L3, test::identity_order());
  const auto l2 = profile_from_order(LayerId::L2, test::identity_order());
  const cascade::CompositeWeights weights;

  cascade::DataItemTag top;
  top.value_relevance = std::vector<double>(10, 0.0);
  top.value_relevance[0] = 1.0;  // top-ranked value
  top.evidence_type = 0;
  top.source_type = 0;

  cascade::DataItemTag bottom;
  bottom.value_relevance = std::vector<double>(10, 0.0);
  bottom.value_relevance[9] = 1.0;
  bottom.evidence_type = 9;
  bottom.source_type = 9;

  const auto scored = cascade::derive_l1(l4, l3, l2, weights, {bottom, top});
  REQUIRE(scored.size() == 2);
  CHECK(scored[0].input_index == 1);
  CHECK(scored[0].score == doctest::Approx(1.0));
  CHECK(scored[1].score == doctest::Approx(0.0));
}

TEST_CASE("derive_l1 keeps input order for identical tags") {
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto l3 = profile_from_order(LayerId::L3, test::identity_order());
  const auto l2 = profile_from_order(LayerId::L2, test::identity_order());
  cascade::DataItemTag tag;
  tag.value_relevance = std::vector<double>(10, 0.5);
  tag.evidence_type = 4;
  tag.source_type = 2;
  const auto scored = cascade::derive_l1(l4, l3, l2, {}, {tag, tag, tag});
  CHECK(scored[0].input_index == 0);
  CHECK(scored[1].input_index == 1);
  CHECK(scored[2].input_index == 2);
  CHECK(scored[0].score == scored[2].score);
}

TEST_CASE("degenerate weights reduce derive_l1 to a single layer") {
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto l3 = profile_from_order(LayerId::L3, test::identity_order());
  const auto l2 = profile_from_order(LayerId::L2, test::identity_order());
  const auto weights = cascade::normalize_weights(1.0, 0.0, 0.0);

  cascade::DataItemTag good_value_bad_rest;
  good_value_bad_rest.value_relevance = std::vector<double>(10, 0.0);
  good_value_bad_rest.value_relevance[0] = 1.0;
  good_value_bad_rest.evidence_type = 9;
  good_value_bad_rest.source_type = 9;

  cascade::DataItemTag bad_value_good_rest;
  bad_value_good_rest.value_relevance = std::vector<double>(10, 0.0);
  bad_value_good_rest.value_relevance[9] = 1.0;
  bad_value_good_rest.evidence_type = 0;
  bad_value_good_rest.source_type = 0;

  const auto scored = cascade::derive_l1(
      l4, l3, l2, weights, {bad_value_good_rest, good_value_bad_rest});
  CHECK(scored[0].input_index == 1);
}

TEST_CASE("predict_freeform: dominance, ties, and the L4 degenerate case") {
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto l3 = profile_from_order(LayerId::L3, test::identity_order());
  const auto l2 = profile_from_order(LayerId::L2, test::identity_order());

  cascade::FreeformScenario fixture;
  fixture.id = "fx";
  fixture.domain = "held-out";
  fixture.stance1.tag.value_relevance = std::vector<double>(10, 0.0);
  fixture.stance1.tag.value_relevance[0] = 1.0;
  fixture.stance1.tag.evidence_type = 0;
  fixture.stance1.tag.source_type = 0;
  fixture.stance2.tag.value_relevance = std::vector<double>(10, 0.0);
  fixture.stance2.tag.value_relevance[5] = 1.0;
  fixture.stance2.tag.evidence_type = 5;
  fixture.stance2.tag.source_type = 5;
  fixture.label = "1";

  const auto p = cascade::predict_freeform(l4, l3, l2, {}, fixture);
  CHECK(p.predicted == "1");
  CHECK(p.correct);

  cascade::FreeformScenario tie = fixture;
  tie.stance2 = tie.stance1;
  tie.label = "1";
  const auto undetermined = cascade::predict_freeform(l4, l3, l2, {}, tie);
  CHECK(undetermined.predicted == "undetermined");
  CHECK(!undetermined.correct);
  tie.label = "abstain";
  CHECK(cascade::predict_freeform(l4, l3, l2, {}, tie).correct);

  // With weights (1,0,0) and one-hot relevance, prediction reduces to
  // comparing L4 ranks; brute force over all 45 value pairs.
  const auto w4_only = cascade::normalize_weights(1.0, 0.0, 0.0);
  agents::Order order = {4, 2, 8, 0, 9, 1, 3, 7, 5, 6};
  const auto shuffled_l4 = profile_from_order(LayerId::L4, order);
  std::vector<int> rank(10);
  for (int r = 0; r < 10; ++r) rank[static_cast<std::size_t>(order[r])] = r;
  for (int i = 0; i < 10; ++i) {
    for (int j = i + 1; j < 10; ++j) {
      cascade::FreeformScenario probe;
      probe.id = "probe";
      probe.domain = "held-out";
      probe.stance1.tag.value_relevance = std::vector<double>(10, 0.0);
      probe.stance1.tag.value_relevance[static_cast<std::size_t>(i)] = 1.0;
      probe.stance2.tag.value_relevance = std::vector<double>(10, 0.0);
      probe.stance2.tag.value_relevance[static_cast<std::size_t>(j)] = 1.0;
      probe.label = rank[static_cast<std::size_t>(i)] <
                            rank[static_cast<std::size_t>(j)]
                        ? "1"
                        : "2";
      const auto result =
          cascade::predict_freeform(shuffled_l4, l3, l2, w4_only, probe);
      CHECK(result.correct);
    }
  }
}

TEST_CASE("aspa is the fraction of correct predictions") {
  std::vector<cascade::StancePrediction> predictions(4);
  predictions[0].correct = true;
  predictions[1].correct = true;
  predictions[2].correct = true;
  predictions[3].correct = false;
  CHECK(cascade::aspa(predictions) == doctest::Approx(0.75));
  CHECK_THROWS_AS(cascade::aspa({}), Error);
}

TEST_CASE("pollution flags fire on selective deviation only") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto l4 = profile_from_order(LayerId::L4, test::identity_order());
  const auto predictions =
      cascade::predict_lower_layers(l4, taxonomies, top2_rule());
  const auto& l3_prefs = predictions.at(LayerId::L3);

  // Concordant everywhere: no flags.
  auto concordant = matrices_from_chooser(
      LayerId::L3, kSevenDomains,
      [](int lo, int hi, const std::string&) { (void)hi; return lo; });
  CHECK(cascade::flag_pollution(l3_prefs, concordant).empty());

  // Reversed in exactly one domain: one flag naming pair and domain.
  auto selective = matrices_from_chooser(
      LayerId::L3, kSevenDomains, [](int lo, int hi, const std::string& d) {
        if (d == "finance" && lo == 0 && hi == 8) return hi;
        return lo;
      });
  const auto flags = cascade::flag_pollution(l3_prefs, selective);
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].pair == ItemPair{LayerId::L3, 0, 8});
  REQUIRE(flags[0].discordant_domains.size() == 1);
  CHECK(flags[0].discordant_domains[0] == "finance");
  CHECK(flags[0].concordant_domains == 6);

  // Reversed uniformly in all domains: consistent recalibration, no flag.
  auto uniform = matrices_from_chooser(
      LayerId::L3, kSevenDomains, [](int lo, int hi, const std::string&) {
        if (lo == 0 && hi == 8) return hi;
        return lo;
      });
  CHECK(cascade::flag_pollution(l3_prefs, uniform).empty());
}

TEST_CASE("single-global-order behaviour is never flagged") {
  const TaxonomySet taxonomies = load_taxonomies(data_file("taxonomies.json"));
  const auto rules =
      cascade::load_rule_set(data_file("rules/baseline_rules.json"));
  SplitMix rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    agents::Order l4_order = test::identity_order();
    deterministic_shuffle(l4_order, rng.next());
    const auto l4 = profile_from_order(LayerId::L4, l4_order);
    const auto predictions =
        cascade::predict_lower_layers(l4, taxonomies, rules);

    agents::Order lower_order = test::identity_order();
    deterministic_shuffle(lower_order, rng.next());
    std::vector<int> rank(10);
    for (int r = 0; r < 10; ++r) {
      rank[static_cast<std::size_t>(lower_order[r])] = r;
    }
    // Domain-independent chooser: same order everywhere.
    auto matrices = matrices_from_chooser(
        LayerId::L3, kSevenDomains, [&](int lo, int hi, const std::string&) {
          return rank[static_cast<std::size_t>(lo)] <
                         rank[static_cast<std::size_t>(hi)]
                     ? lo
                     : hi;
        });
    CHECK(cascade::flag_pollution(predictions.at(LayerId::L3), matrices)
              .empty());
  }
}

TEST_CASE("weights normalize and reject degenerate input") {
  const auto w = cascade::normalize_weights(2.0, 1.0, 1.0);
  CHECK(w.w4 == doctest::Approx(0.5));
  CHECK(w.w3 == doctest::Approx(0.25));
  CHECK_THROWS_AS(cascade::normalize_weights(-1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(cascade::normalize_weights(0.0, 0.0, 0.0), Error);
}

TEST_CASE("fixtures load and validate") {
  test::TempDir dir("fixtures");
  {
    std::ofstream out(dir.sub("fx.json"));
    out << R"({
      "format_version": "prism/1",
      "fixtures": [{
        "id": "f1", "domain": "novel", "narrative": "n",
        "stances": [
          {"summary": "s1", "tag": {"value_relevance": [1,0,0,0,0,0,0,0,0,0],
                                     "evidence_type": 0, "source_type": 0}},
          {"summary": "s2", "tag": {"value_relevance": [0,0,0,0,0,0,0,0,0,1],
                                     "evidence_type": 9, "source_type": 9}}
        ],
        "label": 1
      }]
    })";
  }
  const auto fixtures = cascade::load_fixtures(dir.sub("fx.json"));
  REQUIRE(fixtures.size() == 1);
  CHECK(fixtures[0].label == "1");
  CHECK(fixtures[0].stance1.tag.evidence_type == 0);

  {
    std::ofstream out(dir.sub("empty.json"));
    out << R"({"format_version": "prism/1", "fixtures": []})";
  }
  CHECK_THROWS_AS(cascade::load_fixtures(dir.sub("empty.json")), Error);
}
