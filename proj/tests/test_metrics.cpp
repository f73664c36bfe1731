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

#include <cmath>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "prism/errors.hpp"
#include "prism/hash.hpp"
#include "prism/metrics.hpp"

using namespace prism;
using gateway::Choice;
using gateway::Transcript;
using gateway::TranscriptSet;
using metrics::Outcome;

namespace {

void put(TranscriptSet& set, const Scenario& s, int repeat, Choice parsed) {
  Transcript t;
  t.presentation = {s.id, repeat};
  t.respondent_id = "synthetic";
  t.raw_text = gateway::choice_name(parsed);
  t.parsed = parsed;
  t.parse_ok = parsed != Choice::Abstain;
  set.by_key[{s.id, repeat}] = t;
}

Choice choice_for(const Scenario& s, Outcome outcome) {
  switch (outcome) {
    case Outcome::LoWin: return s.lo_is_option_a ? Choice::A : Choice::B;
    case Outcome::HiWin: return s.lo_is_option_a ? Choice::B : Choice::A;
    case Outcome::Abstain: return Choice::Abstain;
  }
  return Choice::Abstain;
}

const Scenario* find_scenario(const Bank& bank, LayerId layer, int lo, int hi,
                              int domain, int inst, int persp) {
  for (const Scenario& s : bank.scenarios) {
    if (s.layer == layer && s.pair.lo == lo && s.pair.hi == hi &&
        s.domain.index == domain && s.instantiation == inst &&
        s.perspective == persp) {
      return &s;
    }
  }
  return nullptr;
}

// Independent entropy oracle: count a full round robin by brute force and
// sum -p log2 p directly.
double round_robin_entropy_oracle(const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  std::vector<int> rank(order.size());
  for (int r = 0; r < n; ++r) rank[static_cast<std::size_t>(order[r])] = r;
  std::vector<int> wins(order.size(), 0);
  int total = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int winner = rank[static_cast<std::size_t>(i)] <
                                 rank[static_cast<std::size_t>(j)]
                             ? i
                             : j;
      wins[static_cast<std::size_t>(winner)] += 1;
      ++total;
    }
  }
  double bits = 0.0;
  for (int w : wins) {
    if (w == 0) continue;
    const double p = static_cast<double>(w) / total;
    bits -= p * std::log2(p);
  }
  return bits;
}

}  // namespace

TEST_CASE("entropy oracle: strict round robin matches the closed-form sum") {
  const double oracle = round_robin_entropy_oracle(test::identity_order());
  double closed_form = 0.0;
  for (int k = 1; k <= 9; ++k) {
    closed_form -= (k / 45.0) * std::log2(k / 45.0);
  }
  CHECK(oracle == doctest::Approx(closed_form).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(2.9573).epsilon(1e-4));
  CHECK(metrics::round_robin_entropy_floor(10) ==
        doctest::Approx(oracle).epsilon(1e-12));

  // The oracle is order-invariant: any strict order gives the same spread.
  std::vector<int> shuffled = {3, 1, 4, 0, 9, 2, 6, 5, 8, 7};
  CHECK(round_robin_entropy_oracle(shuffled) ==
        doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("value entropy endpoints: uniform and single-support") {
  metrics::WinMatrix uniform(LayerId::L4, 10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      if (i != j) uniform.wins[i][j] = 3;
    }
  }
  CHECK(metrics::value_entropy(uniform) ==
        doctest::Approx(std::log2(10.0)).epsilon(1e-9));

  metrics::WinMatrix single(LayerId::L4, 10);
  single.wins[4][7] = 13;
  CHECK(metrics::value_entropy(single) == doctest::Approx(0.0));

  metrics::WinMatrix empty(LayerId::L4, 10);
  CHECK_THROWS_AS(metrics::value_entropy(empty), Error);
}

TEST_CASE("value entropy of a strict agent campaign equals the round-robin floor") {
  const Bank bank = build_bank(test::small_bank_config());
  test::TempDir dir("ve");
  const auto transcripts =
      test::run_simulated(bank, test::strict_agent(0.0), dir);
  const auto matrix = metrics::win_matrix(transcripts, bank, LayerId::L4);
  CHECK(metrics::value_entropy(matrix) ==
        doctest::Approx(round_robin_entropy_oracle(test::identity_order()))
            .epsilon(1e-9));
}

TEST_CASE("entropy bounds hold for arbitrary matrices") {
  SplitMix rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    metrics::WinMatrix m(LayerId::L4, 10);
    bool any = false;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        if (i == j) continue;
        m.wins[i][j] = static_cast<int>(rng.bounded(8));
        any = any || m.wins[i][j] > 0;
      }
    }
    if (!any) continue;
    const double ve = metrics::value_entropy(m);
    CHECK(ve >= 0.0);
    CHECK(ve <= std::log2(10.0) + 1e-12);
  }
}

TEST_CASE("win matrix of a strict agent counts every presentation decisively") {
  const Bank bank = build_bank(test::small_bank_config());
  test::TempDir dir("wm");
  const auto transcripts =
      test::run_simulated(bank, test::strict_agent(0.0), dir);
  const auto matrix = metrics::win_matrix(transcripts, bank, LayerId::L3);
  // 2 domains x 3 instantiations x 2 repeats per pair.
  for (int lo = 0; lo < 10; ++lo) {
    for (int hi = lo + 1; hi < 10; ++hi) {
      CHECK(matrix.wins[lo][hi] == 12);
      CHECK(matrix.wins[hi][lo] == 0);
    }
  }
  CHECK(matrix.total_decisive() == 45 * 12);
}

TEST_CASE("all-abstain transcripts give a zero matrix with counted abstains") {
  const Bank bank = build_bank(test::small_bank_config());
  TranscriptSet set;
  for (const Scenario& s : bank.scenarios) {
    if (s.layer != LayerId::L4 || s.perspective != 0) continue;
    put(set, s, 1, Choice::Abstain);
    put(set, s, 2, Choice::Abstain);
  }
  const auto matrix = metrics::win_matrix(set, bank, LayerId::L4);
  CHECK(matrix.total_decisive() == 0);
  int abstains = 0, presentations = 0;
  for (const auto& [key, count] : matrix.abstains) abstains += count;
  for (const auto& [key, count] : matrix.presentations) presentations += count;
  CHECK(abstains == presentations);
  CHECK(abstains == 45 * 2 * 3 * 2);
}

TEST_CASE("single pair with one choice each way counts one win per item") {
  const Bank bank = build_bank(test::small_bank_config());
  const Scenario* s = find_scenario(bank, LayerId::L4, 0, 1, 0, 1, 0);
  REQUIRE(s != nullptr);
  TranscriptSet set;
  put(set, *s, 1, choice_for(*s, Outcome::LoWin));
  put(set, *s, 2, choice_for(*s, Outcome::HiWin));
  const auto matrix = metrics::win_matrix(set, bank, LayerId::L4);
  CHECK(matrix.wins[0][1] == 1);
  CHECK(matrix.wins[1][0] == 1);
  CHECK(matrix.win_rate(ItemPair{LayerId::L4, 0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("srs cell: unanimous, two-of-three, and all-distinct outcomes") {
  const Bank bank = build_bank(test::small_bank_config());
  const Domain domain{0, bank.manifest.domains[0]};
  const ItemPair pair{LayerId::L4, 2, 5};
  TranscriptSet set;

  auto set_outcomes = [&](Outcome a, Outcome b, Outcome c) {
    for (int inst = 1; inst <= 3; ++inst) {
      const Scenario* s = find_scenario(bank, LayerId::L4, 2, 5, 0, inst, 0);
      REQUIRE(s != nullptr);
      const Outcome o = inst == 1 ? a : inst == 2 ? b : c;
      put(set, *s, 1, choice_for(*s, o));
    }
  };

  set_outcomes(Outcome::LoWin, Outcome::LoWin, Outcome::LoWin);
  CHECK(metrics::srs_cell(set, bank, pair, domain) == doctest::Approx(1.0));

  set_outcomes(Outcome::LoWin, Outcome::LoWin, Outcome::HiWin);
  CHECK(metrics::srs_cell(set, bank, pair, domain) ==
        doctest::Approx(2.0 / 3.0));

  set_outcomes(Outcome::LoWin, Outcome::HiWin, Outcome::Abstain);
  CHECK(metrics::srs_cell(set, bank, pair, domain) ==
        doctest::Approx(1.0 / 3.0));
}

TEST_CASE("srs cell is missing when an instantiation lacks a transcript") {
  const Bank bank = build_bank(test::small_bank_config());
  TranscriptSet set;
  const Scenario* s = find_scenario(bank, LayerId::L4, 2, 5, 0, 1, 0);
  put(set, *s, 1, Choice::A);
  CHECK(!metrics::srs_cell(set, bank, ItemPair{LayerId::L4, 2, 5},
                           Domain{0, bank.manifest.domains[0]}));
}

TEST_CASE("trr: unanimous agreement and a half flip") {
  const Bank bank = build_bank(test::small_bank_config());
  TranscriptSet set;
  const Scenario* s1 = find_scenario(bank, LayerId::L4, 0, 1, 0, 1, 0);
  const Scenario* s2 = find_scenario(bank, LayerId::L4, 0, 2, 0, 1, 0);
  put(set, *s1, 1, choice_for(*s1, Outcome::LoWin));
  put(set, *s1, 2, choice_for(*s1, Outcome::LoWin));
  put(set, *s2, 1, choice_for(*s2, Outcome::LoWin));
  put(set, *s2, 2, choice_for(*s2, Outcome::LoWin));
  auto value = metrics::trr(set, bank);
  CHECK(value.defined);
  CHECK(value.value == doctest::Approx(1.0));

  put(set, *s2, 2, choice_for(*s2, Outcome::HiWin));
  value = metrics::trr(set, bank);
  CHECK(value.value == doctest::Approx(0.5));

  // Two abstains agree: abstain is a third outcome, not a gap.
  put(set, *s2, 1, Choice::Abstain);
  put(set, *s2, 2, Choice::Abstain);
  value = metrics::trr(set, bank);
  CHECK(value.value == doctest::Approx(1.0));

  CHECK(!metrics::trr(TranscriptSet{}, bank).defined);
}

TEST_CASE("pcs: unanimous, three-of-five, and two-of-five framings") {
  BankConfig config = test::small_bank_config(11, 2, 45);
  const Bank bank = build_bank(config);
  const auto& subset = bank.manifest.pcs_pairs.at(LayerId::L4);
  REQUIRE(subset.size() == 45);
  const ItemPair pair = subset.front();

  TranscriptSet set;
  auto set_framings = [&](const std::vector<Outcome>& outcomes) {
    for (int domain = 0; domain < 2; ++domain) {
      for (int persp = 0; persp < 5; ++persp) {
        const Scenario* s = find_scenario(bank, LayerId::L4, pair.lo, pair.hi,
                                          domain, 1, persp);
        REQUIRE(s != nullptr);
        put(set, *s, 1, choice_for(*s, outcomes[persp]));
      }
    }
  };

  set_framings({Outcome::LoWin, Outcome::LoWin, Outcome::LoWin, Outcome::LoWin,
                Outcome::LoWin});
  CHECK(metrics::pcs_pair(set, bank, pair) == doctest::Approx(1.0));

  set_framings({Outcome::LoWin, Outcome::LoWin, Outcome::LoWin, Outcome::HiWin,
                Outcome::HiWin});
  CHECK(metrics::pcs_pair(set, bank, pair) == doctest::Approx(0.6));

  set_framings({Outcome::LoWin, Outcome::LoWin, Outcome::HiWin, Outcome::HiWin,
                Outcome::Abstain});
  CHECK(metrics::pcs_pair(set, bank, pair) == doctest::Approx(0.4));
}

TEST_CASE("pcs outside the subset is a scope error") {
  const Bank bank = build_bank(test::small_bank_config(11, 2, 1));
  const auto& subset = bank.manifest.pcs_pairs.at(LayerId::L4);
  ItemPair outside{LayerId::L4, 0, 1};
  if (!subset.empty() && subset.front() == outside) {
    outside = ItemPair{LayerId::L4, 0, 2};
  }
  TranscriptSet set;
  CHECK_THROWS_AS(metrics::pcs_pair(set, bank, outside), Error);
}

TEST_CASE("pcs floor is reported as 0.4 for five framings") {
  const Bank bank = build_bank(test::small_bank_config());
  test::TempDir dir("pcsfloor");
  const auto transcripts =
      test::run_simulated(bank, test::strict_agent(0.0), dir);
  const auto report = metrics::reliability(transcripts, bank);
  CHECK(report.pcs_attainable_floor == doctest::Approx(0.4));
  CHECK(report.pcs_floor_note.find("0.33") != std::string::npos);
}

TEST_CASE("transcripts referencing unknown scenarios are a data error") {
  const Bank bank = build_bank(test::small_bank_config());
  TranscriptSet set;
  Transcript ghost;
  ghost.presentation = {"deadbeefdeadbeef", 1};
  ghost.parsed = Choice::A;
  set.by_key[{"deadbeefdeadbeef", 1}] = ghost;
  CHECK_THROWS_AS(metrics::win_matrix(set, bank, LayerId::L4), Error);
  CHECK_THROWS_AS(metrics::reliability(set, bank), Error);
}

TEST_CASE("pcs is undefined with a reason when the bank has no PCS subset") {
  const Bank bank = build_bank(test::small_bank_config(11, 2, 0));
  test::TempDir dir("nopcs");
  const auto transcripts =
      test::run_simulated(bank, test::strict_agent(0.0), dir);
  const auto report = metrics::reliability(transcripts, bank);
  CHECK(report.trr.defined);
  CHECK(report.srs.defined);
  CHECK(!report.pcs.defined);
  CHECK(!report.pcs.reason.empty());
}

TEST_CASE("ranking: ties break toward the lower taxonomy index") {
  metrics::WinMatrix zeros(LayerId::L4, 10);
  CHECK(metrics::ranking(zeros) == test::identity_order());

  metrics::WinMatrix tied(LayerId::L4, 10);
  tied.wins[7][2] = 5;
  tied.wins[3][1] = 5;
  const auto order = metrics::ranking(tied);
  CHECK(order[0] == 3);  // same wins as 7, lower index first
  CHECK(order[1] == 7);
}

TEST_CASE("classification covers all four quadrants") {
  using metrics::Quadrant;
  const metrics::Thresholds t;
  CHECK(metrics::classify_ih(0.90, 0.90, t).quadrant ==
        Quadrant::GenuineHierarchy);
  CHECK(metrics::classify_ih(0.90, 0.40, t).quadrant ==
        Quadrant::FramingSensitivity);
  CHECK(metrics::classify_ih(0.40, 0.90, t).quadrant ==
        Quadrant::StochasticNoise);
  CHECK(metrics::classify_ih(0.50, 0.50, t).quadrant ==
        Quadrant::StructuralIncoherence);
  // Boundary: thresholds are inclusive highs.
  CHECK(metrics::classify_ih(0.75, 0.75, t).quadrant ==
        Quadrant::GenuineHierarchy);
}

TEST_CASE("classification is total and consistent for any thresholds") {
  SplitMix rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const double trr = rng.unit();
    const double srs = rng.unit();
    const metrics::Thresholds t{0.01 + 0.99 * rng.unit(),
                                0.01 + 0.99 * rng.unit()};
    const auto d = metrics::classify_ih(trr, srs, t);
    const bool trr_high = trr >= t.tau_trr;
    const bool srs_high = srs >= t.tau_srs;
    if (trr_high && srs_high) {
      CHECK(d.quadrant == metrics::Quadrant::GenuineHierarchy);
    } else if (trr_high) {
      CHECK(d.quadrant == metrics::Quadrant::FramingSensitivity);
    } else if (srs_high) {
      CHECK(d.quadrant == metrics::Quadrant::StochasticNoise);
    } else {
      CHECK(d.quadrant == metrics::Quadrant::StructuralIncoherence);
    }
    CHECK(d.thresholds.tau_trr == t.tau_trr);
  }
}

TEST_CASE("reliability metrics are invariant under option-side flips") {
  const Bank bank = build_bank(test::small_bank_config());
  test::TempDir dir("flip");
  const auto transcripts =
      test::run_simulated(bank, test::strict_agent(0.15, 5), dir);

  // Flip every option assignment and the recorded A/B labels with it; all
  // item-space metrics must be unchanged.
  Bank flipped = bank;
  TranscriptSet flipped_set;
  for (Scenario& s : flipped.scenarios) s.lo_is_option_a = !s.lo_is_option_a;
  for (const auto& [key, t] : transcripts.by_key) {
    Transcript copy = t;
    if (copy.parsed == Choice::A) copy.parsed = Choice::B;
    else if (copy.parsed == Choice::B) copy.parsed = Choice::A;
    flipped_set.by_key[key] = copy;
  }

  const auto original = metrics::reliability(transcripts, bank);
  const auto mirrored = metrics::reliability(flipped_set, flipped);
  CHECK(original.trr.value == doctest::Approx(mirrored.trr.value));
  CHECK(original.srs.value == doctest::Approx(mirrored.srs.value));
  CHECK(original.pcs.value == doctest::Approx(mirrored.pcs.value));

  const auto m1 = metrics::win_matrix(transcripts, bank, LayerId::L4);
  const auto m2 = metrics::win_matrix(flipped_set, flipped, LayerId::L4);
  CHECK(metrics::value_entropy(m1) ==
        doctest::Approx(metrics::value_entropy(m2)));
}

TEST_CASE("permuting item labels permutes the ranking and keeps entropy") {
  SplitMix rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    metrics::WinMatrix m(LayerId::L4, 10);
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        if (i != j) m.wins[i][j] = static_cast<int>(rng.bounded(20));
      }
    }
    std::vector<int> perm = test::identity_order();
    deterministic_shuffle(perm, rng.next());

    metrics::WinMatrix permuted(LayerId::L4, 10);
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        permuted.wins[perm[i]][perm[j]] = m.wins[i][j];
      }
    }
    CHECK(metrics::value_entropy(m) ==
          doctest::Approx(metrics::value_entropy(permuted)).epsilon(1e-12));

    // Equivariance holds up to tie-breaking, so compare win totals along
    // the two rankings instead of the index sequences.
    const auto r1 = metrics::ranking(m);
    const auto r2 = metrics::ranking(permuted);
    for (std::size_t k = 0; k < r1.size(); ++k) {
      CHECK(m.row_wins(r1[k]) == permuted.row_wins(r2[k]));
    }
  }
}
