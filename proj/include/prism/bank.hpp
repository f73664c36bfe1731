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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prism/taxonomy.hpp"

namespace prism {

inline constexpr const char* kFormatVersion = "prism/1";

// Narrative templates: a prompt is assembled from a perspective framing, a
// narrative frame filled with a domain setting and the two stake phrases,
// and the strict answer directive. Frames × settings are shared across all
// pairs so the instantiations of one pair differ in surface story only.
struct TemplateSet {
  std::vector<std::string> perspectives;        // [0] = neutral narrator
  std::map<std::string, std::string> settings;  // domain name -> setting
  std::vector<std::string> frames;              // {SETTING} {A} {B} slots
  std::string directive;
};

TemplateSet load_templates(const std::string& path);

// One forced-choice presentation unit.
struct Scenario {
  std::string id;  // content-derived, stable
  LayerId layer = LayerId::L4;
  ItemPair pair;
  Domain domain;
  int instantiation = 1;  // 1..K
  int perspective = 0;    // 0 = neutral narrator
  std::uint64_t side_seed = 0;
  bool lo_is_option_a = true;
  std::string prompt;
};

// Deterministic counterbalancing of which pair item is shown as option A.
// Flipping the low bit of side_seed swaps the assignment.
bool assign_option_sides(const ItemPair& pair, std::uint64_t side_seed);

struct BankConfig {
  std::uint64_t seed = 1;
  std::vector<LayerId> layers = {LayerId::L4, LayerId::L3, LayerId::L2};
  std::vector<std::string> domains = {"healthcare", "law",        "defense",
                                      "education",  "finance",    "journalism",
                                      "public-policy"};
  int instantiations = 3;   // K; >= 2 or repeat/replication metrics collapse
  int perspectives = 5;     // P framings incl. the neutral one
  int pcs_pair_count = 10;  // pairs re-framed for perspective consistency
  std::string taxonomies_path;  // empty -> shipped default
  std::string templates_path;   // empty -> shipped default
};

BankConfig parse_bank_config(const std::string& json_text);

struct BankManifest {
  std::string format_version = kFormatVersion;
  std::uint64_t seed = 0;
  std::vector<LayerId> layers;
  std::vector<std::string> domains;
  int instantiations = 0;
  int perspectives = 0;
  std::map<LayerId, int> neutral_counts;
  std::map<LayerId, int> pcs_counts;
  std::map<LayerId, std::vector<ItemPair>> pcs_pairs;
};

struct Bank {
  BankManifest manifest;
  TaxonomySet taxonomies;
  std::vector<Scenario> scenarios;
  std::map<std::string, std::size_t> by_id;

  const Scenario& scenario(const std::string& id) const;
  std::vector<Domain> domains() const;
};

// Emits every scenario exactly once: all (pair, domain, instantiation)
// triples at perspective 0, plus perspectives 1..P-1 for the PCS pair
// subset at instantiation 1. Same config + seed => byte-identical bank.
Bank build_bank(const BankConfig& config);

void save_bank(const Bank& bank, const std::string& directory);
Bank load_bank(const std::string& directory);

}  // namespace prism
