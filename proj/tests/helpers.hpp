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

#include <filesystem>
#include <random>
#include <string>

#include "prism/agents.hpp"
#include "prism/bank.hpp"
#include "prism/gateway.hpp"

#ifndef PRISM_TEST_DATA_DIR
#define PRISM_TEST_DATA_DIR "data"
#endif

namespace prism::test {

inline std::string data_file(const std::string& name) {
  return (std::filesystem::path(PRISM_TEST_DATA_DIR) / name).string();
}

class TempDir {
 public:
  explicit TempDir(const std::string& label) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("prism_" + label + "_" + std::to_string(rd()) + "_" +
             std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string sub(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline BankConfig small_bank_config(std::uint64_t seed = 11,
                                    int domains = 2,
                                    int pcs_pairs = 3) {
  BankConfig config;
  config.seed = seed;
  config.taxonomies_path = data_file("taxonomies.json");
  config.templates_path = data_file("templates.json");
  config.domains.resize(static_cast<std::size_t>(domains));
  config.pcs_pair_count = pcs_pairs;
  return config;
}

inline BankConfig default_bank_config(std::uint64_t seed = 42) {
  BankConfig config;
  config.seed = seed;
  config.taxonomies_path = data_file("taxonomies.json");
  config.templates_path = data_file("templates.json");
  return config;
}

inline agents::Order identity_order() {
  return agents::Order{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
}

inline agents::AgentSpec strict_agent(double epsilon = 0.0,
                                      std::uint64_t seed = 7) {
  agents::AgentSpec spec;
  spec.variant = agents::Variant::Strict;
  spec.seed = seed;
  spec.epsilon = epsilon;
  spec.orders[LayerId::L4] = identity_order();
  spec.orders[LayerId::L3] = identity_order();
  spec.orders[LayerId::L2] = identity_order();
  return spec;
}

inline agents::AgentSpec incoherent_agent(std::uint64_t seed = 3) {
  agents::AgentSpec spec;
  spec.variant = agents::Variant::Incoherent;
  spec.seed = seed;
  return spec;
}

// Framing permutation table that splits every pair's orientation as evenly
// as parity allows across instantiations: alternating an order with its
// reverse flips every pair, and a third distinct order breaks the tie.
inline agents::AgentSpec framing_agent(int instantiations,
                                       std::uint64_t seed = 5) {
  agents::AgentSpec spec;
  spec.variant = agents::Variant::Framing;
  spec.seed = seed;
  agents::Order base = identity_order();
  agents::Order reversed(base.rbegin(), base.rend());
  agents::Order rotated = {5, 6, 7, 8, 9, 0, 1, 2, 3, 4};
  agents::Order rotated_reversed(rotated.rbegin(), rotated.rend());
  const std::vector<agents::Order> cycle = {base, reversed, rotated,
                                            rotated_reversed, base};
  for (LayerId layer : kAllLayers) {
    spec.orders[layer] = base;
    for (int inst = 1; inst <= instantiations; ++inst) {
      const agents::Order& order =
          cycle[static_cast<std::size_t>((inst - 1) % cycle.size())];
      for (int persp = 0; persp < 5; ++persp) {
        spec.framing_table[agents::FramingKey{layer, inst, persp}] = order;
      }
    }
  }
  return spec;
}

// Runs a full simulated campaign into temp storage and returns transcripts.
inline gateway::TranscriptSet run_simulated(const Bank& bank,
                                            const agents::AgentSpec& agent,
                                            const TempDir& dir,
                                            const std::string& id = "sim",
                                            int threads = 1,
                                            std::uint64_t order_seed = 99) {
  gateway::RespondentRef ref;
  ref.kind = gateway::RespondentRef::Kind::Simulated;
  ref.id = id;
  ref.agent = agent;
  auto respondent = gateway::make_respondent(ref);
  gateway::CampaignPlan plan;
  plan.order_seed = order_seed;
  plan.concurrency = threads;
  const std::string log = dir.sub(id + ".transcripts.jsonl");
  gateway::run_campaign(bank, *respondent, plan, log, dir.sub("cache"));
  return gateway::load_transcripts(log);
}

}  // namespace prism::test
