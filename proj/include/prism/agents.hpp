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

// Synthetic respondents with known ground truth. Each variant isolates one
// consistency failure mode, so the metric pipeline can be validated against
// agents whose expected profile is known in closed form. Randomness is
// counter-based (hash of agent seed, scenario id, repeat), never a stateful
// generator, so concurrent campaigns cannot perturb draws.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prism/bank.hpp"
#include "prism/taxonomy.hpp"

namespace prism::agents {

enum class Variant { Strict, BradleyTerry, Framing, Incoherent };

// Total order over item indices, best first.
using Order = std::vector<int>;

struct FramingKey {
  LayerId layer = LayerId::L4;
  int instantiation = 1;
  int perspective = 0;

  friend auto operator<=>(const FramingKey&, const FramingKey&) = default;
};

struct AgentSpec {
  Variant variant = Variant::Strict;
  std::uint64_t seed = 0;

  // Strict: picks its higher-ranked item with probability 1 - epsilon.
  std::map<LayerId, Order> orders;
  double epsilon = 0.0;  // 0 <= epsilon < 0.5

  // BradleyTerry: picks i over j with probability
  // 1 / (1 + exp(-(u_i - u_j) / temperature)).
  std::map<LayerId, std::vector<double>> utilities;
  double temperature = 1.0;  // > 0

  // Framing: order swapped per (layer, instantiation, perspective); ignores
  // the repeat index, so it is perfectly repeat-stable by construction.
  std::map<FramingKey, Order> framing_table;
};

AgentSpec parse_agent_spec(const std::string& json_text);

enum class ItemChoice { Lo, Hi };

// Probability that the pair's lo item is chosen, before the deterministic
// draw. Exposed for closed-form checks (e.g. equal utilities -> 0.5).
double lo_win_probability(const AgentSpec& agent, const Scenario& scenario);

// Deterministic choice. Equal (spec incl. seed, scenario, repeat) always
// yields the same item. Throws agent data-error on unknown items.
ItemChoice choose_item(const AgentSpec& agent, const Scenario& scenario,
                       int repeat_index);

// The option label ("A" or "B") the agent emits for this presentation.
std::string choose(const AgentSpec& agent, const Scenario& scenario,
                   int repeat_index);

void validate_agent_spec(const AgentSpec& agent);

}  // namespace prism::agents
