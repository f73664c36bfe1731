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

#include "prism/agents.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

#include "prism/errors.hpp"
#include "prism/hash.hpp"

namespace prism::agents {

using nlohmann::json;

namespace {

// Rank of an item in a best-first order; lower is better.
int rank_in_order(const Order& order, int item) {
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r] == item) return static_cast<int>(r);
  }
  raise(ErrorKind::Data, "item " + std::to_string(item) +
                             " not in the agent's item universe");
}

void validate_order(const Order& order, const std::string& what) {
  std::set<int> seen(order.begin(), order.end());
  if (seen.size() != order.size()) {
    raise(ErrorKind::Config, what + " is not a permutation");
  }
  for (int item : order) {
    if (item < 0 || item >= static_cast<int>(order.size())) {
      raise(ErrorKind::Config, what + " has out-of-range item " +
                                   std::to_string(item));
    }
  }
}

const Order& order_for(const AgentSpec& agent, LayerId layer) {
  auto found = agent.orders.find(layer);
  if (found == agent.orders.end()) {
    raise(ErrorKind::Data,
          std::string("agent has no order for ") + layer_tag(layer));
  }
  return found->second;
}

// Counter-based draw in [0,1): a pure function of agent seed, scenario id
// and repeat index.
double presentation_draw(const AgentSpec& agent, const Scenario& scenario,
                         int repeat_index) {
  std::uint64_t h = hash_mix(agent.seed, fnv1a64(scenario.id));
  h = hash_mix(h, static_cast<std::uint64_t>(repeat_index));
  return unit_from_hash(h);
}

}  // namespace

void validate_agent_spec(const AgentSpec& agent) {
  switch (agent.variant) {
    case Variant::Strict:
      if (agent.epsilon < 0.0 || agent.epsilon >= 0.5) {
        raise(ErrorKind::Config, "strict agent needs 0 <= epsilon < 0.5");
      }
      if (agent.orders.empty()) {
        raise(ErrorKind::Config, "strict agent needs at least one order");
      }
      for (const auto& [layer, order] : agent.orders) {
        validate_order(order, std::string("order for ") + layer_tag(layer));
      }
      break;
    case Variant::BradleyTerry:
      if (!(agent.temperature > 0.0)) {
        raise(ErrorKind::Config, "bradley-terry agent needs temperature > 0");
      }
      if (agent.utilities.empty()) {
        raise(ErrorKind::Config, "bradley-terry agent needs utilities");
      }
      break;
    case Variant::Framing:
      if (agent.orders.empty()) {
        raise(ErrorKind::Config, "framing agent needs a base order");
      }
      for (const auto& [layer, order] : agent.orders) {
        validate_order(order, std::string("base order for ") + layer_tag(layer));
      }
      for (const auto& [key, order] : agent.framing_table) {
        validate_order(order, "framing table entry");
        (void)key;
      }
      break;
    case Variant::Incoherent:
      break;
  }
}

double lo_win_probability(const AgentSpec& agent, const Scenario& scenario) {
  const int lo = scenario.pair.lo;
  const int hi = scenario.pair.hi;
  switch (agent.variant) {
    case Variant::Strict: {
      const Order& order = order_for(agent, scenario.layer);
      const bool lo_preferred =
          rank_in_order(order, lo) < rank_in_order(order, hi);
      return lo_preferred ? 1.0 - agent.epsilon : agent.epsilon;
    }
    case Variant::BradleyTerry: {
      auto found = agent.utilities.find(scenario.layer);
      if (found == agent.utilities.end()) {
        raise(ErrorKind::Data,
              std::string("agent has no utilities for ") +
                  layer_tag(scenario.layer));
      }
      const auto& u = found->second;
      if (lo >= static_cast<int>(u.size()) || hi >= static_cast<int>(u.size())) {
        raise(ErrorKind::Data, "pair item outside the agent's utility vector");
      }
      const double delta = (u[static_cast<std::size_t>(lo)] -
                            u[static_cast<std::size_t>(hi)]) /
                           agent.temperature;
      return 1.0 / (1.0 + std::exp(-delta));
    }
    case Variant::Framing: {
      FramingKey key{scenario.layer, scenario.instantiation,
                     scenario.perspective};
      auto found = agent.framing_table.find(key);
      const Order& order =
          found != agent.framing_table.end() ? found->second
                                             : order_for(agent, scenario.layer);
      return rank_in_order(order, lo) < rank_in_order(order, hi) ? 1.0 : 0.0;
    }
    case Variant::Incoherent:
      return 0.5;
  }
  return 0.5;
}

ItemChoice choose_item(const AgentSpec& agent, const Scenario& scenario,
                       int repeat_index) {
  const double p_lo = lo_win_probability(agent, scenario);
  if (agent.variant == Variant::Framing) {
    // Deterministic in the framing: the repeat index never enters.
    return p_lo >= 0.5 ? ItemChoice::Lo : ItemChoice::Hi;
  }
  const double draw = presentation_draw(agent, scenario, repeat_index);
  return draw < p_lo ? ItemChoice::Lo : ItemChoice::Hi;
}

std::string choose(const AgentSpec& agent, const Scenario& scenario,
                   int repeat_index) {
  const ItemChoice item = choose_item(agent, scenario, repeat_index);
  const bool chose_lo = item == ItemChoice::Lo;
  return chose_lo == scenario.lo_is_option_a ? "A" : "B";
}

AgentSpec parse_agent_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("agent spec: ") + e.what());
  }
  AgentSpec spec;
  try {
    const std::string variant = doc.at("variant").get<std::string>();
    if (variant == "strict") {
      spec.variant = Variant::Strict;
    } else if (variant == "bradley_terry") {
      spec.variant = Variant::BradleyTerry;
    } else if (variant == "framing") {
      spec.variant = Variant::Framing;
    } else if (variant == "incoherent") {
      spec.variant = Variant::Incoherent;
    } else {
      raise(ErrorKind::Config, "unknown agent variant '" + variant + "'");
    }
    spec.seed = doc.value("seed", 0ull);
    spec.epsilon = doc.value("epsilon", 0.0);
    spec.temperature = doc.value("temperature", 1.0);

    if (doc.contains("orders")) {
      for (const auto& [key, arr] : doc.at("orders").items()) {
        auto layer = parse_layer(key);
        if (!layer) raise(ErrorKind::Config, "bad layer '" + key + "'");
        spec.orders[*layer] = arr.get<Order>();
      }
    }
    if (doc.contains("utilities")) {
      for (const auto& [key, arr] : doc.at("utilities").items()) {
        auto layer = parse_layer(key);
        if (!layer) raise(ErrorKind::Config, "bad layer '" + key + "'");
        spec.utilities[*layer] = arr.get<std::vector<double>>();
      }
    }
    if (doc.contains("framing_table")) {
      for (const auto& entry : doc.at("framing_table")) {
        auto layer = parse_layer(entry.at("layer").get<std::string>());
        if (!layer) raise(ErrorKind::Config, "bad layer in framing table");
        FramingKey key{*layer, entry.at("instantiation").get<int>(),
                       entry.at("perspective").get<int>()};
        spec.framing_table[key] = entry.at("order").get<Order>();
      }
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("agent spec: ") + e.what());
  }
  validate_agent_spec(spec);
  return spec;
}

}  // namespace prism::agents
