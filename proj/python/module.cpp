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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "json.hpp"

#include "prism/bank.hpp"
#include "prism/cascade.hpp"
#include "prism/cli.hpp"
#include "prism/gateway.hpp"
#include "prism/metrics.hpp"
#include "prism/profile.hpp"
#include "prism/workspace.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// nlohmann::json -> native python objects, so callers get plain dicts.
py::object json_to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return py::none();
    case json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case json::value_t::number_integer:
      return py::int_(j.get<long long>());
    case json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case json::value_t::number_float:
      return py::float_(j.get<double>());
    case json::value_t::string:
      return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list out;
      for (const auto& item : j) out.append(json_to_py(item));
      return out;
    }
    case json::value_t::object: {
      py::dict out;
      for (const auto& [key, value] : j.items()) {
        out[py::str(key)] = json_to_py(value);
      }
      return out;
    }
    default:
      return py::none();
  }
}

prism::LayerId layer_from_str(const std::string& text) {
  auto layer = prism::parse_layer(text);
  if (!layer) throw py::value_error("unknown layer '" + text + "'");
  return *layer;
}

prism::Bank bank_for(const std::string& workspace_dir) {
  prism::workspace::Workspace ws(workspace_dir);
  return prism::load_bank(ws.bank_dir().string());
}

}  // namespace

PYBIND11_MODULE(prismaudit, m) {
  m.doc() =
      "Forced-choice audit toolkit: scenario banks, campaign runner, "
      "consistency metrics and cascade analysis.";

  m.def(
      "enumerate_pairs",
      [](const std::string& layer, const std::string& taxonomies_path) {
        auto taxonomies = prism::load_taxonomies(prism::resolve_data_file(
            taxonomies_path, "taxonomies.json"));
        std::vector<std::pair<int, int>> out;
        for (const auto& pair :
             prism::enumerate_pairs(taxonomies.layer(layer_from_str(layer)))) {
          out.emplace_back(pair.lo, pair.hi);
        }
        return out;
      },
      py::arg("layer"), py::arg("taxonomies_path") = "");

  m.def(
      "parse_choice",
      [](const std::string& raw_text) {
        return std::string(
            prism::gateway::choice_name(prism::gateway::parse_choice(raw_text)));
      },
      py::arg("raw_text"));

  m.def(
      "value_entropy",
      [](const std::vector<std::vector<int>>& wins) {
        prism::metrics::WinMatrix matrix(prism::LayerId::L4,
                                         static_cast<int>(wins.size()));
        matrix.wins = wins;
        return prism::metrics::value_entropy(matrix);
      },
      py::arg("win_matrix"));

  m.def("round_robin_entropy_floor", &prism::metrics::round_robin_entropy_floor,
        py::arg("items") = 10);

  m.def(
      "ranking",
      [](const std::vector<std::vector<int>>& wins) {
        prism::metrics::WinMatrix matrix(prism::LayerId::L4,
                                         static_cast<int>(wins.size()));
        matrix.wins = wins;
        return prism::metrics::ranking(matrix);
      },
      py::arg("win_matrix"));

  m.def(
      "classify_ih",
      [](double trr, double srs, double tau_trr, double tau_srs) {
        const auto d = prism::metrics::classify_ih(
            trr, srs, prism::metrics::Thresholds{tau_trr, tau_srs});
        return std::string(prism::metrics::quadrant_name(d.quadrant));
      },
      py::arg("trr"), py::arg("srs"), py::arg("tau_trr") = 0.75,
      py::arg("tau_srs") = 0.75);

  m.def(
      "build_bank",
      [](const std::string& workspace_dir, const std::string& config_json) {
        prism::workspace::Workspace ws(workspace_dir);
        const prism::Bank bank =
            prism::build_bank(prism::parse_bank_config(config_json));
        prism::save_bank(bank, ws.bank_dir().string());
        py::dict counts;
        for (prism::LayerId layer : bank.manifest.layers) {
          py::dict entry;
          entry["neutral"] = bank.manifest.neutral_counts.at(layer);
          entry["pcs"] = bank.manifest.pcs_counts.at(layer);
          counts[prism::layer_tag(layer)] = entry;
        }
        return counts;
      },
      py::arg("workspace"), py::arg("config_json"));

  m.def(
      "run_campaign",
      [](const std::string& workspace_dir, const std::string& respondent_json,
         int threads) {
        prism::workspace::Workspace ws(workspace_dir);
        auto config = prism::gateway::parse_respondent_config(respondent_json);
        if (threads > 0) config.plan.concurrency = threads;
        const prism::Bank bank = bank_for(workspace_dir);
        auto respondent = prism::gateway::make_respondent(config.respondent);
        std::filesystem::create_directories(
            ws.campaign_dir(config.respondent.id));
        const auto result = prism::gateway::run_campaign(
            bank, *respondent, config.plan,
            ws.transcript_path(config.respondent.id).string(),
            ws.cache_dir().string());
        py::dict out;
        out["total"] = result.counts.total;
        out["already_done"] = result.counts.already_done;
        out["from_cache"] = result.counts.from_cache;
        out["submitted"] = result.counts.submitted;
        out["abstains"] = result.counts.abstains;
        out["transport_errors"] = result.counts.transport_errors;
        out["aborted"] = result.aborted;
        return out;
      },
      py::arg("workspace"), py::arg("respondent_json"), py::arg("threads") = 1);

  m.def(
      "compute_profile",
      [](const std::string& workspace_dir, const std::string& respondent_id,
         const std::string& rules_path) {
        prism::workspace::Workspace ws(workspace_dir);
        const prism::Bank bank = bank_for(workspace_dir);
        const auto transcripts = prism::gateway::load_transcripts(
            ws.transcript_path(respondent_id).string());
        prism::profile::ProfileInputs inputs;
        inputs.respondent_id = respondent_id;
        inputs.rules = prism::cascade::load_rule_set(prism::resolve_data_file(
            rules_path, "rules/baseline_rules.json"));
        const json profile =
            prism::profile::build_profile(transcripts, bank, inputs);
        prism::workspace::write_json_file(ws.profile_path(respondent_id),
                                          profile);
        return json_to_py(profile);
      },
      py::arg("workspace"), py::arg("respondent_id"),
      py::arg("rules_path") = "");

  m.def(
      "predict_fixtures",
      [](const std::string& workspace_dir, const std::string& respondent_id,
         const std::string& fixtures_path) {
        prism::workspace::Workspace ws(workspace_dir);
        const prism::Bank bank = bank_for(workspace_dir);
        json profile = prism::workspace::read_versioned_json(
            ws.profile_path(respondent_id));
        const auto fixtures = prism::cascade::load_fixtures(fixtures_path);
        const auto& w = profile.at("composite_weights");
        const auto weights = prism::cascade::normalize_weights(
            w.at("w4").get<double>(), w.at("w3").get<double>(),
            w.at("w2").get<double>());
        profile["aspa"] = prism::profile::build_aspa_block(profile, bank,
                                                           fixtures, weights);
        prism::workspace::write_json_file(ws.profile_path(respondent_id),
                                          profile);
        return json_to_py(profile["aspa"]);
      },
      py::arg("workspace"), py::arg("respondent_id"), py::arg("fixtures_path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = prism::cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
