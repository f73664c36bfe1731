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

#include "prism/profile.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "prism/errors.hpp"

namespace prism::profile {

using nlohmann::json;

namespace {

json metric_to_json(const metrics::MetricValue& v) {
  if (!v.defined) {
    return json{{"defined", false}, {"reason", v.reason}};
  }
  json out{{"defined", true},
           {"value", v.value},
           {"cells_used", v.cells_used},
           {"cells_excluded", v.cells_excluded}};
  if (!v.reason.empty()) out["note"] = v.reason;
  return out;
}

json layer_profile_to_json(const metrics::LayerProfile& p,
                           const Taxonomy& taxonomy) {
  json wins = json::array();
  for (const auto& row : p.matrix.wins) wins.push_back(row);
  json ranking_names = json::array();
  for (int item : p.ranking) ranking_names.push_back(taxonomy.item(item).name);
  return json{{"win_matrix", wins},
              {"abstains", p.matrix.abstains},
              {"presentations", p.matrix.presentations},
              {"ranking", p.ranking},
              {"ranking_names", ranking_names},
              {"value_entropy_bits", metric_to_json(p.value_entropy)},
              {"entropy_round_robin_floor_bits", p.entropy_round_robin_floor},
              {"pair_win_rates", p.pair_win_rates}};
}

json reliability_to_json(const metrics::ReliabilityReport& r) {
  return json{{"trr", metric_to_json(r.trr)},
              {"trr_decisive_only", metric_to_json(r.trr_decisive)},
              {"srs", metric_to_json(r.srs)},
              {"srs_decisive_only", metric_to_json(r.srs_decisive)},
              {"pcs", metric_to_json(r.pcs)},
              {"pcs_decisive_only", metric_to_json(r.pcs_decisive)},
              {"pcs_attainable_floor", r.pcs_attainable_floor},
              {"pcs_floor_note", r.pcs_floor_note},
              {"abstain_rate", r.abstain_rate},
              {"trr_per_pair", r.trr_per_pair},
              {"trr_per_domain", r.trr_per_domain},
              {"srs_per_pair", r.srs_per_pair},
              {"srs_per_domain", r.srs_per_domain}};
}

}  // namespace

json build_profile(const gateway::TranscriptSet& transcripts, const Bank& bank,
                   const ProfileInputs& inputs) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["respondent"] = inputs.respondent_id;
  doc["bank"] = {{"seed", bank.manifest.seed},
                 {"domains", bank.manifest.domains},
                 {"instantiations", bank.manifest.instantiations},
                 {"perspectives", bank.manifest.perspectives}};
  doc["decode_params"] = {{"temperature", inputs.decode.temperature},
                          {"max_tokens", inputs.decode.max_tokens},
                          {"sampling_seed", inputs.decode.sampling_seed}};

  std::map<LayerId, metrics::LayerProfile> profiles;
  for (LayerId layer : bank.manifest.layers) {
    profiles[layer] = metrics::layer_profile(transcripts, bank, layer);
    doc["layers"][layer_tag(layer)] = layer_profile_to_json(
        profiles[layer], bank.taxonomies.layer(layer));
  }

  const metrics::ReliabilityReport rel =
      metrics::reliability(transcripts, bank);
  doc["reliability"] = reliability_to_json(rel);

  if (rel.trr.defined && rel.srs.defined) {
    const metrics::IHDiagnosis diagnosis =
        metrics::classify_ih(rel.trr.value, rel.srs.value, inputs.thresholds);
    doc["diagnosis"] = {{"quadrant", metrics::quadrant_name(diagnosis.quadrant)},
                        {"trr", diagnosis.trr},
                        {"srs", diagnosis.srs},
                        {"thresholds",
                         {{"trr", diagnosis.thresholds.tau_trr},
                          {"srs", diagnosis.thresholds.tau_srs}}}};
  } else {
    doc["diagnosis"] = {{"defined", false},
                        {"reason", "TRR and SRS must both be defined"}};
  }

  doc["composite_weights"] = {{"w4", inputs.weights.w4},
                              {"w3", inputs.weights.w3},
                              {"w2", inputs.weights.w2}};

  if (inputs.rules && profiles.count(LayerId::L4)) {
    const cascade::MappingRuleSet& rules = *inputs.rules;
    json cascade_block;
    cascade_block["rule_set"] = {{"name", rules.name},
                                 {"version", rules.version}};
    auto predictions = cascade::predict_lower_layers(
        profiles.at(LayerId::L4), bank.taxonomies, rules);

    for (LayerId layer : {LayerId::L3, LayerId::L2}) {
      const auto& prefs = predictions.at(layer);
      json pred_arr = json::array();
      for (const auto& p : prefs.prefs) {
        pred_arr.push_back({{"preferred", p.preferred},
                            {"other", p.other},
                            {"rule", p.rule_id}});
      }
      json layer_block;
      layer_block["predictions"] = pred_arr;
      const bool measured = std::find(bank.manifest.layers.begin(),
                                      bank.manifest.layers.end(), layer) !=
                            bank.manifest.layers.end();
      if (measured) {
        std::map<std::string, metrics::WinMatrix> per_domain;
        for (const Domain& d : bank.domains()) {
          per_domain.emplace(d.name, metrics::win_matrix(transcripts, bank,
                                                         layer, d.index));
        }
        const cascade::CciResult cci = cascade::cci_report(
            prefs, profiles.at(layer).matrix, per_domain);
        layer_block["cci"] = metric_to_json(cci.overall);
        json per_domain_json;
        for (const auto& [domain, value] : cci.per_domain) {
          per_domain_json[domain] = metric_to_json(value);
        }
        layer_block["cci_per_domain"] = per_domain_json;
        layer_block["cci_domains_above_0.60"] = cci.domains_above_060;
        layer_block["gate_cci_above_0.60_in_3_of_7_domains"] =
            cci.gate_cci_060_in_3_of_7;

        json flags = json::array();
        for (const auto& flag :
             cascade::flag_pollution(prefs, per_domain)) {
          flags.push_back({{"pair", pair_key(flag.pair)},
                           {"preferred_item", flag.preferred},
                           {"discordant_domains", flag.discordant_domains},
                           {"concordant_domains", flag.concordant_domains},
                           {"rule", flag.rule_id}});
        }
        layer_block["pollution_flags"] = flags;
      } else {
        layer_block["cci"] = json{{"defined", false},
                                  {"reason", "layer not measured in bank"}};
        layer_block["pollution_flags"] = json::array();
      }
      cascade_block[layer_tag(layer)] = layer_block;
    }
    doc["cascade"] = cascade_block;
  }
  return doc;
}

std::map<LayerId, metrics::LayerProfile> profiles_from_json(
    const json& profile_json) {
  std::map<LayerId, metrics::LayerProfile> out;
  for (const auto& [key, body] : profile_json.at("layers").items()) {
    auto layer = parse_layer(key);
    if (!layer) raise(ErrorKind::Data, "bad layer key in profile record");
    metrics::LayerProfile p;
    p.layer = *layer;
    const auto& wins = body.at("win_matrix");
    p.matrix = metrics::WinMatrix(*layer, static_cast<int>(wins.size()));
    for (std::size_t i = 0; i < wins.size(); ++i) {
      p.matrix.wins[i] = wins[i].get<std::vector<int>>();
    }
    p.ranking = body.at("ranking").get<std::vector<int>>();
    out[*layer] = std::move(p);
  }
  return out;
}

json build_aspa_block(const json& profile_json, const Bank& bank,
                      const std::vector<cascade::FreeformScenario>& fixtures,
                      const cascade::CompositeWeights& weights) {
  // Hold-out check: fixtures must not reuse the bank's audit domains, whose
  // (pair, domain) combinations the profiling bank already covers.
  for (const auto& fixture : fixtures) {
    for (const std::string& domain : bank.manifest.domains) {
      if (fixture.domain == domain) {
        raise(ErrorKind::HoldoutViolation,
              "fixture " + fixture.id + " uses bank domain '" + domain + "'");
      }
    }
  }
  auto profiles = profiles_from_json(profile_json);
  for (LayerId layer : kAllLayers) {
    if (!profiles.count(layer)) {
      raise(ErrorKind::Data,
            std::string("profile record lacks ") + layer_tag(layer) +
                "; all three layers are needed for stance prediction");
    }
  }
  std::vector<cascade::StancePrediction> predictions;
  predictions.reserve(fixtures.size());
  json per_fixture = json::array();
  for (const auto& fixture : fixtures) {
    auto p = cascade::predict_freeform(profiles.at(LayerId::L4),
                                       profiles.at(LayerId::L3),
                                       profiles.at(LayerId::L2), weights,
                                       fixture);
    per_fixture.push_back({{"fixture", p.fixture_id},
                           {"predicted", p.predicted},
                           {"label", fixture.label},
                           {"correct", p.correct},
                           {"score1", p.score1},
                           {"score2", p.score2}});
    predictions.push_back(std::move(p));
  }
  const double accuracy = cascade::aspa(predictions);
  return json{{"aspa", accuracy},
              {"fixture_count", predictions.size()},
              {"gate_aspa_above_0.65", accuracy > 0.65},
              {"weights",
               {{"w4", weights.w4}, {"w3", weights.w3}, {"w2", weights.w2}}},
              {"predictions", per_fixture}};
}

namespace {

std::string fmt(double value) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << value;
  return out.str();
}

std::string metric_line(const json& m) {
  if (!m.value("defined", false)) {
    return "undefined (" + m.value("reason", std::string("no reason")) + ")";
  }
  return fmt(m.at("value").get<double>());
}

}  // namespace

std::string render_report(const json& profile_json) {
  std::ostringstream out;
  const std::string respondent = profile_json.at("respondent");
  out << "=================================================================\n";
  out << "Reasoning-integrity audit report (" << kFormatVersion << ")\n";
  out << "Respondent: " << respondent << "\n";
  out << "=================================================================\n\n";

  out << "Bank: seed " << profile_json.at("bank").at("seed") << ", "
      << profile_json.at("bank").at("domains").size() << " domains, "
      << profile_json.at("bank").at("instantiations") << " instantiations, "
      << profile_json.at("bank").at("perspectives") << " perspectives\n";
  const auto& decode = profile_json.at("decode_params");
  out << "Decode params: temperature " << decode.at("temperature")
      << ", max_tokens " << decode.at("max_tokens") << ", sampling_seed "
      << decode.at("sampling_seed") << "\n\n";

  out << "Layer rankings (best first)\n";
  out << "-----------------------------------------------------------------\n";
  for (const auto& [layer, body] : profile_json.at("layers").items()) {
    out << layer << ":\n";
    int rank = 1;
    for (const auto& name : body.at("ranking_names")) {
      out << "  " << std::setw(2) << rank++ << ". "
          << name.get<std::string>() << "\n";
    }
    out << "  value entropy: " << metric_line(body.at("value_entropy_bits"))
        << " bits (round-robin floor "
        << fmt(body.at("entropy_round_robin_floor_bits").get<double>())
        << ", ceiling " << fmt(std::log2(10.0)) << ")\n";
  }
  out << "\n";

  const auto& rel = profile_json.at("reliability");
  out << "Reliability metrics\n";
  out << "-----------------------------------------------------------------\n";
  out << "  TRR (test-retest):          " << metric_line(rel.at("trr")) << "\n";
  out << "  SRS (scenario replication): " << metric_line(rel.at("srs")) << "\n";
  out << "  PCS (perspective):          " << metric_line(rel.at("pcs")) << "\n";
  out << "  PCS attainable floor:       "
      << fmt(rel.at("pcs_attainable_floor").get<double>()) << "  ("
      << rel.at("pcs_floor_note").get<std::string>() << ")\n";
  out << "  abstain rate:               "
      << fmt(rel.at("abstain_rate").get<double>()) << "\n\n";

  out << "Consistency diagnosis (TRR x SRS)\n";
  out << "-----------------------------------------------------------------\n";
  const auto& diag = profile_json.at("diagnosis");
  if (diag.contains("quadrant")) {
    out << "  quadrant:   " << diag.at("quadrant").get<std::string>() << "\n";
    out << "  TRR " << fmt(diag.at("trr").get<double>()) << " vs threshold "
        << fmt(diag.at("thresholds").at("trr").get<double>()) << "\n";
    out << "  SRS " << fmt(diag.at("srs").get<double>()) << " vs threshold "
        << fmt(diag.at("thresholds").at("srs").get<double>()) << "\n";
  } else {
    out << "  undefined (" << diag.value("reason", std::string()) << ")\n";
  }
  out << "\n";

  if (profile_json.contains("cascade")) {
    const auto& cascade_block = profile_json.at("cascade");
    out << "Cascade consistency (rule set "
        << cascade_block.at("rule_set").at("name").get<std::string>() << " "
        << cascade_block.at("rule_set").at("version").get<std::string>()
        << ")\n";
    out << "-----------------------------------------------------------------\n";
    for (const char* layer : {"L3-epistemic", "L2-source"}) {
      if (!cascade_block.contains(layer)) continue;
      const auto& body = cascade_block.at(layer);
      out << "  " << layer << ": CCI " << metric_line(body.at("cci"));
      if (body.contains("cci_domains_above_0.60")) {
        out << "  (domains above 0.60: "
            << body.at("cci_domains_above_0.60").get<int>() << "; gate >0.60 in >=3 of 7: "
            << (body.at("gate_cci_above_0.60_in_3_of_7_domains").get<bool>()
                    ? "pass"
                    : "fail")
            << ")";
      }
      out << "\n";
      const auto& flags = body.at("pollution_flags");
      if (flags.empty()) {
        out << "    pollution flags: none\n";
      } else {
        out << "    pollution flags:\n";
        for (const auto& flag : flags) {
          out << "      pair " << flag.at("pair").get<std::string>()
              << " deviates in";
          for (const auto& d : flag.at("discordant_domains")) {
            out << " " << d.get<std::string>();
          }
          out << " (concordant in " << flag.at("concordant_domains").get<int>()
              << " domains; rule " << flag.at("rule").get<std::string>()
              << ")\n";
        }
      }
    }
    out << "\n";
  }

  if (profile_json.contains("aspa")) {
    const auto& aspa_block = profile_json.at("aspa");
    out << "Free-form stance prediction\n";
    out << "-----------------------------------------------------------------\n";
    out << "  ASPA: " << fmt(aspa_block.at("aspa").get<double>()) << " over "
        << aspa_block.at("fixture_count") << " held-out fixtures (gate >0.65: "
        << (aspa_block.at("gate_aspa_above_0.65").get<bool>() ? "pass"
                                                              : "fail")
        << ")\n";
    const auto& weights = aspa_block.at("weights");
    out << "  composite weights: w4 " << fmt(weights.at("w4").get<double>())
        << ", w3 " << fmt(weights.at("w3").get<double>()) << ", w2 "
        << fmt(weights.at("w2").get<double>()) << "\n\n";
  }

  out << "Config echo\n";
  out << "-----------------------------------------------------------------\n";
  const auto& weights = profile_json.at("composite_weights");
  out << "  composite weights: w4 " << fmt(weights.at("w4").get<double>())
      << ", w3 " << fmt(weights.at("w3").get<double>()) << ", w2 "
      << fmt(weights.at("w2").get<double>()) << "\n";
  if (profile_json.contains("cascade")) {
    out << "  rule set: "
        << profile_json.at("cascade").at("rule_set").at("name").get<std::string>()
        << " ("
        << profile_json.at("cascade").at("rule_set").at("version")
               .get<std::string>()
        << ")\n";
  }
  if (diag.contains("thresholds")) {
    out << "  thresholds: TRR "
        << fmt(diag.at("thresholds").at("trr").get<double>()) << ", SRS "
        << fmt(diag.at("thresholds").at("srs").get<double>()) << "\n";
  }
  return out.str();
}

}  // namespace prism::profile
