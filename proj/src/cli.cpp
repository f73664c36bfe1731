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

#include "prism/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "prism/bank.hpp"
#include "prism/cascade.hpp"
#include "prism/errors.hpp"
#include "prism/gateway.hpp"
#include "prism/metrics.hpp"
#include "prism/profile.hpp"
#include "prism/workspace.hpp"

namespace prism::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using workspace::Workspace;
using workspace::WorkspaceLock;

namespace {

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Transport:
    case ErrorKind::Auth:
      return kExitTransport;
    case ErrorKind::BankMissing:
      return kExitMissingData;
    default:
      return kExitUsage;
  }
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct GlobalArgs {
  std::string workspace;
  std::string config;
  bool force = false;
  int threads = 0;  // 0 = take the plan's concurrency
};

int cmd_bank(const GlobalArgs& args, std::ostream& out, std::ostream& err) {
  Workspace ws(args.workspace);
  WorkspaceLock lock(ws, false);
  if (!lock.acquired()) {
    err << "workspace is locked by another invocation: "
        << ws.lock_path().string() << "\n";
    return kExitRefused;
  }
  if (ws.has_bank() && !args.force) {
    err << "bank already exists at " << ws.bank_dir().string()
        << "; pass --force to overwrite\n";
    return kExitRefused;
  }
  if (args.config.empty()) {
    err << "bank needs --config pointing at a bank configuration file\n";
    return kExitUsage;
  }
  const BankConfig config =
      parse_bank_config(workspace::read_text_file(args.config));
  const Bank bank = build_bank(config);
  save_bank(bank, ws.bank_dir().string());
  for (LayerId layer : bank.manifest.layers) {
    out << layer_tag(layer) << ": "
        << bank.manifest.neutral_counts.at(layer) << " neutral + "
        << bank.manifest.pcs_counts.at(layer) << " PCS scenarios\n";
  }
  out << "bank written to " << ws.bank_dir().string() << "\n";
  return kExitOk;
}

int cmd_run(const GlobalArgs& args, std::ostream& out, std::ostream& err) {
  Workspace ws(args.workspace);
  WorkspaceLock lock(ws, false);
  if (!lock.acquired()) {
    err << "workspace is locked by another invocation: "
        << ws.lock_path().string() << "\n";
    return kExitRefused;
  }
  if (!ws.has_bank()) {
    err << "no bank in workspace " << args.workspace
        << "; run the bank command first\n";
    return kExitMissingData;
  }
  if (args.config.empty()) {
    err << "run needs --config pointing at a respondent configuration file\n";
    return kExitUsage;
  }
  gateway::RespondentConfig config =
      gateway::parse_respondent_config(workspace::read_text_file(args.config));
  if (args.threads > 0) config.plan.concurrency = args.threads;

  const Bank bank = load_bank(ws.bank_dir().string());
  auto respondent = gateway::make_respondent(config.respondent);
  fs::create_directories(ws.campaign_dir(config.respondent.id));

  const auto result = gateway::run_campaign(
      bank, *respondent, config.plan,
      ws.transcript_path(config.respondent.id).string(),
      ws.cache_dir().string());

  json manifest{
      {"format_version", kFormatVersion},
      {"respondent", config.respondent.id},
      {"kind", config.respondent.kind == gateway::RespondentRef::Kind::Remote
                   ? "remote"
                   : "simulated"},
      {"decode_params",
       {{"temperature", config.respondent.decode.temperature},
        {"max_tokens", config.respondent.decode.max_tokens},
        {"sampling_seed", config.respondent.decode.sampling_seed}}},
      {"plan",
       {{"seed", config.plan.order_seed},
        {"concurrency", config.plan.concurrency},
        {"failure_budget", config.plan.failure_budget}}},
      {"bank_seed", bank.manifest.seed},
      {"status", result.aborted ? "aborted" : "complete"},
      {"counts",
       {{"total", result.counts.total},
        {"already_done", result.counts.already_done},
        {"from_cache", result.counts.from_cache},
        {"submitted", result.counts.submitted},
        {"abstains", result.counts.abstains},
        {"transport_errors", result.counts.transport_errors}}},
      {"updated_at", iso_timestamp()}};
  workspace::write_json_file(ws.campaign_manifest_path(config.respondent.id),
                             manifest);

  out << "presentations: " << result.counts.total << " total, "
      << result.counts.already_done << " already done, "
      << result.counts.from_cache << " from cache, "
      << result.counts.submitted << " submitted\n";
  const double abstain_rate =
      result.counts.total == 0
          ? 0.0
          : static_cast<double>(result.counts.abstains) /
                static_cast<double>(result.counts.total);
  out << "abstains: " << result.counts.abstains << " (rate " << abstain_rate
      << "), transport errors: " << result.counts.transport_errors << "\n";
  if (result.aborted) {
    err << "campaign aborted: " << result.abort_reason
        << " (partial transcripts kept)\n";
    return kExitTransport;
  }
  return kExitOk;
}

struct MetricsConfig {
  metrics::Thresholds thresholds;
  cascade::CompositeWeights weights;
  std::string rules_path;
};

MetricsConfig parse_metrics_config(const std::string& path) {
  MetricsConfig cfg;
  if (path.empty()) return cfg;
  json doc = workspace::read_json_file(path);
  if (doc.contains("thresholds")) {
    cfg.thresholds.tau_trr =
        doc["thresholds"].value("trr", cfg.thresholds.tau_trr);
    cfg.thresholds.tau_srs =
        doc["thresholds"].value("srs", cfg.thresholds.tau_srs);
  }
  if (doc.contains("weights")) {
    cfg.weights = cascade::normalize_weights(doc["weights"].value("w4", 1.0),
                                             doc["weights"].value("w3", 1.0),
                                             doc["weights"].value("w2", 1.0));
  }
  cfg.rules_path = doc.value("rules_path", "");
  return cfg;
}

gateway::DecodeParams decode_from_manifest(const Workspace& ws,
                                           const std::string& respondent_id) {
  gateway::DecodeParams decode;
  const fs::path path = ws.campaign_manifest_path(respondent_id);
  if (!fs::exists(path)) return decode;
  json doc = workspace::read_json_file(path);
  if (doc.contains("decode_params")) {
    decode.temperature = doc["decode_params"].value("temperature", 0.0);
    decode.max_tokens = doc["decode_params"].value("max_tokens", 8);
    decode.sampling_seed = doc["decode_params"].value("sampling_seed", 0ull);
  }
  return decode;
}

int cmd_metrics(const GlobalArgs& args, const std::string& respondent_id,
                const std::string& rules_arg, std::ostream& out,
                std::ostream& err) {
  Workspace ws(args.workspace);
  WorkspaceLock lock(ws, false);
  if (!lock.acquired()) {
    err << "workspace is locked by another invocation: "
        << ws.lock_path().string() << "\n";
    return kExitRefused;
  }
  if (!ws.has_bank()) {
    err << "no bank in workspace " << args.workspace << "\n";
    return kExitMissingData;
  }
  const Bank bank = load_bank(ws.bank_dir().string());
  const auto transcripts = gateway::load_transcripts(
      ws.transcript_path(respondent_id).string());

  // Completeness: one transcript per presentation; campaigns aborted or
  // interrupted fail here with the owed presentations listed.
  std::vector<std::string> missing;
  for (const Scenario& s : bank.scenarios) {
    const int repeats = s.perspective == 0 ? 2 : 1;
    for (int r = 1; r <= repeats; ++r) {
      if (!transcripts.find(s.id, r)) {
        missing.push_back(s.id + "#" + std::to_string(r));
      }
    }
  }
  if (!missing.empty()) {
    err << "campaign incomplete: " << missing.size()
        << " presentations missing";
    for (std::size_t i = 0; i < missing.size() && i < 5; ++i) {
      err << (i == 0 ? ": " : ", ") << missing[i];
    }
    if (missing.size() > 5) err << ", ...";
    err << "\n";
    return kExitMissingData;
  }

  MetricsConfig cfg = parse_metrics_config(args.config);
  if (!rules_arg.empty()) cfg.rules_path = rules_arg;

  profile::ProfileInputs inputs;
  inputs.respondent_id = respondent_id;
  inputs.decode = decode_from_manifest(ws, respondent_id);
  inputs.thresholds = cfg.thresholds;
  inputs.weights = cfg.weights;
  inputs.rules = cascade::load_rule_set(
      resolve_data_file(cfg.rules_path, "rules/baseline_rules.json"));

  const json profile_json =
      profile::build_profile(transcripts, bank, inputs);
  workspace::write_json_file(ws.profile_path(respondent_id), profile_json);

  auto metric_line = [&](const char* name, const json& metric) {
    out << name << ": ";
    if (metric.value("defined", false)) {
      out << metric.at("value").get<double>() << "\n";
    } else {
      out << "undefined (" << metric.value("reason", std::string()) << ")\n";
    }
  };
  const auto& rel = profile_json.at("reliability");
  metric_line("TRR", rel.at("trr"));
  metric_line("SRS", rel.at("srs"));
  metric_line("PCS", rel.at("pcs"));
  if (profile_json.at("diagnosis").contains("quadrant")) {
    out << "diagnosis: "
        << profile_json.at("diagnosis").at("quadrant").get<std::string>()
        << "\n";
  }
  out << "profile written to " << ws.profile_path(respondent_id).string()
      << "\n";
  return kExitOk;
}

int cmd_predict(const GlobalArgs& args, const std::string& respondent_id,
                const std::string& fixtures_path, std::ostream& out,
                std::ostream& err) {
  Workspace ws(args.workspace);
  WorkspaceLock lock(ws, false);
  if (!lock.acquired()) {
    err << "workspace is locked by another invocation: "
        << ws.lock_path().string() << "\n";
    return kExitRefused;
  }
  const fs::path profile_path = ws.profile_path(respondent_id);
  if (!fs::exists(profile_path)) {
    err << "no profile for respondent " << respondent_id
        << "; run the metrics command first\n";
    return kExitMissingData;
  }
  const Bank bank = load_bank(ws.bank_dir().string());
  json profile_json = workspace::read_versioned_json(profile_path);
  const auto fixtures = cascade::load_fixtures(fixtures_path);

  const auto& w = profile_json.at("composite_weights");
  const auto weights = cascade::normalize_weights(w.at("w4").get<double>(),
                                                  w.at("w3").get<double>(),
                                                  w.at("w2").get<double>());
  profile_json["aspa"] =
      profile::build_aspa_block(profile_json, bank, fixtures, weights);
  workspace::write_json_file(profile_path, profile_json);

  out << "ASPA: " << profile_json["aspa"]["aspa"].get<double>() << " over "
      << fixtures.size() << " fixtures (gate >0.65: "
      << (profile_json["aspa"]["gate_aspa_above_0.65"].get<bool>() ? "pass"
                                                                   : "fail")
      << ")\n";
  return kExitOk;
}

int cmd_report(const GlobalArgs& args, const std::string& respondent_id,
               std::ostream& out, std::ostream& err) {
  Workspace ws(args.workspace);
  WorkspaceLock lock(ws, false);
  if (!lock.acquired()) {
    err << "workspace is locked by another invocation: "
        << ws.lock_path().string() << "\n";
    return kExitRefused;
  }
  const fs::path profile_path = ws.profile_path(respondent_id);
  if (!fs::exists(profile_path)) {
    err << "no profile for respondent " << respondent_id << "\n";
    return kExitMissingData;
  }
  const json profile_json = workspace::read_versioned_json(profile_path);
  const std::string report = profile::render_report(profile_json);
  workspace::write_text_file(ws.report_path(respondent_id), report);
  workspace::write_json_file(ws.report_record_path(respondent_id),
                             profile_json);
  out << report;
  out << "report written to " << ws.report_path(respondent_id).string()
      << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"forced-choice reasoning-integrity audit toolkit"};
  app.fallthrough(true);

  GlobalArgs global;
  app.add_option("--workspace", global.workspace, "audit workspace directory")
      ->required();
  app.add_option("--config", global.config, "configuration file for the command");
  app.add_flag("--force", global.force, "override overwrite/lock guards");
  app.add_option("--threads", global.threads,
                 "submission concurrency override");

  auto* bank_cmd = app.add_subcommand("bank", "generate the scenario bank");
  auto* run_cmd = app.add_subcommand("run", "run or resume a campaign");
  auto* metrics_cmd =
      app.add_subcommand("metrics", "compute the profile record");
  auto* predict_cmd =
      app.add_subcommand("predict", "predict held-out free-form fixtures");
  auto* report_cmd = app.add_subcommand("report", "emit the audit report");
  app.require_subcommand(1);

  std::string respondent_id;
  std::string fixtures_path;
  std::string rules_path;
  metrics_cmd->add_option("--respondent", respondent_id, "respondent id")
      ->required();
  metrics_cmd->add_option("--rules", rules_path, "mapping rule set file");
  predict_cmd->add_option("--respondent", respondent_id, "respondent id")
      ->required();
  predict_cmd->add_option("--fixtures", fixtures_path, "fixture file")
      ->required();
  report_cmd->add_option("--respondent", respondent_id, "respondent id")
      ->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (bank_cmd->parsed()) return cmd_bank(global, out, err);
    if (run_cmd->parsed()) return cmd_run(global, out, err);
    if (metrics_cmd->parsed()) {
      return cmd_metrics(global, respondent_id, rules_path, out, err);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(global, respondent_id, fixtures_path, out, err);
    }
    if (report_cmd->parsed()) {
      return cmd_report(global, respondent_id, out, err);
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  err << "no subcommand given\n";
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace prism::cli
