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

#include "prism/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "prism/errors.hpp"
#include "prism/hash.hpp"

namespace prism::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

const char* choice_name(Choice c) {
  switch (c) {
    case Choice::A: return "A";
    case Choice::B: return "B";
    case Choice::Abstain: return "ABSTAIN";
  }
  return "ABSTAIN";
}

std::optional<Choice> parse_choice_name(const std::string& text) {
  if (text == "A") return Choice::A;
  if (text == "B") return Choice::B;
  if (text == "ABSTAIN") return Choice::Abstain;
  return std::nullopt;
}

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Counts word-bounded, case-insensitive occurrences of the single-letter
// label in `text`.
int count_label(const std::string& text, char label) {
  int count = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char lower =
        static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    if (lower != label) continue;
    const bool left_ok = i == 0 || !is_word_char(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !is_word_char(text[i + 1]);
    if (left_ok && right_ok) ++count;
  }
  return count;
}

std::optional<Choice> single_label(const std::string& text) {
  const int a = count_label(text, 'a');
  const int b = count_label(text, 'b');
  if (a + b != 1) return std::nullopt;
  return a == 1 ? Choice::A : Choice::B;
}

std::string final_line(const std::string& text) {
  std::size_t end = text.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  if (end == 0) return "";
  std::size_t start = text.rfind('\n', end - 1);
  start = start == std::string::npos ? 0 : start + 1;
  return text.substr(start, end - start);
}

}  // namespace

Choice parse_choice(const std::string& raw_text) {
  if (auto c = single_label(final_line(raw_text))) return *c;
  if (auto c = single_label(raw_text)) return *c;
  return Choice::Abstain;
}

std::string DecodeParams::cache_fragment() const {
  std::ostringstream out;
  out << "t" << temperature << "|m" << max_tokens << "|s" << sampling_seed;
  return out.str();
}

const Transcript* TranscriptSet::find(const std::string& scenario_id,
                                      int repeat) const {
  auto found = by_key.find({scenario_id, repeat});
  return found == by_key.end() ? nullptr : &found->second;
}

const std::string& render_prompt(const Scenario& scenario) {
  return scenario.prompt;
}

std::vector<Presentation> presentation_order(const Bank& bank,
                                             std::uint64_t order_seed) {
  std::vector<Presentation> out;
  out.reserve(bank.scenarios.size() * 2);
  for (const Scenario& s : bank.scenarios) {
    if (s.perspective == 0) {
      out.push_back({s.id, 1});
      out.push_back({s.id, 2});
    } else {
      out.push_back({s.id, 1});
    }
  }
  deterministic_shuffle(out, hash_mix(order_seed, bank.manifest.seed));
  return out;
}

std::string cache_key(const std::string& scenario_id,
                      const std::string& respondent_id, int repeat_index,
                      const DecodeParams& decode) {
  std::ostringstream key;
  key << scenario_id << '|' << respondent_id << '|' << repeat_index << '|'
      << decode.cache_fragment();
  return hex16(fnv1a64(key.str())) + hex16(splitmix64(fnv1a64(key.str())));
}

// ---------------------------------------------------------------------------
// Respondents

namespace {

class SimulatedRespondent final : public Respondent {
 public:
  SimulatedRespondent(const RespondentRef& ref) : ref_(ref) {
    agents::validate_agent_spec(ref_.agent);
  }

  const std::string& id() const override { return ref_.id; }
  const DecodeParams& decode() const override { return ref_.decode; }

  SubmitResult submit(const Scenario& scenario, int repeat_index,
                      const RetryPolicy&) override {
    SubmitResult r;
    r.raw_text = agents::choose(ref_.agent, scenario, repeat_index);
    r.wall_ms = 0;
    return r;
  }

 private:
  RespondentRef ref_;
};

class RemoteRespondent final : public Respondent {
 public:
  RemoteRespondent(const RespondentRef& ref) : ref_(ref) {
    if (ref_.endpoint.base_url.empty()) {
      raise(ErrorKind::Config, "remote respondent needs endpoint.base_url");
    }
  }

  const std::string& id() const override { return ref_.id; }
  const DecodeParams& decode() const override { return ref_.decode; }

  SubmitResult submit(const Scenario& scenario, int repeat_index,
                      const RetryPolicy& retry) override {
    (void)repeat_index;
    return http_submit(ref_.endpoint, ref_.decode, render_prompt(scenario),
                       retry);
  }

 private:
  RespondentRef ref_;
};

}  // namespace

SubmitResult http_submit(const EndpointConfig& endpoint,
                         const DecodeParams& decode, const std::string& prompt,
                         const RetryPolicy& retry, const SleepFn& sleep_fn) {
  const auto started = std::chrono::steady_clock::now();
  auto finish = [&](SubmitResult r) {
    r.wall_ms = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started)
            .count());
    return r;
  };

  json body{{"model", endpoint.model},
            {"messages", json::array({json{{"role", "user"},
                                           {"content", prompt}}})},
            {"temperature", decode.temperature},
            {"max_tokens", decode.max_tokens}};
  if (decode.sampling_seed != 0) body["seed"] = decode.sampling_seed;

  httplib::Client client(endpoint.base_url);
  client.set_connection_timeout(endpoint.timeout_seconds);
  client.set_read_timeout(endpoint.timeout_seconds);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (!key || !*key) {
      SubmitResult r;
      r.auth_error = true;
      r.error_note = "auth-error: environment variable " +
                     endpoint.api_key_env + " is empty";
      return finish(r);
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  for (const auto& [k, v] : endpoint.extra_headers) headers.emplace(k, v);

  const std::string payload = body.dump();
  std::string last_error;
  int backoff_ms = retry.initial_backoff_ms;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      if (sleep_fn) {
        sleep_fn(backoff_ms);
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      }
      backoff_ms = static_cast<int>(backoff_ms * retry.backoff_multiplier);
    }
    auto response =
        client.Post(endpoint.path, headers, payload, "application/json");
    if (!response) {
      last_error = "network failure (" +
                   httplib::to_string(response.error()) + ")";
      continue;
    }
    if (response->status == 401 || response->status == 403) {
      SubmitResult r;
      r.auth_error = true;
      r.error_note =
          "auth-error: HTTP " + std::to_string(response->status);
      return finish(r);
    }
    if (response->status == 429 || response->status >= 500) {
      last_error = "HTTP " + std::to_string(response->status);
      continue;
    }
    if (response->status != 200) {
      SubmitResult r;
      r.transport_error = true;
      r.error_note = "transport-error: unexpected HTTP " +
                     std::to_string(response->status);
      return finish(r);
    }
    try {
      json doc = json::parse(response->body);
      SubmitResult r;
      r.raw_text = doc.at("choices").at(0).at("message").at("content")
                       .get<std::string>();
      return finish(r);
    } catch (const json::exception& e) {
      SubmitResult r;
      r.transport_error = true;
      r.error_note = std::string("transport-error: malformed response: ") +
                     e.what();
      return finish(r);
    }
  }
  SubmitResult r;
  r.transport_error = true;
  r.error_note = "transport-error: retries exhausted after " +
                 std::to_string(retry.max_attempts) + " attempts: " +
                 last_error;
  return finish(r);
}

std::unique_ptr<Respondent> make_respondent(const RespondentRef& ref) {
  if (ref.id.empty()) raise(ErrorKind::Config, "respondent needs an id");
  if (ref.kind == RespondentRef::Kind::Simulated) {
    return std::make_unique<SimulatedRespondent>(ref);
  }
  return std::make_unique<RemoteRespondent>(ref);
}

RespondentConfig parse_respondent_config(const std::string& json_text) {
  RespondentConfig cfg;
  try {
    json doc = json::parse(json_text);
    if (doc.contains("format_version") &&
        doc["format_version"] != kFormatVersion) {
      raise(ErrorKind::Config,
            "respondent config has unsupported format_version");
    }
    cfg.respondent.id = doc.at("id").get<std::string>();
    const std::string kind = doc.value("kind", "simulated");
    if (kind == "simulated") {
      cfg.respondent.kind = RespondentRef::Kind::Simulated;
      cfg.respondent.agent = agents::parse_agent_spec(doc.at("agent").dump());
    } else if (kind == "remote") {
      cfg.respondent.kind = RespondentRef::Kind::Remote;
      const auto& ep = doc.at("endpoint");
      cfg.respondent.endpoint.base_url = ep.at("base_url").get<std::string>();
      cfg.respondent.endpoint.path =
          ep.value("path", cfg.respondent.endpoint.path);
      cfg.respondent.endpoint.model = ep.value("model", "");
      cfg.respondent.endpoint.api_key_env = ep.value("api_key_env", "");
      cfg.respondent.endpoint.timeout_seconds =
          ep.value("timeout_seconds", cfg.respondent.endpoint.timeout_seconds);
      if (ep.contains("extra_headers")) {
        for (const auto& [k, v] : ep.at("extra_headers").items()) {
          cfg.respondent.endpoint.extra_headers[k] = v.get<std::string>();
        }
      }
    } else {
      raise(ErrorKind::Config, "respondent kind must be simulated or remote");
    }
    if (doc.contains("decode")) {
      const auto& d = doc.at("decode");
      cfg.respondent.decode.temperature = d.value("temperature", 0.0);
      cfg.respondent.decode.max_tokens = d.value("max_tokens", 8);
      cfg.respondent.decode.sampling_seed = d.value("sampling_seed", 0ull);
    }
    if (doc.contains("plan")) {
      const auto& p = doc.at("plan");
      cfg.plan.order_seed = p.value("seed", cfg.plan.order_seed);
      cfg.plan.concurrency = p.value("concurrency", cfg.plan.concurrency);
      cfg.plan.failure_budget =
          p.value("failure_budget", cfg.plan.failure_budget);
      if (p.contains("retry")) {
        const auto& r = p.at("retry");
        cfg.plan.retry.max_attempts =
            r.value("max_attempts", cfg.plan.retry.max_attempts);
        cfg.plan.retry.initial_backoff_ms =
            r.value("initial_backoff_ms", cfg.plan.retry.initial_backoff_ms);
        cfg.plan.retry.backoff_multiplier =
            r.value("backoff_multiplier", cfg.plan.retry.backoff_multiplier);
      }
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, std::string("respondent config: ") + e.what());
  }
  if (cfg.plan.concurrency < 1) {
    raise(ErrorKind::Config, "plan concurrency must be >= 1");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Transcript persistence

namespace {

json transcript_to_json(const Transcript& t) {
  json doc{{"scenario_id", t.presentation.scenario_id},
           {"repeat", t.presentation.repeat_index},
           {"respondent", t.respondent_id},
           {"raw_text", t.raw_text},
           {"parsed", choice_name(t.parsed)},
           {"parse_ok", t.parse_ok},
           {"wall_ms", t.wall_ms}};
  if (!t.error.empty()) doc["error"] = t.error;
  return doc;
}

Transcript transcript_from_json(const json& doc) {
  Transcript t;
  t.presentation.scenario_id = doc.at("scenario_id").get<std::string>();
  t.presentation.repeat_index = doc.at("repeat").get<int>();
  t.respondent_id = doc.at("respondent").get<std::string>();
  t.raw_text = doc.at("raw_text").get<std::string>();
  auto parsed = parse_choice_name(doc.at("parsed").get<std::string>());
  if (!parsed) raise(ErrorKind::Data, "bad parsed choice in transcript");
  t.parsed = *parsed;
  t.parse_ok = doc.at("parse_ok").get<bool>();
  t.wall_ms = doc.value("wall_ms", 0);
  t.error = doc.value("error", "");
  return t;
}

}  // namespace

TranscriptSet load_transcripts(const std::string& transcript_path) {
  TranscriptSet set;
  std::ifstream in(transcript_path);
  if (!in) return set;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json doc = json::parse(line);
    if (header) {
      if (doc.value("format_version", "") != kFormatVersion) {
        raise(ErrorKind::Config,
              "transcript file has unsupported format_version");
      }
      header = false;
      continue;
    }
    Transcript t = transcript_from_json(doc);
    TranscriptKey key{t.presentation.scenario_id, t.presentation.repeat_index};
    // First occurrence wins: the original submission is authoritative.
    set.by_key.emplace(std::move(key), std::move(t));
  }
  return set;
}

namespace {

class TranscriptLog {
 public:
  explicit TranscriptLog(const std::string& path) {
    const bool existed = fs::exists(path) && fs::file_size(path) > 0;
    out_.open(path, std::ios::app | std::ios::binary);
    if (!out_) raise(ErrorKind::Io, "cannot open transcript log " + path);
    if (!existed) {
      out_ << json{{"format_version", kFormatVersion}, {"kind", "transcripts"}}
                  .dump()
           << '\n';
      out_.flush();
    }
  }

  void append(const Transcript& t) {
    out_ << transcript_to_json(t).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

std::optional<Transcript> cache_lookup(const fs::path& cache_dir,
                                       const std::string& key) {
  const fs::path path = cache_dir / key.substr(0, 2) / (key + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json doc;
  try {
    in >> doc;
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable entries are treated as misses
  }
  if (doc.value("format_version", "") != kFormatVersion) return std::nullopt;
  return transcript_from_json(doc.at("transcript"));
}

void cache_store(const fs::path& cache_dir, const std::string& key,
                 const Transcript& t) {
  const fs::path dir = cache_dir / key.substr(0, 2);
  fs::create_directories(dir);
  const fs::path path = dir / (key + ".json");
  if (fs::exists(path)) return;  // idempotent by key
  const fs::path tmp = dir / (key + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << json{{"format_version", kFormatVersion},
                {"transcript", transcript_to_json(t)}}
               .dump()
        << '\n';
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);  // concurrent writers race benignly
}

}  // namespace

CampaignResult run_campaign(const Bank& bank, Respondent& respondent,
                            const CampaignPlan& plan,
                            const std::string& transcript_path,
                            const std::string& cache_dir) {
  const std::vector<Presentation> order =
      presentation_order(bank, plan.order_seed);
  const TranscriptSet existing = load_transcripts(transcript_path);

  CampaignResult result;
  result.counts.total = order.size();

  // Presentations still owed after the resume scan, in presentation order.
  std::vector<const Presentation*> pending;
  for (const Presentation& p : order) {
    if (existing.find(p.scenario_id, p.repeat_index)) {
      ++result.counts.already_done;
      const auto* t = existing.find(p.scenario_id, p.repeat_index);
      if (t->parsed == Choice::Abstain) ++result.counts.abstains;
      if (!t->error.empty()) ++result.counts.transport_errors;
    } else {
      pending.push_back(&p);
    }
  }

  TranscriptLog log(transcript_path);
  const fs::path cache(cache_dir);
  const std::size_t budget_limit = static_cast<std::size_t>(
      plan.failure_budget * static_cast<double>(result.counts.total));

  std::mutex mu;
  std::size_t next_index = 0;    // next pending item to hand out
  std::size_t next_commit = 0;   // next pending item to write
  std::map<std::size_t, Transcript> ready;
  bool aborted = false;

  auto worker = [&]() {
    for (;;) {
      std::size_t index;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (aborted || next_index >= pending.size()) return;
        index = next_index++;
      }
      const Presentation& p = *pending[index];
      const Scenario& scenario = bank.scenario(p.scenario_id);
      const std::string key =
          cache_key(scenario.id, respondent.id(), p.repeat_index,
                    respondent.decode());

      Transcript t;
      t.presentation = p;
      t.respondent_id = respondent.id();
      bool from_cache = false;
      if (auto cached = cache_lookup(cache, key)) {
        t = *cached;
        t.presentation = p;
        t.respondent_id = respondent.id();
        from_cache = true;
      } else {
        SubmitResult r = respondent.submit(scenario, p.repeat_index,
                                           plan.retry);
        t.raw_text = r.raw_text;
        t.wall_ms = r.wall_ms;
        if (r.transport_error || r.auth_error) {
          t.parsed = Choice::Abstain;
          t.parse_ok = false;
          t.error = r.error_note;
        } else {
          t.parsed = parse_choice(r.raw_text);
          t.parse_ok = t.parsed != Choice::Abstain;
        }
        // Failures are logged for resume but never cached: a later
        // campaign against a recovered endpoint must submit them afresh.
        if (t.error.empty()) cache_store(cache, key, t);
      }

      std::unique_lock<std::mutex> lock(mu);
      ready.emplace(index, std::move(t));
      if (from_cache) ++result.counts.from_cache;
      else ++result.counts.submitted;
      // Commit in presentation order so the log is identical for any
      // worker count.
      while (!ready.empty() && ready.begin()->first == next_commit) {
        const Transcript& head = ready.begin()->second;
        if (head.parsed == Choice::Abstain) ++result.counts.abstains;
        if (!head.error.empty()) ++result.counts.transport_errors;
        log.append(head);
        ready.erase(ready.begin());
        ++next_commit;
        if (result.counts.transport_errors > budget_limit) {
          aborted = true;
          result.abort_reason =
              "failure budget exceeded: " +
              std::to_string(result.counts.transport_errors) +
              " transport errors over " + std::to_string(result.counts.total) +
              " presentations";
        }
      }
      if (aborted) return;
    }
  };

  const int threads = std::max(1, plan.concurrency);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Out-of-order stragglers that never got committed (abort path) are
  // dropped; their presentations stay owed for the next resume.
  result.aborted = aborted;
  return result;
}

}  // namespace prism::gateway
