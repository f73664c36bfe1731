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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prism/agents.hpp"
#include "prism/bank.hpp"

namespace prism::gateway {

enum class Choice { A, B, Abstain };

const char* choice_name(Choice c);
std::optional<Choice> parse_choice_name(const std::string& text);

// A or B iff the text contains exactly one standalone occurrence of an
// option label (case-insensitive, word-bounded), checking the final line
// first and then the whole text. Total: anything else is Abstain.
Choice parse_choice(const std::string& raw_text);

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 8;
  std::uint64_t sampling_seed = 0;

  std::string cache_fragment() const;
};

struct EndpointConfig {
  std::string base_url;                        // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";   // generic chat-completion shape
  std::string model;
  std::string api_key_env;  // credential comes from this env var, never inline
  std::map<std::string, std::string> extra_headers;
  int timeout_seconds = 60;
};

struct RespondentRef {
  enum class Kind { Remote, Simulated };
  Kind kind = Kind::Simulated;
  std::string id;
  DecodeParams decode;
  agents::AgentSpec agent;    // simulated only
  EndpointConfig endpoint;    // remote only
};

struct RetryPolicy {
  int max_attempts = 4;
  int initial_backoff_ms = 250;
  double backoff_multiplier = 2.0;
};

struct CampaignPlan {
  std::uint64_t order_seed = 1;
  int concurrency = 1;
  RetryPolicy retry;
  double failure_budget = 0.02;  // abort past this fraction of transport errors
};

struct RespondentConfig {
  RespondentRef respondent;
  CampaignPlan plan;
};

RespondentConfig parse_respondent_config(const std::string& json_text);

struct Presentation {
  std::string scenario_id;
  int repeat_index = 1;  // neutral scenarios run twice, PCS reframings once

  friend auto operator<=>(const Presentation&, const Presentation&) = default;
};

struct Transcript {
  Presentation presentation;
  std::string respondent_id;
  std::string raw_text;
  Choice parsed = Choice::Abstain;
  bool parse_ok = false;
  int wall_ms = 0;  // 0 for simulated respondents, keeps logs reproducible
  std::string error;  // transport/auth note; empty on success
};

using TranscriptKey = std::pair<std::string, int>;  // scenario id, repeat

struct TranscriptSet {
  std::map<TranscriptKey, Transcript> by_key;

  const Transcript* find(const std::string& scenario_id, int repeat) const;
  std::size_t size() const { return by_key.size(); }
};

// Prompt text is fixed at bank-build time so repeats are bit-identical.
const std::string& render_prompt(const Scenario& scenario);

// Every neutral scenario twice (repeats 1 and 2), every reframed scenario
// once, in a deterministic seed-driven shuffle.
std::vector<Presentation> presentation_order(const Bank& bank,
                                             std::uint64_t order_seed);

struct SubmitResult {
  std::string raw_text;
  bool transport_error = false;
  bool auth_error = false;
  std::string error_note;
  int wall_ms = 0;
};

// One respondent endpoint: remote HTTP model or local simulated agent.
class Respondent {
 public:
  virtual ~Respondent() = default;
  virtual const std::string& id() const = 0;
  virtual const DecodeParams& decode() const = 0;
  virtual SubmitResult submit(const Scenario& scenario, int repeat_index,
                              const RetryPolicy& retry) = 0;
};

std::unique_ptr<Respondent> make_respondent(const RespondentRef& ref);

// Test seam: submit against an explicit HTTP endpoint once per attempt with
// exponential backoff. Sleeps are injectable so tests stay fast.
using SleepFn = std::function<void(int /*ms*/)>;
SubmitResult http_submit(const EndpointConfig& endpoint,
                         const DecodeParams& decode, const std::string& prompt,
                         const RetryPolicy& retry,
                         const SleepFn& sleep_fn = {});

struct CampaignCounts {
  std::size_t total = 0;
  std::size_t already_done = 0;
  std::size_t from_cache = 0;
  std::size_t submitted = 0;
  std::size_t abstains = 0;
  std::size_t transport_errors = 0;
};

struct CampaignResult {
  CampaignCounts counts;
  bool aborted = false;  // failure budget exceeded; partial log intact
  std::string abort_reason;
};

// Executes (or resumes) a campaign. Completed presentations are loaded from
// the transcript log, then from the cache; only the remainder is submitted.
// The log is append-only and written in presentation order regardless of the
// worker count.
CampaignResult run_campaign(const Bank& bank, Respondent& respondent,
                            const CampaignPlan& plan,
                            const std::string& transcript_path,
                            const std::string& cache_dir);

TranscriptSet load_transcripts(const std::string& transcript_path);

std::string cache_key(const std::string& scenario_id,
                      const std::string& respondent_id, int repeat_index,
                      const DecodeParams& decode);

}  // namespace prism::gateway
