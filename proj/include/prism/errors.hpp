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

#include <stdexcept>
#include <string>

namespace prism {

enum class ErrorKind {
  Config,           // malformed or inconsistent configuration
  Taxonomy,         // invalid taxonomy (wrong item count, duplicate indices)
  Data,             // transcript/fixture referencing unknown entities
  RuleSet,          // contradictory or cyclic mapping rules
  Scope,            // request outside the measured scope (e.g. non-PCS pair)
  UndefinedMetric,  // metric has no data to be computed from
  Transport,        // network/HTTP failure after retries
  Auth,             // credential rejection
  HoldoutViolation, // fixture overlaps the profiling bank
  BankMissing,      // workspace has no bank
  Io,               // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config-error";
    case ErrorKind::Taxonomy: return "taxonomy-error";
    case ErrorKind::Data: return "data-error";
    case ErrorKind::RuleSet: return "rule-set-error";
    case ErrorKind::Scope: return "scope-error";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::Transport: return "transport-error";
    case ErrorKind::Auth: return "auth-error";
    case ErrorKind::HoldoutViolation: return "holdout-violation";
    case ErrorKind::BankMissing: return "bank-missing";
    case ErrorKind::Io: return "io-error";
  }
  return "error";
}

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, std::string(error_kind_name(kind)) + ": " + message);
}

}  // namespace prism
