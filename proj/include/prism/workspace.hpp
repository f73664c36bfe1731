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
#include <string>

#include "json.hpp"

namespace prism::workspace {

// One workspace = one bank + many respondents. Every persisted artifact
// carries the format version; loaders refuse to mix versions.
class Workspace {
 public:
  explicit Workspace(std::string root);

  const std::string& root() const { return root_; }
  std::filesystem::path bank_dir() const;
  std::filesystem::path cache_dir() const;
  std::filesystem::path campaign_dir(const std::string& respondent_id) const;
  std::filesystem::path transcript_path(const std::string& respondent_id) const;
  std::filesystem::path campaign_manifest_path(
      const std::string& respondent_id) const;
  std::filesystem::path profile_path(const std::string& respondent_id) const;
  std::filesystem::path report_path(const std::string& respondent_id) const;
  std::filesystem::path report_record_path(
      const std::string& respondent_id) const;
  std::filesystem::path lock_path() const;

  bool has_bank() const;

 private:
  std::string root_;
};

// Guards a workspace against concurrent CLI invocations. Acquisition fails
// (refusal, not error) when another process holds the lock.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const Workspace& ws, bool force = false);
  ~WorkspaceLock();

  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

  bool acquired() const { return acquired_; }

 private:
  std::filesystem::path path_;
  bool acquired_ = false;
};

void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& value);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Reads a versioned JSON artifact and checks its format_version field.
nlohmann::json read_versioned_json(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace prism::workspace
