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

#include "prism/workspace.hpp"

#include <fstream>
#include <sstream>

#include "prism/bank.hpp"
#include "prism/errors.hpp"

namespace prism::workspace {

namespace fs = std::filesystem;
using nlohmann::json;

Workspace::Workspace(std::string root) : root_(std::move(root)) {
  if (root_.empty()) raise(ErrorKind::Config, "workspace path is empty");
}

fs::path Workspace::bank_dir() const { return fs::path(root_) / "bank"; }
fs::path Workspace::cache_dir() const { return fs::path(root_) / "cache"; }

fs::path Workspace::campaign_dir(const std::string& respondent_id) const {
  return fs::path(root_) / "campaigns" / respondent_id;
}

fs::path Workspace::transcript_path(const std::string& respondent_id) const {
  return campaign_dir(respondent_id) / "transcripts.jsonl";
}

fs::path Workspace::campaign_manifest_path(
    const std::string& respondent_id) const {
  return campaign_dir(respondent_id) / "manifest.json";
}

fs::path Workspace::profile_path(const std::string& respondent_id) const {
  return fs::path(root_) / "profiles" / (respondent_id + ".profile.json");
}

fs::path Workspace::report_path(const std::string& respondent_id) const {
  return fs::path(root_) / "reports" / (respondent_id + ".report.txt");
}

fs::path Workspace::report_record_path(
    const std::string& respondent_id) const {
  return fs::path(root_) / "reports" / (respondent_id + ".report.json");
}

fs::path Workspace::lock_path() const { return fs::path(root_) / ".lock"; }

bool Workspace::has_bank() const {
  return fs::exists(bank_dir() / "manifest.json");
}

WorkspaceLock::WorkspaceLock(const Workspace& ws, bool force)
    : path_(ws.lock_path()) {
  fs::create_directories(path_.parent_path());
  if (force) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  // create_directory is atomic: it fails when the lock already exists.
  std::error_code ec;
  acquired_ = fs::create_directory(path_, ec) && !ec;
}

WorkspaceLock::~WorkspaceLock() {
  if (acquired_) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
}

void write_json_file(const fs::path& path, const json& value) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << value.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot read " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return doc;
}

json read_versioned_json(const fs::path& path) {
  json doc = read_json_file(path);
  if (doc.value("format_version", "") != kFormatVersion) {
    raise(ErrorKind::Config,
          path.string() + " has unsupported format_version '" +
              doc.value("format_version", "") + "' (want " + kFormatVersion +
              ")");
  }
  return doc;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  out << content;
}

}  // namespace prism::workspace
