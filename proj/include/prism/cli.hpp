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

#include <iosfwd>
#include <string>
#include <vector>

namespace prism::cli {

// Exit codes, stable across versions:
//   0 success, 1 usage/config error, 2 refusal or guard (overwrite, lock),
//   3 transport failure / budget exceeded, 4 missing data.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRefused = 2;
inline constexpr int kExitTransport = 3;
inline constexpr int kExitMissingData = 4;

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

}  // namespace prism::cli
