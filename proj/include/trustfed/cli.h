/*
 * Copyright 2026 The TrustFed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef TRUSTFED_CLI_H_
#define TRUSTFED_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trustfed::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

// Entry point shared by the executable and tests. Subcommands: generate,
// run, sweep-k. Human-readable output goes to `out`, diagnostics to `err`.
int Main(const std::vector<std::string>& args, std::ostream& out,
         std::ostream& err);

// Writes `contents` to a sibling temporary file, then renames it over `path`.
void WriteFileAtomically(const std::filesystem::path& path,
                         const std::string& contents);

}  // namespace trustfed::cli

#endif  // TRUSTFED_CLI_H_
