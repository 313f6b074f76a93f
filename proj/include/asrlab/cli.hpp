// Copyright 2026 The asrlab Authors. All Rights Reserved.
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

namespace asrlab {

// Exit codes besides 0 (success) and 1 (any other failure).
inline constexpr int kExitUsage = 2;
inline constexpr int kExitMissingInput = 3;
inline constexpr int kExitConfig = 4;

// args[0] is the program name. Diagnostics are a single line on `err`:
// "asrlab: error[<category>]: <message>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asrlab
