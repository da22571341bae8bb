// Copyright 2026 The memalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MEMALIGN_CLI_HPP_
#define MEMALIGN_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace memalign {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNumeric = 2,
  kExitIo = 3,
};

// Entry point for the `memalign` command line. Returns the process exit
// code; never calls std::exit.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// Maps the currently handled exception onto an exit code, printing it.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace memalign

#endif  // MEMALIGN_CLI_HPP_
