// Copyright 2026 The rwsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <stdexcept>
#include <string>

namespace rwsynth {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kRiskCeiling = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid configuration or input data (bad schema, bad cell, bad field).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(what, ExitCode::kConfig) {}
};

/// A sampler or transform produced a non-finite or otherwise invalid state.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(what, ExitCode::kNumeric) {}
};

/// Filesystem failures (unwritable output directory, missing file, lock).
class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error(what, ExitCode::kFailure) {}
};

}  // namespace rwsynth
