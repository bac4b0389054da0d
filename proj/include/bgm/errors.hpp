// Copyright 2026 The BGM Authors
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

#ifndef BGM_ERRORS_HPP
#define BGM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bgm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied data or parameters that violate an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A model reached a state its construction should have ruled out.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Classifier training produced a non-finite objective.
class TrainingFailure : public Error {
 public:
  TrainingFailure(int epoch, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Markov chain could not be started or advanced.
class SamplerError : public Error {
 public:
  using Error::Error;
};

/// Importance sampling produced no usable weight.
class EstimationFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset or config file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace bgm

#endif
