// Copyright 2026 The rfi-qkd-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace rfiqkd {

/// Input violates a documented precondition (bad dimension, non-prime d,
/// out-of-range probability, malformed file contents, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is well formed but some required piece is absent, e.g. a missing
/// measurement setting pair.
class IncompleteInput : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Operation is not defined for the given configuration (qubit-only calls
/// with d != 2).
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

}  // namespace detail
}  // namespace rfiqkd
