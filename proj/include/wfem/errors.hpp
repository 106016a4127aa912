/*
 * Copyright 2026 The wfem-gp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef WFEM_ERRORS_HPP_
#define WFEM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace wfem {

/// Dimension or layout mismatch in an input.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A recorded operation produced a non-finite value. Carries the index of
/// the offending tape node so failures can be traced to one operation.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long node_index)
      : std::runtime_error(what + " (tape node " + std::to_string(node_index) + ")"),
        node_index_(node_index) {}
  long node_index() const { return node_index_; }

 private:
  long node_index_;
};

/// Positive-definite factorization failed even after jitter escalation.
class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violation on a value-level argument (empty subset, empty
/// metric input, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace wfem

#endif  // WFEM_ERRORS_HPP_
