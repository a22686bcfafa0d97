// Copyright 2026 The hngfn Authors
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

#ifndef HNGFN_ERROR_HPP_
#define HNGFN_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace hngfn {

// Shapes of tensors or vectors do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An object was used in a state that does not permit the call (e.g. backward
// without a cached forward pass, posterior on an unfitted surrogate).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A non-finite value showed up where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A collection is too large (enumeration caps) or too small (datasets).
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid or unknown configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric is undefined for the given input (e.g. zero rank variance).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace hngfn

#endif  // HNGFN_ERROR_HPP_
