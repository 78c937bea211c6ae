// Copyright 2026 The fedcrl Authors
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

#ifndef FEDCRL_ERRORS_HPP_
#define FEDCRL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fedcrl {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input (configs, cmdp documents, arguments). `field` is a
// dotted/indexed path into the offending document, empty when not applicable.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// An agent attempted to read a constraint signal outside its assignment.
class ConstraintAccessError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A metric whose denominator is zero.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedcrl

#endif  // FEDCRL_ERRORS_HPP_
