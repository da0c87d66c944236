// Copyright 2026 The Salience Audit Authors.
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

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace salaudit {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be decoded. `field()` names the offending header field or
/// payload property ("magic", "payload length mismatch", "values", ...).
class LoadError : public Error {
 public:
  LoadError(std::string path, std::string field, const std::string& detail)
      : Error(path + ": " + field + ": " + detail),
        path_(std::move(path)),
        field_(std::move(field)) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string path_;
  std::string field_;
};

/// One or more invariants were violated. Collects every violation found
/// instead of stopping at the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  explicit ValidationError(const std::string& violation)
      : ValidationError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const noexcept {
    return violations_;
  }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

/// Two rasters that must share a shape do not.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The input is valid but the quantity is undefined for it (all-zero
/// salience, single-class AUROC, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A run configuration cannot be satisfied.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace salaudit
