// Copyright 2026 The isotrace Authors
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

#ifndef ISOTRACE_ERROR_HPP_
#define ISOTRACE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <utility>

namespace isotrace {

// Base for every error raised by the toolkit. `module()` names the pipeline
// stage that failed and `hint()` carries a remediation suggestion that the CLI
// prints next to the message.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message, std::string hint = {})
      : std::runtime_error(message), module_(std::move(module)), hint_(std::move(hint)) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& hint() const noexcept { return hint_; }

 private:
  std::string module_;
  std::string hint_;
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& message, std::string hint = {})
      : Error("corpus", message, std::move(hint)) {}
};

class LexiconError : public Error {
 public:
  explicit LexiconError(const std::string& message, std::string hint = {})
      : Error("isotope", message, std::move(hint)) {}
};

// The fragment has no viable same-POS alternate and is excluded from probing.
class NoIsotopesError : public Error {
 public:
  explicit NoIsotopesError(const std::string& message)
      : Error("isotope", message) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& message) : Error("selector", message) {}
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& message)
      : Error("probe", message, "the template needs {left}, {mask}, {right} and {candidates}") {}
};

// Raised by backends for timeouts, non-2xx statuses and unparseable bodies.
// `status()` is the HTTP status, 0 for timeouts or connection failures.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status = 0, bool retryable = false)
      : Error("backend", message), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

class StatsError : public Error {
 public:
  explicit StatsError(const std::string& message) : Error("stats", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string hint = {})
      : Error("cli", message, std::move(hint)) {}
};

}  // namespace isotrace

#endif  // ISOTRACE_ERROR_HPP_
