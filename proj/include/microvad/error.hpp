/*
 * Copyright 2026 The microvad Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MICROVAD_ERROR_HPP_
#define MICROVAD_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace microvad {

enum class ErrorKind {
  kInvalidArgument,
  kFormat,
  kConfig,
  kIo,
  kInsufficientData,
  kDegenerateInput,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kFormat: return "format-error";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
  }
  return "unknown";
}

/// Base of every error the library throws. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed binary payload; carries the byte offset where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::uint64_t offset)
      : Error(ErrorKind::kFormat,
              message + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

inline Error invalid_argument(const std::string& msg) {
  return Error(ErrorKind::kInvalidArgument, msg);
}
inline Error config_error(const std::string& msg) {
  return Error(ErrorKind::kConfig, msg);
}
inline Error io_error(const std::string& msg) {
  return Error(ErrorKind::kIo, msg);
}
inline Error insufficient_data(const std::string& msg) {
  return Error(ErrorKind::kInsufficientData, msg);
}
inline Error degenerate_input(const std::string& msg) {
  return Error(ErrorKind::kDegenerateInput, msg);
}

}  // namespace microvad

#endif  // MICROVAD_ERROR_HPP_
