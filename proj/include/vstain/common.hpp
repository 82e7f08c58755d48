/* Copyright 2026 The vstain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef VSTAIN_COMMON_HPP_
#define VSTAIN_COMMON_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vstain {

// Raised for invalid user-supplied configuration or inputs. The CLI maps it to
// a dedicated exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a loss term stops being finite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::string term, double value);
  const std::string& term() const { return term_; }
  double value() const { return value_; }

 private:
  std::string term_;
  double value_;
};

// 64-bit FNV-1a. Used for manifest and parameter checksums.
class Fnv1a {
 public:
  void update(std::span<const std::byte> bytes);
  void update(std::string_view text);
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

// splitmix64 finalizer; derives independent stream seeds from (seed, salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace vstain

#endif  // VSTAIN_COMMON_HPP_
