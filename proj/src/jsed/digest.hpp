/* Copyright 2026 The jsed Authors. All Rights Reserved.

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

#ifndef JSED_DIGEST_HPP_
#define JSED_DIGEST_HPP_

#include <cstdint>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <span>
#include <string>
#include <string_view>

namespace jsed {

// 64-bit FNV-1a. Used for content digests (idempotent commands, checkpoint
// config fingerprints); not a cryptographic hash.
class Fnv1a {
 public:
  Fnv1a& update(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& update(std::string_view s) { return update(s.data(), s.size()); }
  template <typename T>
  Fnv1a& update_pod(const T& v) {
    return update(&v, sizeof(T));
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << state_;
    return os.str();
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) { return Fnv1a().update(s).value(); }

}  // namespace jsed

#endif  // JSED_DIGEST_HPP_
