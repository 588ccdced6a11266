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

#ifndef JSED_RNG_HPP_
#define JSED_RNG_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace jsed {

std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** seeded through SplitMix64. The integer stream is a pure
// function of the seed on every platform; derived streams (split) let
// per-clip and per-tensor draws stay independent of iteration order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  double normal();
  double exponential(double mean);

  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view name) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace jsed

#endif  // JSED_RNG_HPP_
