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

#ifndef JSED_ROLL_HPP_
#define JSED_ROLL_HPP_

#include <cstdint>
#include <vector>

#include "jsed/error.hpp"

namespace jsed {

// Binary events x frames activity matrix.
class EventRoll {
 public:
  EventRoll() = default;
  EventRoll(std::size_t events, std::size_t frames)
      : events_(events), frames_(frames), bits_(events * frames, 0) {}

  std::size_t events() const { return events_; }
  std::size_t frames() const { return frames_; }
  std::uint8_t operator()(std::size_t m, std::size_t t) const {
    return bits_[m * frames_ + t];
  }
  void set(std::size_t m, std::size_t t, bool on) {
    bits_[m * frames_ + t] = on ? 1 : 0;
  }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::size_t active_count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }
  bool same_shape(const EventRoll& o) const {
    return events_ == o.events_ && frames_ == o.frames_;
  }
  bool operator==(const EventRoll&) const = default;

 private:
  std::size_t events_ = 0;
  std::size_t frames_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace jsed

#endif  // JSED_ROLL_HPP_
