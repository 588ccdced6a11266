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

#ifndef JSED_ERROR_HPP_
#define JSED_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace jsed {

// Mirrors jsed_status in include/jsed/jsed.h; values must stay in sync.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kShape = 2,
  kIo = 3,
  kFormat = 4,
  kNumeric = 5,
  kConfig = 6,
  kNotFound = 7,
  kInternal = 8,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace jsed

#endif  // JSED_ERROR_HPP_
