// Copyright 2026 The Voxage Authors
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

#ifndef VOXAGE_ERROR_HPP_
#define VOXAGE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace voxage {

// Values mirror voxage_status in voxage.h; keep the two in sync.
enum class ErrorCode {
  kFormat = 1,
  kUnsupported = 2,
  kDimension = 3,
  kRange = 4,
  kValidation = 5,
  kChronology = 6,
  kSchema = 7,
  kStratification = 8,
  kDegenerate = 9,
  kIo = 10,
  kState = 11,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace voxage

#endif  // VOXAGE_ERROR_HPP_
