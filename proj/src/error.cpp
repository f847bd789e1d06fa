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

#include "voxage/error.hpp"

namespace voxage {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kChronology: return "chronology";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kStratification: return "stratification";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kState: return "state";
  }
  return "unknown";
}

}  // namespace voxage
