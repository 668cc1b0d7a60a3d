/* Copyright 2026 The AAD Authors. All Rights Reserved.

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

#include "aad/errors.hpp"

namespace aad {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kUnsupported: return "unsupported encoding";
    case ErrorKind::kDatasetEmpty: return "empty dataset";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kTooShort: return "input too short";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kContract: return "contract violation";
    case ErrorKind::kSpecMismatch: return "spec mismatch";
    case ErrorKind::kSemiSupervision: return "semi-supervision violation";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kDegenerateEval: return "degenerate evaluation";
    case ErrorKind::kPTooSmall: return "p too small";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

}  // namespace aad
