//==============================================================================
// Copyright (c) 2026 The patchdex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//==============================================================================
#include "patchdex/error.hpp"

namespace patchdex {

std::string_view ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kBadVersion: return "unsupported version";
    case ErrorKind::kTruncated: return "truncated input";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kZeroDimension: return "zero dimension";
    case ErrorKind::kInvariant: return "invariant violation";
    case ErrorKind::kDuplicateId: return "duplicate id";
    case ErrorKind::kUnknownRole: return "unknown role";
    case ErrorKind::kBadRelevance: return "bad relevance";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kMissingLabel: return "missing label";
    case ErrorKind::kUnknownConfig: return "unknown config";
  }
  return "error";
}

}  // namespace patchdex
