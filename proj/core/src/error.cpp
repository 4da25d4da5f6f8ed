// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/error.hpp"

namespace svcdiff {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidScheduleParams: return "InvalidScheduleParams";
    case Errc::kOutOfRangeTime: return "OutOfRangeTime";
    case Errc::kDivergentSnr: return "DivergentSnr";
    case Errc::kTimeOrderViolation: return "TimeOrderViolation";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kInvalidArch: return "InvalidArch";
    case Errc::kEmptyBatch: return "EmptyBatch";
    case Errc::kNonFiniteLoss: return "NonFiniteLoss";
    case Errc::kDegenerateStep: return "DegenerateStep";
    case Errc::kNonRemovableModule: return "NonRemovableModule";
    case Errc::kUnstableLatency: return "UnstableLatency";
    case Errc::kTargetUnreachable: return "TargetUnreachable";
    case Errc::kInvalidRate: return "InvalidRate";
    case Errc::kEmptyClip: return "EmptyClip";
    case Errc::kClipTooShort: return "ClipTooShort";
    case Errc::kFrameCountMismatch: return "FrameCountMismatch";
    case Errc::kInvalidOverlap: return "InvalidOverlap";
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kIo: return "Io";
    case Errc::kFormat: return "Format";
  }
  return "Unknown";
}

}  // namespace svcdiff
