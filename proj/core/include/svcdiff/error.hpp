// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace svcdiff {

enum class Errc {
  kInvalidScheduleParams,
  kOutOfRangeTime,
  kDivergentSnr,
  kTimeOrderViolation,
  kShapeMismatch,
  kInvalidArch,
  kEmptyBatch,
  kNonFiniteLoss,
  kDegenerateStep,
  kNonRemovableModule,
  kUnstableLatency,
  kTargetUnreachable,
  kInvalidRate,
  kEmptyClip,
  kClipTooShort,
  kFrameCountMismatch,
  kInvalidOverlap,
  kInvalidArgument,
  kIo,
  kFormat,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace svcdiff
