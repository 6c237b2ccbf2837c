// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tpmove {

enum class ErrorCode {
  EmptyData,
  SingularCovariance,
  KTooLarge,
  DimensionMismatch,
  SingularInputBlock,
  EmptyFactorList,
  ConfidenceOutOfRange,
  SingularRotation,
  FrameCountMismatch,
  LengthMismatch,
  NonFiniteCost,
  BudgetTooSmall,
  InsufficientCandidates,
  SingularJacobian,
  DegenerateObstacle,
  IndexOutOfRange,
  InvalidSpec,
  IoError,
  MalformedCsv,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by bad inputs (files, configs, specs) rather than
/// by the numerics.
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tpmove
