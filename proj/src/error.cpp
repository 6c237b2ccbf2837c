// Copyright 2026 The tpmove Authors
// SPDX-License-Identifier: Apache-2.0

#include "tpmove/error.hpp"

namespace tpmove {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularInputBlock: return "SingularInputBlock";
    case ErrorCode::EmptyFactorList: return "EmptyFactorList";
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::SingularRotation: return "SingularRotation";
    case ErrorCode::FrameCountMismatch: return "FrameCountMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteCost: return "NonFiniteCost";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::DegenerateObstacle: return "DegenerateObstacle";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::IoError:
    case ErrorCode::MalformedCsv:
    case ErrorCode::ConfigError:
    case ErrorCode::BudgetTooSmall:
    case ErrorCode::InsufficientCandidates:
    case ErrorCode::FrameCountMismatch:
    case ErrorCode::LengthMismatch:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::KTooLarge:
    case ErrorCode::EmptyData:
    case ErrorCode::ConfidenceOutOfRange:
    case ErrorCode::DegenerateObstacle:
      return true;
    default:
      return false;
  }
}

}  // namespace tpmove
