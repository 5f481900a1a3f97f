#pragma once

#include <stdexcept>
#include <string>

namespace armor {

// Violated precondition or shape mismatch on a library call.
struct ContractViolation : std::invalid_argument {
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// A weight matrix column (or post-scaling row) has zero norm and cannot be normalized.
struct DegenerateWeight : std::runtime_error {
  long index;
  DegenerateWeight(const std::string& what, long idx)
      : std::runtime_error(what), index(idx) {}
};

struct EmptyCalibration : std::runtime_error {
  EmptyCalibration() : std::runtime_error("calibration sample set is empty") {}
};

// Malformed or truncated file on disk.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace armor
