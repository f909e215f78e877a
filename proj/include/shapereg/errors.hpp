#pragma once

#include <stdexcept>
#include <string>

namespace shapereg {

// Bad input data: unparseable CSV, responses outside the family support,
// mismatched lengths. Messages carry row/column context where known.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A coordinate with a non-linear shape label is constant across all
// observations, so no basis can be built for it.
struct DegenerateCoordinateError : DataError {
  int coord;
  explicit DegenerateCoordinateError(int coord_)
      : DataError("coordinate " + std::to_string(coord_ + 1) +
                  " is constant but carries a non-linear shape label"),
        coord(coord_) {}
};

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model (de)serialization failures.
struct ModelIoError : std::runtime_error {
  bool version_mismatch = false;
  explicit ModelIoError(const std::string& msg, bool version_mismatch_ = false)
      : std::runtime_error(msg), version_mismatch(version_mismatch_) {}
};

}  // namespace shapereg
