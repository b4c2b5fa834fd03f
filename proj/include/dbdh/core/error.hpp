#pragma once

#include <stdexcept>
#include <string>

namespace dbdh {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/image dimensions do not match the operation contract.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid configuration value (channel counts, parameter grids, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// A vertex or region falls outside the coordinate frame.
struct OutOfFrameError : Error {
  using Error::Error;
};

/// Quadrilateral is self-intersecting or has (near-)zero area.
struct DegenerateRegionError : Error {
  using Error::Error;
};

/// A numeric procedure failed to converge or produced non-finite values.
struct NumericError : Error {
  using Error::Error;
};

/// A rectangle or index lies outside the image bounds.
struct BoundsError : Error {
  using Error::Error;
};

/// Not enough samples to satisfy the requested split sizes.
struct SizeError : Error {
  using Error::Error;
};

/// File / codec failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace dbdh
