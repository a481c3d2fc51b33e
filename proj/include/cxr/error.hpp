#pragma once

#include <stdexcept>
#include <string>

namespace cxr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input files, bad cells, missing images, unknown names.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN loss, divergence, undefined metric.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of an API or a command line: bad flags, frozen-model mutation,
// repeated backward.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace cxr
