#pragma once

#include <stdexcept>
#include <string>

namespace mtnmt {

// Error taxonomy maps onto the CLI exit-code contract:
//   0 success, 1 usage error, 2 data error, 3 numerical failure,
//   4 acceptance-threshold failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ThresholdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mtnmt
