#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace tangled {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy. Library surfaces throw these; the CLI maps any of them to a
// nonzero exit code with a one-line diagnostic.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace tangled
