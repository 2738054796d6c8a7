#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace tabsyn {

// All numeric work is double precision, row-major.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Error taxonomy; the CLI maps these to distinct exit codes.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_finite(const Mat& m, const std::string& what) {
  if (!m.allFinite()) throw numeric_error("non-finite values in " + what);
}

double logsumexp(std::span<const double> xs);

// log of the normal density
inline double log_normal_pdf(double x, double mean, double stddev) {
  static constexpr double kLog2Pi = 1.8378770664093454836;
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * kLog2Pi;
}

double digamma(double x);

}  // namespace tabsyn
