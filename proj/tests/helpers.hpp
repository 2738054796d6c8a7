#pragma once

#include "tabsyn/tape.hpp"

#include <cmath>
#include <functional>

namespace tabsyn::testing {

// Central finite differences of a scalar-valued function over every entry
// of a parameter. The function must rebuild its computation from v.value.
inline Mat finite_diff(ad::Var& v, const std::function<double()>& f, double h = 1e-5) {
  Mat g(v.value.rows(), v.value.cols());
  for (Eigen::Index i = 0; i < v.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.value.cols(); ++j) {
      const double saved = v.value(i, j);
      v.value(i, j) = saved + h;
      const double fp = f();
      v.value(i, j) = saved - h;
      const double fm = f();
      v.value(i, j) = saved;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

// Worst-case relative disagreement; entries that are ~0 on both sides are
// treated as agreeing (dropout and masks produce exact zeros).
inline double max_rel_err(const Mat& a, const Mat& b, double zero_tol = 1e-7) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double m = std::max(std::abs(a(i, j)), std::abs(b(i, j)));
      if (m < zero_tol) continue;
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / m);
    }
  }
  return worst;
}

}  // namespace tabsyn::testing
