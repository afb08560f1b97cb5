#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "aoiq/nn/tensor.hpp"

namespace aoiq::oracle {

// Relative errors are taken against max(|numeric|, |analytic|, floor) where
// floor is 1e-3 of the largest analytic entry of the instance, so entries many
// orders below the gradient scale do not measure finite-difference roundoff.
inline double relative_floor(double largest) { return std::max(1e-3 * largest, 1e-8); }

// Central finite differences over every entry of every parameter, compared to
// the gradient already accumulated in `p->grad`. Returns the worst relative error.
inline double max_relative_error(const nn::ParameterList<double>& params, const std::function<double()>& loss,
                                 double h = 1e-5) {
  double largest = 0.0;
  for (const auto* p : params) largest = std::max(largest, p->grad.cwiseAbs().maxCoeff());
  const double floor = relative_floor(largest);
  double worst = 0.0;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& w = p->value.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss();
      w = saved - h;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

// Same for the input of a function whose analytic input gradient is known.
inline double max_relative_error_input(nn::Matrix<double>& x, const nn::Matrix<double>& analytic,
                                       const std::function<double()>& loss, double h = 1e-5) {
  const double floor = relative_floor(analytic.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double& v = x.data()[i];
    const double saved = v;
    v = saved + h;
    const double up = loss();
    v = saved - h;
    const double down = loss();
    v = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic.data()[i]), floor});
    worst = std::max(worst, std::abs(numeric - analytic.data()[i]) / denom);
  }
  return worst;
}

}  // namespace aoiq::oracle
