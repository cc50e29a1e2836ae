#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "geltc/random.hpp"
#include "geltc/tensor.hpp"

namespace geltc::testing {

/// Random order-N dims with every mode in [lo, hi].
inline Dims random_dims(Rng& rng, std::size_t order, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> pick(lo, hi);
  Dims dims(order);
  for (auto& d : dims) d = pick(rng);
  return dims;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Tensor perturb(const Tensor& a, Rng& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor out = a;
  for (Eigen::Index i = 0; i < out.data().size(); ++i) out.data()[i] += n(rng);
  return out;
}

inline double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace geltc::testing
