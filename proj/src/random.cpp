#include "geltc/random.hpp"

namespace geltc {

Tensor gaussian_tensor(const Dims& dims, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd data(static_cast<Eigen::Index>(product(dims)));
  for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = normal(rng);
  return Tensor(dims, std::move(data));
}

}  // namespace geltc
