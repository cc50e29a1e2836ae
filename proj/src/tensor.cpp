#include "geltc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace geltc {

std::size_t product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Dims& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  return os.str();
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty()) throw ShapeError("tensor must have at least one mode");
  for (auto d : dims)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(dims));
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(what) + ": dimension mismatch " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
}

// Sizes of the block of modes before and after `mode` in the linear order.
std::pair<Eigen::Index, Eigen::Index> split_around(const Dims& dims, std::size_t mode) {
  Eigen::Index left = 1, right = 1;
  for (std::size_t m = 0; m < mode; ++m) left *= static_cast<Eigen::Index>(dims[m]);
  for (std::size_t m = mode + 1; m < dims.size(); ++m) right *= static_cast<Eigen::Index>(dims[m]);
  return {left, right};
}

}  // namespace

Tensor::Tensor() : dims_{1}, data_(Eigen::VectorXd::Zero(1)) {}

Tensor::Tensor(Dims dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(product(dims_)));
}

Tensor::Tensor(Dims dims, Eigen::VectorXd data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (product(dims_) != static_cast<std::size_t>(data_.size()))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match dims " +
                     to_string(dims_));
  if (!data_.allFinite()) throw std::invalid_argument("tensor data must be finite");
}

Tensor Tensor::constant(Dims dims, double value) {
  Tensor t(std::move(dims));
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::from_values(Dims dims, std::initializer_list<double> values) {
  Eigen::VectorXd data(static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), data.data());
  return Tensor(std::move(dims), std::move(data));
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) throw ShapeError("index arity does not match tensor order");
  std::size_t off = 0;
  for (std::size_t m = dims_.size(); m-- > 0;) {
    if (index[m] >= dims_[m]) throw std::out_of_range("tensor index out of range");
    off = off * dims_[m] + index[m];
  }
  return off;
}

double Tensor::operator()(std::initializer_list<std::size_t> index) const {
  return data_[static_cast<Eigen::Index>(offset({index.begin(), index.size()}))];
}

double& Tensor::operator()(std::initializer_list<std::size_t> index) {
  return data_[static_cast<Eigen::Index>(offset({index.begin(), index.size()}))];
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_dims(*this, other, "add");
  data_ += other.data_;
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_dims(*this, other, "subtract");
  data_ -= other.data_;
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  data_ *= scale;
  return *this;
}

double inner(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "inner");
  return a.data().dot(b.data());
}

double frob_norm(const Tensor& a) { return a.data().norm(); }

Matricization matricize(const Tensor& a, std::size_t mode) {
  if (mode >= a.order())
    throw ShapeError("mode " + std::to_string(mode) + " out of range for order " +
                     std::to_string(a.order()));
  const auto dn = static_cast<Eigen::Index>(a.dims()[mode]);
  const auto [left, right] = split_around(a.dims(), mode);
  Matricization out{mode, Eigen::MatrixXd(dn, left * right)};
  const double* src = a.data().data();
  // Source viewed as [left, dn, right] column-major; column = l + left * r.
  for (Eigen::Index r = 0; r < right; ++r)
    for (Eigen::Index i = 0; i < dn; ++i)
      for (Eigen::Index l = 0; l < left; ++l)
        out.matrix(i, l + left * r) = src[l + left * (i + dn * r)];
  return out;
}

Tensor tensorize(const Matricization& m, const Dims& dims) {
  check_dims(dims);
  if (m.mode >= dims.size()) throw ShapeError("matricization mode out of range for target dims");
  const auto dn = static_cast<Eigen::Index>(dims[m.mode]);
  const auto [left, right] = split_around(dims, m.mode);
  if (m.matrix.rows() != dn || m.matrix.cols() != left * right)
    throw ShapeError("matricization shape inconsistent with dims " + to_string(dims));
  Eigen::VectorXd data(dn * left * right);
  for (Eigen::Index r = 0; r < right; ++r)
    for (Eigen::Index i = 0; i < dn; ++i)
      for (Eigen::Index l = 0; l < left; ++l)
        data[l + left * (i + dn * r)] = m.matrix(i, l + left * r);
  return Tensor(dims, std::move(data));
}

Tensor mode_product(const Tensor& a, const Eigen::MatrixXd& b, std::size_t mode) {
  if (mode >= a.order()) throw ShapeError("mode_product: mode out of range");
  if (static_cast<std::size_t>(b.cols()) != a.dims()[mode])
    throw ShapeError("mode_product: matrix has " + std::to_string(b.cols()) +
                     " columns, mode size is " + std::to_string(a.dims()[mode]));
  if (b.rows() == 0) throw ShapeError("mode_product: matrix must have at least one row");
  Matricization m = matricize(a, mode);
  m.matrix = b * m.matrix;
  Dims out_dims = a.dims();
  out_dims[mode] = static_cast<std::size_t>(b.rows());
  return tensorize(m, out_dims);
}

Eigen::MatrixXd leading_left_singular_vectors(const Eigen::MatrixXd& m, std::size_t count) {
  const bool thin = count <= static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, thin ? Eigen::ComputeThinU : Eigen::ComputeFullU);
  Eigen::MatrixXd u = svd.matrixU().leftCols(static_cast<Eigen::Index>(count));
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index arg = 0;
    u.col(j).cwiseAbs().maxCoeff(&arg);
    if (u(arg, j) < 0) u.col(j) *= -1.0;
  }
  return u;
}

Tensor hosvd_truncate(const Tensor& a, const Dims& ranks) {
  if (ranks.size() != a.order()) throw ShapeError("hosvd_truncate: one rank per mode required");
  for (std::size_t n = 0; n < ranks.size(); ++n)
    if (ranks[n] < 1 || ranks[n] > a.dims()[n])
      throw ShapeError("hosvd_truncate: rank " + std::to_string(ranks[n]) + " invalid for mode " +
                       std::to_string(n) + " of size " + std::to_string(a.dims()[n]));

  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(a.order());
  for (std::size_t n = 0; n < a.order(); ++n)
    factors.push_back(leading_left_singular_vectors(matricize(a, n).matrix, ranks[n]));

  Tensor core = a;
  for (std::size_t n = 0; n < a.order(); ++n) core = mode_product(core, factors[n].transpose(), n);
  Tensor out = std::move(core);
  for (std::size_t n = 0; n < a.order(); ++n) out = mode_product(out, factors[n], n);
  return out;
}

Eigen::VectorXd vectorize(const Tensor& a) { return a.data(); }

Tensor reshape(const Eigen::VectorXd& flat, const Dims& dims) { return Tensor(dims, flat); }

Eigen::VectorXd unfolding_singular_values(const Tensor& a, std::size_t mode) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matricize(a, mode).matrix);
  return svd.singularValues();
}

std::size_t numerical_rank(const Eigen::VectorXd& singular_values, double tol) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = tol * std::max(1.0, singular_values.maxCoeff());
  return static_cast<std::size_t>((singular_values.array() > cutoff).count());
}

Eigen::MatrixXd frontal_slice(const Tensor& a, std::size_t k) {
  if (a.order() != 3) throw ShapeError("frontal_slice requires a 3-order tensor");
  if (k >= a.dims()[2]) throw std::out_of_range("slice index out of range");
  const auto rows = static_cast<Eigen::Index>(a.dims()[0]);
  const auto cols = static_cast<Eigen::Index>(a.dims()[1]);
  return Eigen::Map<const Eigen::MatrixXd>(a.data().data() + rows * cols * static_cast<Eigen::Index>(k),
                                           rows, cols);
}

void set_frontal_slice(Tensor& a, std::size_t k, const Eigen::MatrixXd& slice) {
  if (a.order() != 3) throw ShapeError("set_frontal_slice requires a 3-order tensor");
  if (k >= a.dims()[2]) throw std::out_of_range("slice index out of range");
  const auto rows = static_cast<Eigen::Index>(a.dims()[0]);
  const auto cols = static_cast<Eigen::Index>(a.dims()[1]);
  if (slice.rows() != rows || slice.cols() != cols) throw ShapeError("slice shape mismatch");
  Eigen::Map<Eigen::MatrixXd>(a.data().data() + rows * cols * static_cast<Eigen::Index>(k), rows,
                              cols) = slice;
}

}  // namespace geltc
