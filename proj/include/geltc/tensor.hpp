#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geltc {

using Dims = std::vector<std::size_t>;

/// Thrown when tensor or matrix shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t product(const Dims& dims);
std::string to_string(const Dims& dims);

/**
 * Dense N-order tensor of doubles.
 *
 * Storage is a flat vector linearized with mode 0 varying fastest (the
 * column-major generalization): entry (i_0, ..., i_{N-1}) lives at offset
 * i_0 + d_0 * (i_1 + d_1 * (i_2 + ...)). Every matricization, vectorization
 * and slice accessor in this library relies on that order.
 */
class Tensor {
 public:
  /// A single zero scalar, dims {1}.
  Tensor();
  /// Zero tensor of the given shape.
  explicit Tensor(Dims dims);
  Tensor(Dims dims, Eigen::VectorXd data);

  static Tensor zeros(Dims dims) { return Tensor(std::move(dims)); }
  static Tensor constant(Dims dims, double value);
  static Tensor from_values(Dims dims, std::initializer_list<double> values);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t order() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(data_.size()); }

  const Eigen::VectorXd& data() const noexcept { return data_; }
  Eigen::VectorXd& data() noexcept { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const;
  double operator()(std::initializer_list<std::size_t> index) const;
  double& operator()(std::initializer_list<std::size_t> index);

  bool all_finite() const { return data_.allFinite(); }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scale);

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, double s) { return a *= s; }
  friend Tensor operator*(double s, Tensor a) { return a *= s; }
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Dims dims_;
  Eigen::VectorXd data_;
};

/// Mode-n unfolding: row i holds every entry whose mode-n index is i; columns
/// enumerate the remaining indices in increasing mode order, lowest mode fastest.
struct Matricization {
  std::size_t mode = 0;
  Eigen::MatrixXd matrix;

  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(matrix.cols()); }
};

double inner(const Tensor& a, const Tensor& b);
double frob_norm(const Tensor& a);

/// Modes are zero-based throughout the library.
Matricization matricize(const Tensor& a, std::size_t mode);
Tensor tensorize(const Matricization& m, const Dims& dims);

/// a x_n B, where B has shape d' x d_n. The result has d_n replaced by d'.
Tensor mode_product(const Tensor& a, const Eigen::MatrixXd& b, std::size_t mode);

/// Top-r_n left singular vectors of each unfolding, signs normalized so the
/// largest-magnitude entry of every column is positive.
Eigen::MatrixXd leading_left_singular_vectors(const Eigen::MatrixXd& m, std::size_t count);

/// Truncated HOSVD: G x_1 U_1 ... x_N U_N with G = a x_1 U_1^T ... x_N U_N^T.
Tensor hosvd_truncate(const Tensor& a, const Dims& ranks);

Eigen::VectorXd vectorize(const Tensor& a);
Tensor reshape(const Eigen::VectorXd& flat, const Dims& dims);

/// Singular values of the mode-n unfolding, descending.
Eigen::VectorXd unfolding_singular_values(const Tensor& a, std::size_t mode);

/// Numerical rank: count of singular values above tol * max(1, sigma_max).
std::size_t numerical_rank(const Eigen::VectorXd& singular_values, double tol = 1e-8);

/// Frontal slice a(:, :, k) of a 3-order tensor as a d_0 x d_1 matrix.
Eigen::MatrixXd frontal_slice(const Tensor& a, std::size_t k);
void set_frontal_slice(Tensor& a, std::size_t k, const Eigen::MatrixXd& slice);

}  // namespace geltc
