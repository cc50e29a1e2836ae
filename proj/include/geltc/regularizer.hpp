#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "geltc/tensor.hpp"

namespace geltc {

enum class RegularizerKind { OverlappedNuclear, SliceNuclear, EntryL1, FiberGroup };

std::string_view to_string(RegularizerKind kind);
RegularizerKind parse_regularizer_kind(std::string_view name);

/// A weakly decomposable norm plus the structure parameters of the truth it
/// is meant to recover.
///
/// - OverlappedNuclear: (1/N) sum_n ||M_n(A)||_*; `rank` is the multi-linear rank bound.
/// - SliceNuclear: sum_k ||A(:,:,k)||_* over frontal slices of a 3-order tensor;
///   `rank` is the per-slice rank, `sparsity` the number of non-zero slices.
/// - EntryL1: sum |A_i|; `sparsity` is the number of non-zero entries.
/// - FiberGroup: sum over mode-`fiber_mode` fibers of ||fiber||_q (3-order);
///   `sparsity` is the number of non-zero fibers.
struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::EntryL1;
  std::optional<std::size_t> rank;
  std::optional<std::size_t> sparsity;
  std::size_t fiber_mode = 0;
  double q = 2.0;

  static RegularizerSpec overlapped_nuclear(std::size_t r);
  static RegularizerSpec slice_nuclear(std::size_t r, std::size_t s);
  static RegularizerSpec entry_l1(std::size_t s);
  static RegularizerSpec fiber_group(std::size_t s, double q = 2.0, std::size_t mode = 0);

  /// Weak-decomposability constant c_R.
  double c_r() const;
};

/// Raised when an iterative prox does not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct ProxOptions {
  /// Consensus iterations for the overlapped nuclear norm.
  int max_iters = 500;
  double tol = 1e-8;
  double rho = 1.0;
};

struct ProxResult {
  Tensor value;
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

double reg_value(const RegularizerSpec& spec, const Tensor& a);
double reg_dual(const RegularizerSpec& spec, const Tensor& a);

/// argmin_z tau * R(z) + 0.5 * ||z - a||_F^2. Throws ConvergenceError when the
/// overlapped-nuclear inner solver stalls.
Tensor reg_prox(const RegularizerSpec& spec, const Tensor& a, double tau, const ProxOptions& opts = {});

/// Same as reg_prox but reports inner-solver state instead of throwing.
ProxResult reg_prox_detailed(const RegularizerSpec& spec, const Tensor& a, double tau,
                             const ProxOptions& opts = {});

/// eta(x, m) = max(1, x^m).
double eta(double x, double m);

/// Compatibility constant of the structure subspace.
double compatibility_phi(const RegularizerSpec& spec, const Dims& dims);

/// Throws ShapeError if `spec` cannot be applied to tensors of these dims.
void check_compatible(const RegularizerSpec& spec, const Dims& dims);

/// Matrix helpers shared with the truth generators.
double nuclear_norm(const Eigen::MatrixXd& m);
double spectral_norm(const Eigen::MatrixXd& m);
Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& m, double tau);

}  // namespace geltc
