#include "geltc/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace geltc {

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::OverlappedNuclear: return "overlapped_nuclear";
    case RegularizerKind::SliceNuclear: return "slice_nuclear";
    case RegularizerKind::EntryL1: return "entry_l1";
    case RegularizerKind::FiberGroup: return "fiber_group";
  }
  return "unknown";
}

RegularizerKind parse_regularizer_kind(std::string_view name) {
  if (name == "overlapped_nuclear") return RegularizerKind::OverlappedNuclear;
  if (name == "slice_nuclear") return RegularizerKind::SliceNuclear;
  if (name == "entry_l1") return RegularizerKind::EntryL1;
  if (name == "fiber_group") return RegularizerKind::FiberGroup;
  throw std::invalid_argument("unknown structure kind '" + std::string(name) + "'");
}

RegularizerSpec RegularizerSpec::overlapped_nuclear(std::size_t r) {
  RegularizerSpec s;
  s.kind = RegularizerKind::OverlappedNuclear;
  s.rank = r;
  return s;
}

RegularizerSpec RegularizerSpec::slice_nuclear(std::size_t r, std::size_t nonzero_slices) {
  RegularizerSpec s;
  s.kind = RegularizerKind::SliceNuclear;
  s.rank = r;
  s.sparsity = nonzero_slices;
  return s;
}

RegularizerSpec RegularizerSpec::entry_l1(std::size_t nonzeros) {
  RegularizerSpec s;
  s.kind = RegularizerKind::EntryL1;
  s.sparsity = nonzeros;
  return s;
}

RegularizerSpec RegularizerSpec::fiber_group(std::size_t nonzero_fibers, double q, std::size_t mode) {
  if (!(q > 1.0)) throw std::invalid_argument("fiber group norm requires q > 1");
  RegularizerSpec s;
  s.kind = RegularizerKind::FiberGroup;
  s.sparsity = nonzero_fibers;
  s.q = q;
  s.fiber_mode = mode;
  return s;
}

double RegularizerSpec::c_r() const {
  return kind == RegularizerKind::OverlappedNuclear ? 0.5 : 1.0;
}

void check_compatible(const RegularizerSpec& spec, const Dims& dims) {
  switch (spec.kind) {
    case RegularizerKind::SliceNuclear:
      if (dims.size() != 3) throw ShapeError("slice nuclear norm requires a 3-order tensor");
      break;
    case RegularizerKind::FiberGroup:
      if (dims.size() != 3) throw ShapeError("fiber group norm requires a 3-order tensor");
      if (spec.fiber_mode >= 3) throw ShapeError("fiber mode out of range");
      if (!(spec.q > 1.0)) throw std::invalid_argument("fiber group norm requires q > 1");
      break;
    default:
      break;
  }
}

double nuclear_norm(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues().sum();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  return sv.size() ? sv[0] : 0.0;
}

Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& m, double tau) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd shrunk = (svd.singularValues().array() - tau).cwiseMax(0.0);
  Eigen::Index keep = 0;
  while (keep < shrunk.size() && shrunk[keep] > 0.0) ++keep;
  if (keep == 0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  return svd.matrixU().leftCols(keep) * shrunk.head(keep).asDiagonal() *
         svd.matrixV().leftCols(keep).transpose();
}

namespace {

double lp_norm(const Eigen::Ref<const Eigen::VectorXd>& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  if (p == 2.0) return v.norm();
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return scale * std::pow((v.cwiseAbs() / scale).array().pow(p).sum(), 1.0 / p);
}

double dual_exponent(double q) { return q / (q - 1.0); }

Tensor overlapped_prox_impl(const Tensor& a, double tau, const ProxOptions& opts, int& iterations,
                            double& residual, bool& converged) {
  const std::size_t n_modes = a.order();
  const double rho = opts.rho;
  const double threshold = tau / (static_cast<double>(n_modes) * rho);
  Tensor z = a;
  std::vector<Tensor> copies(n_modes, a);
  std::vector<Tensor> duals(n_modes, Tensor::zeros(a.dims()));

  residual = 0.0;
  converged = false;
  for (iterations = 1; iterations <= opts.max_iters; ++iterations) {
    for (std::size_t j = 0; j < n_modes; ++j) {
      Matricization m = matricize(z - duals[j], j);
      m.matrix = singular_value_threshold(m.matrix, threshold);
      copies[j] = tensorize(m, a.dims());
    }
    Eigen::VectorXd next = a.data();
    for (std::size_t j = 0; j < n_modes; ++j) next += rho * (copies[j].data() + duals[j].data());
    next /= 1.0 + static_cast<double>(n_modes) * rho;

    double primal = 0.0;
    for (std::size_t j = 0; j < n_modes; ++j) {
      const Eigen::VectorXd gap = copies[j].data() - next;
      duals[j].data() += gap;
      primal = std::max(primal, gap.norm());
    }
    const double change = (next - z.data()).norm();
    z.data() = std::move(next);
    residual = std::max(primal, change);
    if (residual < opts.tol) {
      converged = true;
      break;
    }
  }
  iterations = std::min(iterations, opts.max_iters);
  return z;
}

}  // namespace

double reg_value(const RegularizerSpec& spec, const Tensor& a) {
  check_compatible(spec, a.dims());
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear: {
      double total = 0.0;
      for (std::size_t j = 0; j < a.order(); ++j) total += nuclear_norm(matricize(a, j).matrix);
      return total / static_cast<double>(a.order());
    }
    case RegularizerKind::SliceNuclear: {
      double total = 0.0;
      for (std::size_t k = 0; k < a.dim(2); ++k) total += nuclear_norm(frontal_slice(a, k));
      return total;
    }
    case RegularizerKind::EntryL1:
      return a.data().lpNorm<1>();
    case RegularizerKind::FiberGroup: {
      const Eigen::MatrixXd fibers = matricize(a, spec.fiber_mode).matrix;
      double total = 0.0;
      for (Eigen::Index c = 0; c < fibers.cols(); ++c) total += lp_norm(fibers.col(c), spec.q);
      return total;
    }
  }
  return 0.0;
}

double reg_dual(const RegularizerSpec& spec, const Tensor& a) {
  check_compatible(spec, a.dims());
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear: {
      // N * max_j ||M_j(A)||, an upper bound on the exact dual of the averaged norm.
      double worst = 0.0;
      for (std::size_t j = 0; j < a.order(); ++j)
        worst = std::max(worst, spectral_norm(matricize(a, j).matrix));
      return static_cast<double>(a.order()) * worst;
    }
    case RegularizerKind::SliceNuclear: {
      double worst = 0.0;
      for (std::size_t k = 0; k < a.dim(2); ++k) worst = std::max(worst, spectral_norm(frontal_slice(a, k)));
      return worst;
    }
    case RegularizerKind::EntryL1:
      return a.data().lpNorm<Eigen::Infinity>();
    case RegularizerKind::FiberGroup: {
      const Eigen::MatrixXd fibers = matricize(a, spec.fiber_mode).matrix;
      const double p = dual_exponent(spec.q);
      double worst = 0.0;
      for (Eigen::Index c = 0; c < fibers.cols(); ++c) worst = std::max(worst, lp_norm(fibers.col(c), p));
      return worst;
    }
  }
  return 0.0;
}

ProxResult reg_prox_detailed(const RegularizerSpec& spec, const Tensor& a, double tau,
                             const ProxOptions& opts) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("prox step tau must be positive");
  check_compatible(spec, a.dims());
  ProxResult out{a};
  switch (spec.kind) {
    case RegularizerKind::EntryL1: {
      out.value.data() = a.data().unaryExpr([tau](double x) {
        return std::copysign(std::max(std::abs(x) - tau, 0.0), x);
      });
      break;
    }
    case RegularizerKind::SliceNuclear: {
      for (std::size_t k = 0; k < a.dim(2); ++k)
        set_frontal_slice(out.value, k, singular_value_threshold(frontal_slice(a, k), tau));
      break;
    }
    case RegularizerKind::FiberGroup: {
      if (spec.q != 2.0) throw std::invalid_argument("fiber group prox is implemented for q = 2 only");
      Matricization fibers = matricize(a, spec.fiber_mode);
      for (Eigen::Index c = 0; c < fibers.matrix.cols(); ++c) {
        const double norm = fibers.matrix.col(c).norm();
        fibers.matrix.col(c) *= norm > tau ? 1.0 - tau / norm : 0.0;
      }
      out.value = tensorize(fibers, a.dims());
      break;
    }
    case RegularizerKind::OverlappedNuclear:
      out.value = overlapped_prox_impl(a, tau, opts, out.iterations, out.residual, out.converged);
      break;
  }
  return out;
}

Tensor reg_prox(const RegularizerSpec& spec, const Tensor& a, double tau, const ProxOptions& opts) {
  ProxResult r = reg_prox_detailed(spec, a, tau, opts);
  if (!r.converged)
    throw ConvergenceError("overlapped nuclear prox did not converge in " +
                               std::to_string(opts.max_iters) + " iterations",
                           r.residual);
  return std::move(r.value);
}

double eta(double x, double m) { return std::max(1.0, std::pow(x, m)); }

double compatibility_phi(const RegularizerSpec& spec, const Dims& dims) {
  check_compatible(spec, dims);
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear:
    case RegularizerKind::SliceNuclear:
      if (!spec.rank) throw std::invalid_argument("compatibility constant needs a rank bound");
      return 2.0 * static_cast<double>(*spec.rank);
    case RegularizerKind::EntryL1:
      if (!spec.sparsity) throw std::invalid_argument("compatibility constant needs a sparsity level");
      return static_cast<double>(*spec.sparsity);
    case RegularizerKind::FiberGroup: {
      if (!spec.sparsity) throw std::invalid_argument("compatibility constant needs a sparsity level");
      const double e = eta(static_cast<double>(dims[spec.fiber_mode]), 1.0 / spec.q - 0.5);
      return e * e * static_cast<double>(*spec.sparsity);
    }
  }
  return 0.0;
}

}  // namespace geltc
