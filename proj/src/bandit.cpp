#include "geltc/bandit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace geltc {

std::string_view to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::UnitSphere: return "unit_sphere";
    case ContextKind::StandardNormal: return "standard_normal";
    case ContextKind::Equicorrelated: return "equicorrelated";
  }
  return "unknown";
}

ContextKind parse_context_kind(std::string_view name) {
  if (name == "unit_sphere") return ContextKind::UnitSphere;
  if (name == "standard_normal") return ContextKind::StandardNormal;
  if (name == "equicorrelated") return ContextKind::Equicorrelated;
  throw std::invalid_argument("unknown context model '" + std::string(name) + "'");
}

Eigen::MatrixXd draw_contexts(const ContextModel& model, std::size_t arms, std::size_t p, Rng& rng) {
  std::normal_distribution<double> normal;
  const auto rows = static_cast<Eigen::Index>(p);
  const auto cols = static_cast<Eigen::Index>(arms);
  Eigen::MatrixXd x(rows, cols);
  switch (model.kind) {
    case ContextKind::UnitSphere:
    case ContextKind::StandardNormal:
      for (Eigen::Index i = 0; i < cols; ++i)
        for (Eigen::Index j = 0; j < rows; ++j) x(j, i) = normal(rng);
      if (model.kind == ContextKind::UnitSphere)
        for (Eigen::Index i = 0; i < cols; ++i) x.col(i) /= x.col(i).norm();
      break;
    case ContextKind::Equicorrelated: {
      if (!(model.rho2 >= 0.0 && model.rho2 < 1.0))
        throw std::invalid_argument("equicorrelated contexts need rho2 in [0, 1)");
      const double shared = std::sqrt(model.rho2);
      const double own = std::sqrt(1.0 - model.rho2);
      for (Eigen::Index j = 0; j < rows; ++j) {
        const double common = normal(rng);
        for (Eigen::Index i = 0; i < cols; ++i) x(j, i) = shared * common + own * normal(rng);
      }
      break;
    }
  }
  return x;
}

std::vector<Tensor> gen_context_set(std::size_t arms, const Dims& dims, Rng& rng, const ContextModel& model) {
  const Eigen::MatrixXd x = draw_contexts(model, arms, product(dims), rng);
  std::vector<Tensor> out;
  out.reserve(arms);
  for (Eigen::Index i = 0; i < x.cols(); ++i) out.emplace_back(dims, x.col(i));
  return out;
}

namespace {

std::vector<std::size_t> choose_indices(std::size_t population, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates so the draw sequence is fixed by this code, not the stdlib.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t require_rank(const RegularizerSpec& spec) {
  if (!spec.rank || *spec.rank == 0) throw std::invalid_argument("structure needs a positive rank");
  return *spec.rank;
}

std::size_t require_sparsity(const RegularizerSpec& spec) {
  if (!spec.sparsity || *spec.sparsity == 0) throw std::invalid_argument("structure needs a positive sparsity");
  return *spec.sparsity;
}

}  // namespace

Tensor gen_true_parameter(const RegularizerSpec& spec, const Dims& dims, Rng& rng) {
  check_compatible(spec, dims);
  std::normal_distribution<double> normal;
  Tensor theta(dims);
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear: {
      const std::size_t r = require_rank(spec);
      for (auto d : dims)
        if (r > d) throw std::invalid_argument("rank exceeds a mode dimension");
      theta = hosvd_truncate(gaussian_tensor(dims, rng), Dims(dims.size(), r));
      break;
    }
    case RegularizerKind::SliceNuclear: {
      const std::size_t r = require_rank(spec);
      const std::size_t s = require_sparsity(spec);
      if (r > std::min(dims[0], dims[1])) throw std::invalid_argument("slice rank exceeds slice dimensions");
      if (s > dims[2]) throw std::invalid_argument("more non-zero slices than slices");
      for (std::size_t k : choose_indices(dims[2], s, rng)) {
        Eigen::MatrixXd left(dims[0], r), right(dims[1], r);
        for (Eigen::Index i = 0; i < left.size(); ++i) left.data()[i] = normal(rng);
        for (Eigen::Index i = 0; i < right.size(); ++i) right.data()[i] = normal(rng);
        set_frontal_slice(theta, k, left * right.transpose());
      }
      break;
    }
    case RegularizerKind::EntryL1: {
      const std::size_t s = require_sparsity(spec);
      if (s > theta.size()) throw std::invalid_argument("more non-zeros than entries");
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t i : choose_indices(theta.size(), s, rng)) {
        double v = 0.0;
        while (v == 0.0) v = unit(rng);
        theta.data()[static_cast<Eigen::Index>(i)] = v;
      }
      break;
    }
    case RegularizerKind::FiberGroup: {
      const std::size_t s = require_sparsity(spec);
      Matricization fibers = matricize(theta, spec.fiber_mode);
      if (s > fibers.cols()) throw std::invalid_argument("more non-zero fibers than fibers");
      for (std::size_t c : choose_indices(fibers.cols(), s, rng))
        for (Eigen::Index i = 0; i < fibers.matrix.rows(); ++i)
          fibers.matrix(i, static_cast<Eigen::Index>(c)) = normal(rng);
      theta = tensorize(fibers, dims);
      break;
    }
  }
  const double norm = frob_norm(theta);
  if (norm == 0.0) throw std::runtime_error("generated a zero truth tensor");
  theta *= 1.0 / norm;
  if (!satisfies_structure(spec, theta)) throw std::logic_error("generated truth violates its structure");
  return theta;
}

bool satisfies_structure(const RegularizerSpec& spec, const Tensor& theta, double tol) {
  check_compatible(spec, theta.dims());
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear: {
      const std::size_t r = require_rank(spec);
      for (std::size_t n = 0; n < theta.order(); ++n)
        if (numerical_rank(unfolding_singular_values(theta, n), tol) > r) return false;
      return true;
    }
    case RegularizerKind::SliceNuclear: {
      const std::size_t r = require_rank(spec);
      std::size_t nonzero = 0;
      for (std::size_t k = 0; k < theta.dim(2); ++k) {
        const Eigen::MatrixXd slice = frontal_slice(theta, k);
        if (slice.norm() <= tol) continue;
        ++nonzero;
        if (numerical_rank(Eigen::JacobiSVD<Eigen::MatrixXd>(slice).singularValues(), tol) > r) return false;
      }
      return !spec.sparsity || nonzero == *spec.sparsity;
    }
    case RegularizerKind::EntryL1: {
      const auto nonzero = static_cast<std::size_t>((theta.data().array().abs() > tol).count());
      return !spec.sparsity || nonzero == *spec.sparsity;
    }
    case RegularizerKind::FiberGroup: {
      const Eigen::MatrixXd fibers = matricize(theta, spec.fiber_mode).matrix;
      std::size_t nonzero = 0;
      for (Eigen::Index c = 0; c < fibers.cols(); ++c) nonzero += fibers.col(c).norm() > tol;
      return !spec.sparsity || nonzero == *spec.sparsity;
    }
  }
  return false;
}

std::size_t argmax_lowest(const Eigen::Ref<const Eigen::VectorXd>& scores) {
  if (scores.size() == 0) throw std::invalid_argument("argmax over an empty set");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return static_cast<std::size_t>(best);
}

std::size_t optimal_arm(std::span<const Tensor> contexts, const Tensor& theta) {
  if (contexts.empty()) throw std::invalid_argument("optimal_arm: empty context set");
  Eigen::VectorXd scores(static_cast<Eigen::Index>(contexts.size()));
  for (std::size_t i = 0; i < contexts.size(); ++i) scores[static_cast<Eigen::Index>(i)] = inner(contexts[i], theta);
  return argmax_lowest(scores);
}

InstanceSeeds InstanceSeeds::derive(std::uint64_t replication_seed) {
  return {derive_seed(replication_seed, 0), derive_seed(replication_seed, 1),
          derive_seed(replication_seed, 2), derive_seed(replication_seed, 3)};
}

BanditInstance make_instance(const Dims& dims, const RegularizerSpec& structure, std::size_t arms,
                             std::size_t horizon, const GlmFamily& family, const ContextModel& contexts,
                             const InstanceSeeds& seeds) {
  if (arms < 1) throw std::invalid_argument("need at least one arm");
  Rng truth_rng(seeds.truth);
  return {dims, structure, arms, horizon, family, contexts, gen_true_parameter(structure, dims, truth_rng), seeds};
}

namespace {

void reserve_rounds(RunRecord& rec, std::size_t horizon) {
  rec.chosen_arm.reserve(horizon);
  rec.chosen_inner.reserve(horizon);
  rec.instantaneous_regret.reserve(horizon);
  rec.cumulative_regret.reserve(horizon);
}

void record_round(RunRecord& rec, const GlmFamily& family, const Eigen::VectorXd& truth_scores, std::size_t chosen) {
  const std::size_t best = argmax_lowest(truth_scores);
  const auto c = static_cast<Eigen::Index>(chosen);
  const double regret =
      std::max(0.0, mu(family, truth_scores[static_cast<Eigen::Index>(best)]) - mu(family, truth_scores[c]));
  rec.chosen_arm.push_back(static_cast<std::uint32_t>(chosen));
  rec.chosen_inner.push_back(truth_scores[c]);
  rec.instantaneous_regret.push_back(regret);
  rec.cumulative_regret.push_back((rec.cumulative_regret.empty() ? 0.0 : rec.cumulative_regret.back()) + regret);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

RunRecord run_geltc(const BanditInstance& instance, const LambdaSchedule& schedule, const GeltcOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t p = product(instance.dims);
  const std::size_t horizon = instance.horizon;
  if (instance.theta_star.dims() != instance.dims) throw ShapeError("truth dims differ from instance dims");
  if (opts.injected_estimate && opts.injected_estimate->dims() != instance.dims)
    throw ShapeError("injected estimate dims differ from instance dims");

  RunRecord rec;
  rec.algorithm = "geltc";
  rec.seeds = instance.seeds;
  reserve_rounds(rec, horizon);

  if (opts.width) {
    rec.width = *opts.width;
  } else {
    Rng width_rng(derive_seed(instance.seeds.truth, 16));
    rec.width = gaussian_width_estimate(instance.structure, instance.dims, opts.width_samples, width_rng).mean;
  }
  const double phi = compatibility_phi(instance.structure, instance.dims);
  rec.t1 = exploration_length(opts.c_explore, phi, rec.width, horizon);
  rec.lambda = lambda_for(schedule, instance.structure, instance.dims, rec.t1);

  Rng context_rng(instance.seeds.contexts);
  Rng reward_rng(instance.seeds.rewards);
  Rng policy_rng(instance.seeds.policy);
  std::uniform_int_distribution<std::size_t> uniform_arm(0, instance.arms - 1);

  Dataset data{instance.dims, Eigen::MatrixXd(static_cast<Eigen::Index>(rec.t1), static_cast<Eigen::Index>(p)),
               Eigen::VectorXd(static_cast<Eigen::Index>(rec.t1))};
  Eigen::VectorXd estimate;
  const Eigen::VectorXd& truth = instance.theta_star.data();

  for (std::size_t t = 0; t < horizon; ++t) {
    const Eigen::MatrixXd x = draw_contexts(instance.contexts, instance.arms, p, context_rng);
    const Eigen::VectorXd truth_scores = x.transpose() * truth;
    std::size_t chosen = 0;
    if (t < rec.t1) {
      chosen = uniform_arm(policy_rng);
      const auto row = static_cast<Eigen::Index>(t);
      data.features.row(row) = x.col(static_cast<Eigen::Index>(chosen)).transpose();
      data.rewards[row] = sample_reward(instance.family, truth_scores[static_cast<Eigen::Index>(chosen)], reward_rng);
    } else {
      if (t == rec.t1) {
        if (opts.injected_estimate) {
          estimate = opts.injected_estimate->data();
        } else {
          FitResult fitted = fit(data, instance.structure, rec.lambda, instance.family, opts.fit);
          rec.fit = fitted.diagnostics;
          rec.nonconverged_fits = fitted.diagnostics.converged ? 0 : 1;
          estimate = std::move(fitted.theta.data());
        }
      }
      // mu is increasing, so the argmax of mu(<X, theta_hat>) is the argmax of the scores.
      chosen = argmax_lowest(x.transpose() * estimate);
    }
    record_round(rec, instance.family, truth_scores, chosen);
  }
  rec.wall_seconds = seconds_since(start);
  return rec;
}

double theoretical_bound(const RegularizerSpec& spec, const Dims& dims, double horizon, double delta) {
  if (!(horizon > 0.0)) throw std::invalid_argument("theoretical_bound: horizon must be positive");
  const double growth = std::pow(horizon, 2.0 / 3.0);
  const double d = static_cast<double>(*std::max_element(dims.begin(), dims.end()));
  switch (spec.kind) {
    case RegularizerKind::OverlappedNuclear:
      return std::pow(d, static_cast<double>(dims.size()) / 3.0) * std::cbrt(static_cast<double>(require_rank(spec))) * growth;
    case RegularizerKind::SliceNuclear:
      return d * std::cbrt(static_cast<double>(require_rank(spec))) * growth;
    case RegularizerKind::EntryL1:
      return std::cbrt(static_cast<double>(require_sparsity(spec))) * growth *
             std::cbrt(std::log(static_cast<double>(product(dims))));
    case RegularizerKind::FiberGroup: {
      check_compatible(spec, dims);
      const double d1 = static_cast<double>(dims[spec.fiber_mode]);
      const double rest = static_cast<double>(product(dims)) / d1;
      return std::pow(eta(d1, 1.0 / spec.q - 0.5), 4.0 / 3.0) *
             std::cbrt(std::max(d1, std::log(4.0 * rest / delta))) *
             std::cbrt(static_cast<double>(require_sparsity(spec))) * growth;
    }
  }
  throw std::invalid_argument("theoretical_bound: unsupported structure");
}

BanditInstance gen_lasso_comparison_env(std::size_t arms, std::size_t d, std::size_t sparsity, double rho2,
                                        double noise_sd, std::size_t horizon, Rng& rng) {
  if (!(rho2 >= 0.0 && rho2 < 1.0)) throw std::invalid_argument("rho2 must lie in [0, 1)");
  if (sparsity == 0 || sparsity > d) throw std::invalid_argument("sparsity must lie in [1, d]");
  BanditInstance env;
  env.dims = {d};
  env.structure = RegularizerSpec::entry_l1(sparsity);
  env.arms = arms;
  env.horizon = horizon;
  env.family = GlmFamily::gaussian(noise_sd);
  env.contexts = {ContextKind::Equicorrelated, rho2};
  env.theta_star = Tensor(env.dims);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i : choose_indices(d, sparsity, rng)) {
    double v = 0.0;
    while (v == 0.0) v = unit(rng);
    env.theta_star.data()[static_cast<Eigen::Index>(i)] = v;
  }
  env.seeds = {rng(), rng(), rng(), rng()};
  return env;
}

bool lasso_coordinate_descent(const Eigen::MatrixXd& gram, const Eigen::VectorXd& cross, double penalty,
                              Eigen::VectorXd& beta, int max_sweeps, double tol) {
  const Eigen::Index p = gram.rows();
  // Q beta is kept in sync so each coordinate update is O(p).
  Eigen::VectorXd q_beta = gram * beta;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double largest = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double diag = gram(j, j);
      double next = 0.0;
      if (diag > 0.0) {
        const double rho = cross[j] - (q_beta[j] - diag * beta[j]);
        next = std::copysign(std::max(std::abs(rho) - 0.5 * penalty, 0.0), rho) / diag;
      }
      const double delta = next - beta[j];
      if (delta != 0.0) {
        q_beta += delta * gram.col(j);
        beta[j] = next;
        largest = std::max(largest, std::abs(delta));
      }
    }
    if (largest < tol) return true;
  }
  return false;
}

RunRecord run_drlasso(const BanditInstance& instance, const DrLassoConfig& config) {
  if (instance.dims.size() != 1) throw ShapeError("DR-Lasso runs on vector (1-order) instances");
  const auto start = std::chrono::steady_clock::now();
  const auto p = static_cast<Eigen::Index>(instance.dims[0]);
  const auto arms = static_cast<double>(instance.arms);
  const double log_d = std::log(static_cast<double>(p));

  RunRecord rec;
  rec.algorithm = "drlasso";
  rec.seeds = instance.seeds;
  reserve_rounds(rec, instance.horizon);

  Rng context_rng(instance.seeds.contexts);
  Rng reward_rng(instance.seeds.rewards);
  Rng policy_rng(instance.seeds.policy);
  std::uniform_int_distribution<std::size_t> uniform_arm(0, instance.arms - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd gram_sum = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd cross_sum = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd& truth = instance.theta_star.data();

  for (std::size_t round = 1; round <= instance.horizon; ++round) {
    const double t = static_cast<double>(round);
    const Eigen::MatrixXd x = draw_contexts(instance.contexts, instance.arms, static_cast<std::size_t>(p), context_rng);
    const Eigen::VectorXd truth_scores = x.transpose() * truth;
    const std::size_t greedy = argmax_lowest(x.transpose() * beta);
    const double schedule = std::sqrt((std::log(t) + log_d) / t);
    const double explore = round <= config.forced_rounds ? 1.0 : std::min(1.0, config.lambda1 * schedule);
    const std::size_t chosen = unit(policy_rng) < explore ? uniform_arm(policy_rng) : greedy;
    const double propensity = explore / arms + (chosen == greedy ? 1.0 - explore : 0.0);

    const auto c = static_cast<Eigen::Index>(chosen);
    const double reward = sample_reward(instance.family, truth_scores[c], reward_rng);
    const Eigen::VectorXd mean_context = x.rowwise().mean();
    // Doubly-robust pseudo-reward for the averaged context.
    const double pseudo = mean_context.dot(beta) + (reward - x.col(c).dot(beta)) / (arms * propensity);
    gram_sum.noalias() += mean_context * mean_context.transpose();
    cross_sum += pseudo * mean_context;
    if (!lasso_coordinate_descent(gram_sum / t, cross_sum / t, config.lambda2 * schedule, beta,
                                  config.max_sweeps, config.tol))
      ++rec.nonconverged_fits;

    record_round(rec, instance.family, truth_scores, chosen);
  }
  rec.wall_seconds = seconds_since(start);
  return rec;
}

}  // namespace geltc
