// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geltc/harness.hpp"

using namespace geltc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

// ---------------------------------------------------------------------------
// 1. Tensor algebra identities

Outcome tensor_identities() {
  Rng rng(1001);
  std::uniform_int_distribution<std::size_t> dim(1, 6), order(2, 3);
  const double tol = 1e-10;
  int failures = 0;
  double worst = 0.0;
  const auto note = [&](double err, double scale) {
    const double rel = err / std::max(1.0, scale);
    worst = std::max(worst, rel);
    if (rel > tol) ++failures;
  };
  for (int trial = 0; trial < 100; ++trial) {
    Dims dims(order(rng));
    for (auto& d : dims) d = dim(rng);
    const Tensor a = gaussian_tensor(dims, rng);
    const Tensor b = gaussian_tensor(dims, rng);
    // Norm preservation and inversion of every matricization.
    for (std::size_t n = 0; n < dims.size(); ++n) {
      const Matricization m = matricize(a, n);
      note(std::abs(m.matrix.norm() - frob_norm(a)), frob_norm(a));
      note(frob_norm(tensorize(m, dims) - a), frob_norm(a));
    }
    // Inner product against the explicit sum over entries.
    double explicit_sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      explicit_sum += a.data()[static_cast<Eigen::Index>(i)] * b.data()[static_cast<Eigen::Index>(i)];
    note(std::abs(inner(a, b) - explicit_sum), std::abs(explicit_sum));
    // M_n(A x_n B) = B M_n(A).
    std::uniform_int_distribution<std::size_t> pick(0, dims.size() - 1);
    const std::size_t n = pick(rng);
    Eigen::MatrixXd factor(static_cast<Eigen::Index>(dim(rng)), static_cast<Eigen::Index>(dims[n]));
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < factor.size(); ++i) factor.data()[i] = normal(rng);
    const Eigen::MatrixXd lhs = matricize(mode_product(a, factor, n), n).matrix;
    const Eigen::MatrixXd rhs = factor * matricize(a, n).matrix;
    note((lhs - rhs).norm(), rhs.norm());
    // HOSVD: rank caps and idempotence.
    Dims ranks(dims.size());
    for (std::size_t m = 0; m < dims.size(); ++m) {
      std::uniform_int_distribution<std::size_t> r(1, dims[m]);
      ranks[m] = r(rng);
    }
    const Tensor h = hosvd_truncate(a, ranks);
    for (std::size_t m = 0; m < dims.size(); ++m)
      if (numerical_rank(unfolding_singular_values(h, m)) > ranks[m]) ++failures;
    note(frob_norm(hosvd_truncate(h, ranks) - h), frob_norm(h));
  }
  return {failures == 0, "600+ identity checks, worst relative error " + fmt(worst, 3)};
}

// ---------------------------------------------------------------------------
// 2. Prox correctness

double prox_objective(const RegularizerSpec& spec, const Tensor& x, const Tensor& a, double tau) {
  const Tensor d = x - a;
  return 0.5 * inner(d, d) + tau * reg_value(spec, x);
}

/// Smallest (probe objective - prox objective) over random probes: perturbations
/// of the prox point at several scales and fresh Gaussian points.
double probe_margin(const RegularizerSpec& spec, const Tensor& a, const Tensor& p, double tau, int probes, Rng& rng) {
  const double best = prox_objective(spec, p, a, tau);
  double margin = std::numeric_limits<double>::infinity();
  const double scales[4] = {1e-3, 1e-2, 1e-1, 1.0};
  for (int i = 0; i < probes; ++i) {
    Tensor x = (i % 5 == 4) ? gaussian_tensor(a.dims(), rng) : p;
    if (i % 5 != 4) {
      std::normal_distribution<double> noise(0.0, scales[i % 4]);
      for (Eigen::Index k = 0; k < x.data().size(); ++k) x.data()[k] += noise(rng);
    }
    margin = std::min(margin, prox_objective(spec, x, a, tau) - best);
  }
  return margin;
}

Outcome prox_correctness() {
  Rng rng(1002);
  std::vector<std::string> problems;

  const Tensor a_l1 = gaussian_tensor({4, 5, 3}, rng);
  const Tensor p_l1 = reg_prox(RegularizerSpec::entry_l1(1), a_l1, 0.7);
  for (Eigen::Index i = 0; i < a_l1.data().size(); ++i) {
    const double x = a_l1.data()[i];
    const double expected = x > 0.7 ? x - 0.7 : (x < -0.7 ? x + 0.7 : 0.0);
    if (p_l1.data()[i] != expected) {
      problems.push_back("entry l1 soft threshold mismatch");
      break;
    }
  }

  const auto slice = RegularizerSpec::slice_nuclear(1, 1);
  double slice_margin = std::numeric_limits<double>::infinity();
  for (int instance = 0; instance < 3; ++instance) {
    const Tensor a = gaussian_tensor({3, 3, 4}, rng);
    slice_margin = std::min(slice_margin, probe_margin(slice, a, reg_prox(slice, a, 0.6), 0.6, 10000, rng));
  }
  if (slice_margin < 0.0) problems.push_back("slice prox beaten by a probe by " + fmt(-slice_margin));

  const auto overlapped = RegularizerSpec::overlapped_nuclear(1);
  double over_margin = std::numeric_limits<double>::infinity();
  for (int instance = 0; instance < 3; ++instance) {
    const Tensor a = gaussian_tensor({2, 2, 2}, rng);
    over_margin = std::min(over_margin, probe_margin(overlapped, a, reg_prox(overlapped, a, 0.5), 0.5, 10000, rng));
  }
  if (over_margin < -1e-4) problems.push_back("overlapped prox beaten by a probe by " + fmt(-over_margin));

  double fiber_err = 0.0;
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const Tensor a = gaussian_tensor({3, 4, 5}, rng);
    const double tau = 1.1;
    const Tensor p = reg_prox(RegularizerSpec::fiber_group(1, 2.0, mode), a, tau);
    const Eigen::MatrixXd in = matricize(a, mode).matrix, out = matricize(p, mode).matrix;
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
      const double norm = in.col(c).norm();
      const Eigen::VectorXd expected = norm > tau ? Eigen::VectorXd(in.col(c) * (1.0 - tau / norm))
                                                  : Eigen::VectorXd::Zero(in.rows());
      fiber_err = std::max(fiber_err, (out.col(c) - expected).norm());
    }
  }
  if (fiber_err > 1e-12) problems.push_back("fiber prox differs from closed form by " + fmt(fiber_err));

  std::string detail = "slice margin " + fmt(slice_margin, 3) + ", overlapped margin " + fmt(over_margin, 3) +
                       ", fiber error " + fmt(fiber_err, 3);
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------------------
// 3. GLM derivatives

Outcome glm_checks() {
  const std::vector<GlmFamily> families = {GlmFamily::logistic(), GlmFamily::poisson(), GlmFamily::gaussian(1.0)};
  double worst_mu = 0.0, worst_grad = 0.0;
  bool slope_ok = true;
  const double h = 1e-5;
  for (const auto& f : families) {
    for (int i = 0; i <= 400; ++i) {
      const double x = -5.0 + 0.025 * i;
      const double fd = (cumulant(f, x + h) - cumulant(f, x - h)) / (2.0 * h);
      worst_mu = std::max(worst_mu, std::abs(fd - mu(f, x)) / std::abs(mu(f, x)));
    }
    for (int i = 0; i <= 200; ++i) {
      const double x = -1.0 + 0.01 * i;
      if (std::abs(mu_prime(f, x)) > k_mu(f)) slope_ok = false;
    }
    Rng rng(1003);
    const Dims dims{3, 2, 2};
    std::vector<Tensor> contexts;
    std::vector<double> rewards;
    for (int i = 0; i < 50; ++i) {
      contexts.push_back(gaussian_tensor(dims, rng) * 0.5);
      rewards.push_back(sample_reward(f, 0.3 * contexts.back().data()[0], rng));
    }
    const Tensor theta = gaussian_tensor(dims, rng) * 0.3;
    const Tensor g = glm_loss_gradient(theta, contexts, rewards, f);
    const double step = 1e-6;
    for (Eigen::Index i = 0; i < theta.data().size(); ++i) {
      Tensor up = theta, down = theta;
      up.data()[i] += step;
      down.data()[i] -= step;
      const double fd = (glm_loss(up, contexts, rewards, f) - glm_loss(down, contexts, rewards, f)) / (2.0 * step);
      worst_grad = std::max(worst_grad, std::abs(fd - g.data()[i]) / std::max(1e-3, std::abs(g.data()[i])));
    }
  }
  const bool ok = worst_mu < 1e-6 && slope_ok && worst_grad < 1e-4;
  return {ok, "mu vs b' rel err " + fmt(worst_mu, 3) + ", slope bound " + (slope_ok ? "holds" : "violated") +
                  ", gradient rel err " + fmt(worst_grad, 3)};
}

// ---------------------------------------------------------------------------
// 4. Lambda formulas against a second evaluation written out term by term

double lambda_reference(RegularizerKind kind, const Dims& dims, double t1, double delta, double r, double c_r,
                        double k, double q, std::size_t mode) {
  const double alpha = (c_r + 3.0) / (2.0 * c_r);
  switch (kind) {
    case RegularizerKind::OverlappedNuclear: {
      const double n = static_cast<double>(dims.size());
      double d = 0.0;
      for (auto x : dims) d = std::max(d, static_cast<double>(x));
      const double first = std::log(4.0 * t1 * n / delta);
      const double second = std::log(2.0 * n * (d + std::pow(d, n - 1.0)) / delta);
      return alpha * r * n * std::sqrt(2.0 * first * second) / std::sqrt(t1);
    }
    case RegularizerKind::SliceNuclear: {
      const double d1 = static_cast<double>(dims[0]), d2 = static_cast<double>(dims[1]), d3 = static_cast<double>(dims[2]);
      return r * (c_r + 3.0) * std::sqrt(std::log(4.0 * t1 * d3 / delta) * std::log(2.0 * d3 * (d1 + d2) / delta)) /
             (c_r * std::sqrt(t1));
    }
    case RegularizerKind::EntryL1: {
      double prod = 1.0;
      for (auto x : dims) prod *= static_cast<double>(x);
      return (c_r + 3.0) * r * k * std::sqrt(std::log(2.0 * prod / delta)) / (2.0 * c_r * std::sqrt(t1));
    }
    case RegularizerKind::FiberGroup: {
      double rest = 1.0;
      for (std::size_t m = 0; m < dims.size(); ++m)
        if (m != mode) rest *= static_cast<double>(dims[m]);
      const double d1 = static_cast<double>(dims[mode]);
      const double growth = std::max(1.0, std::pow(d1, 0.5 - 1.0 / q));
      return alpha * r * k * (std::sqrt(d1) + std::sqrt(std::log(4.0 * rest / delta))) *
             std::sqrt(2.0 * std::log(4.0 * t1 * rest / delta)) * growth / std::sqrt(t1);
    }
  }
  return 0.0;
}

Outcome lambda_lock() {
  Rng rng(1004);
  const std::vector<RegularizerSpec> specs = {RegularizerSpec::overlapped_nuclear(2), RegularizerSpec::slice_nuclear(2, 2),
                                              RegularizerSpec::entry_l1(3), RegularizerSpec::fiber_group(2, 2.0, 0),
                                              RegularizerSpec::fiber_group(2, 3.0, 1)};
  std::uniform_int_distribution<std::size_t> dim(2, 12), t1_pick(5, 50000);
  std::uniform_real_distribution<double> log_delta(std::log(1e-6), std::log(0.5)), noise(0.05, 2.0);
  double worst = 0.0;
  int points = 0;
  bool monotone = true;
  for (int i = 0; i < 50; ++i) {
    const RegularizerSpec& spec = specs[static_cast<std::size_t>(i) % specs.size()];
    Dims dims = spec.kind == RegularizerKind::EntryL1 && i % 2 ? Dims{dim(rng) * 10} : Dims{dim(rng), dim(rng), dim(rng)};
    LambdaSchedule s;
    s.kind = spec.kind;
    s.delta = std::exp(log_delta(rng));
    s.noise_scale = noise(rng);
    const std::size_t t1 = t1_pick(rng);
    const double value = lambda_for(s, spec, dims, t1);
    const double k = 1.0 / std::sqrt(static_cast<double>(product(dims)));
    const double ref = lambda_reference(spec.kind, dims, static_cast<double>(t1), s.delta, s.noise_scale, spec.c_r(),
                                        k, spec.q, spec.fiber_mode);
    worst = std::max(worst, rel_gap(value, ref));
    ++points;
    if (!(lambda_for(s, spec, dims, t1 + 1) < value)) monotone = false;
    LambdaSchedule tighter = s;
    tighter.delta = s.delta / 2.0;
    if (!(lambda_for(tighter, spec, dims, t1) > value)) monotone = false;
  }
  return {worst < 1e-12 && monotone, std::to_string(points) + " grid points, worst relative gap " + fmt(worst, 3) +
                                         ", monotonicity " + (monotone ? "holds" : "violated")};
}

// ---------------------------------------------------------------------------
// 5. Gaussian width

Outcome width_checks() {
  Rng rng(1005);
  const WidthEstimate l1 = gaussian_width_estimate(RegularizerSpec::entry_l1(1), {10, 10}, 200, rng);
  const double target = std::sqrt(2.0 * std::log(100.0));
  const double gap = std::abs(l1.mean - target) / target;
  bool se_ok = true;
  std::string ses;
  for (const auto& spec : {RegularizerSpec::overlapped_nuclear(2), RegularizerSpec::slice_nuclear(2, 2),
                           RegularizerSpec::entry_l1(4), RegularizerSpec::fiber_group(3)}) {
    const WidthEstimate w = gaussian_width_estimate(spec, {8, 8, 8}, 200, rng);
    const double rel = w.std_error / w.mean;
    if (!(rel < 0.05 && w.samples == 200)) se_ok = false;
    ses += (ses.empty() ? "" : "/") + fmt(100.0 * rel, 2) + "%";
  }
  return {gap < 0.15 && se_ok, "entry l1 10x10 width " + fmt(l1.mean) + " vs " + fmt(target) + " (" +
                                   fmt(100.0 * gap, 3) + "% off); 8x8x8 relative SE " + ses};
}

// ---------------------------------------------------------------------------
// Experiment helpers

struct Curve {
  std::vector<double> mean_regret;
  std::vector<double> mean_ratio;
};

Curve read_curve(const fs::path& summary_csv, const std::string& algorithm) {
  std::ifstream in(summary_csv);
  if (!in) throw std::runtime_error("cannot read " + summary_csv.string());
  Curve c;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> cells;
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6 || cells[0] != algorithm) continue;
    c.mean_regret.push_back(std::stod(cells[2]));
    c.mean_ratio.push_back(std::stod(cells[4]));
  }
  return c;
}

ExperimentConfig load_one(const std::string& file, const std::string& id, const fs::path& work) {
  for (auto& c : load_config(fs::path(GELTC_CONFIG_DIR) / file)) {
    if (c.id == id) {
      c.output_dir = work / id;
      return c;
    }
  }
  throw std::runtime_error("experiment " + id + " not found in " + file);
}

double minutes_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
}

/// Sublinearity (a) and plateau (b) checks on one G-ELTC experiment.
Outcome shape_checks(const ExperimentConfig& config, double budget_minutes) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentSummary s = run_experiment(config);
  const double minutes = minutes_since(start);
  const Curve curve = read_curve(s.summary_csv, "geltc");
  const std::size_t horizon = curve.mean_regret.size();
  const std::size_t early = std::min(horizon, s.derived.t1 + 1000);
  const double rate_late = curve.mean_regret[horizon - 1] / static_cast<double>(horizon);
  const double rate_early = curve.mean_regret[early - 1] / static_cast<double>(early);
  const double sublinear = rate_late / rate_early;
  const double drift = curve.mean_ratio[horizon - 1] / curve.mean_ratio[horizon / 2 - 1] - 1.0;
  const bool ok = sublinear < 0.6 && std::abs(drift) < 0.2 && minutes < budget_minutes;
  return {ok, "T1 " + std::to_string(s.derived.t1) + ", (R_T/T)/(R_t/t at t=" + std::to_string(early) + ") = " +
                  fmt(sublinear, 3) + " (< 0.6), ratio drift T/2->T " + fmt(100.0 * drift, 3) + "% (|.| < 20%), " +
                  "final ratio " + fmt(curve.mean_ratio.back(), 3) + ", " + fmt(minutes, 3) + " min"};
}

// ---------------------------------------------------------------------------
// 6-10. Experiment-level criteria

Outcome figure1(const fs::path& work) {
  return shape_checks(load_one("fig1_overlapped_dims.json", "fig1_d8", work), 15.0);
}

Outcome figure2(const fs::path& work) {
  return shape_checks(load_one("fig2_slice_dims.json", "fig2_d8", work), 15.0);
}

Outcome rank_monotonicity(const fs::path& work) {
  std::vector<double> finals;
  std::string detail;
  for (const char* id : {"fig3_r1", "fig3_r2", "fig3_r3"}) {
    const ExperimentSummary s = run_experiment(load_one("fig3_overlapped_ranks.json", id, work));
    finals.push_back(s.algorithm("geltc").final_mean);
    detail += (detail.empty() ? "" : ", ") + std::string(id) + " " + fmt(finals.back(), 5);
  }
  const bool ok = std::is_sorted(finals.begin(), finals.end());
  return {ok, "final mean regret " + detail};
}

Outcome lasso_ordering(const fs::path& work) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentSummary s =
      run_experiment(load_one("fig5_lasso_comparison.json", "fig5_rho07_d100_s5", work), ExperimentMode::CompareLasso);
  const double minutes = minutes_since(start);
  const AlgorithmSummary& g = s.algorithm("geltc");
  const AlgorithmSummary& d = s.algorithm("drlasso");
  const double pooled = std::sqrt(0.5 * (g.final_std * g.final_std + d.final_std * d.final_std));
  const double gap = d.final_mean - g.final_mean;
  const bool ok = g.final_mean < d.final_mean && gap > pooled && minutes < 20.0;
  return {ok, "G-ELTC " + fmt(g.final_mean) + " +- " + fmt(g.final_std) + ", DR-Lasso " + fmt(d.final_mean) + " +- " +
                  fmt(d.final_std) + ", gap " + fmt(gap) + " vs pooled sd " + fmt(pooled) + ", " + fmt(minutes, 3) +
                  " min"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism(const fs::path& work) {
  std::vector<std::string> mismatched;
  const std::vector<std::pair<std::string, std::string>> runs = {{"tiny.json", "tiny"},
                                                                 {"fig5_lasso_comparison.json", "fig5_rho07_d100_s5"}};
  for (const auto& [file, id] : runs) {
    ExperimentConfig first = load_one(file, id, work / "det_first");
    ExperimentConfig second = load_one(file, id, work / "det_second");
    second.workers = first.workers == 1 ? 2 : 1;
    const ExperimentMode mode = first.dims.size() == 1 ? ExperimentMode::CompareLasso : ExperimentMode::Geltc;
    const ExperimentSummary a = run_experiment(first, mode);
    const ExperimentSummary b = run_experiment(second, mode);
    if (slurp(a.summary_csv) != slurp(b.summary_csv)) mismatched.push_back(a.summary_csv.filename().string());
    if (slurp(a.reps_csv) != slurp(b.reps_csv)) mismatched.push_back(a.reps_csv.filename().string());
  }
  std::string detail = "two experiments rerun with different worker counts: ";
  if (mismatched.empty()) return {true, detail + "CSVs byte-identical"};
  for (const auto& m : mismatched) detail += m + " ";
  return {false, detail + "differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  fs::path work = fs::temp_directory_path() / "geltc_acceptance";
  std::vector<int> only;
  app.add_option("--work-dir", work, "Directory for experiment outputs");
  app.add_option("--only", only, "Run only these criterion numbers");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"tensor algebra identities", tensor_identities},
      {"prox correctness", prox_correctness},
      {"GLM derivative checks", glm_checks},
      {"lambda schedule lock", lambda_lock},
      {"Gaussian width estimates", width_checks},
      {"overlapped nuclear regret shape (8x8x8, r=2, T=20000)", [&] { return figure1(work); }},
      {"slice nuclear regret shape (8x8x12, s=3, r=2, T=20000)", [&] { return figure2(work); }},
      {"regret non-decreasing in rank", [&] { return rank_monotonicity(work); }},
      {"G-ELTC beats DR-Lasso on sparse vector bandit", [&] { return lasso_ordering(work); }},
      {"determinism", [&] { return determinism(work); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.passed ? "PASS" : "FAIL") << " [" << number << "] " << criteria[i].first << ": " << o.detail
              << " (" << fmt(secs, 3) << " s)" << std::endl;
    if (!o.passed) ++failed;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
