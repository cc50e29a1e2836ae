#include "geltc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace geltc {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

LambdaSchedule ExperimentConfig::lambda_schedule() const {
  LambdaSchedule s;
  s.kind = structure.kind;
  s.delta = delta;
  s.noise_scale = family.noise_scale;
  s.k = k;
  s.c_lambda = c_lambda;
  return s;
}

const AlgorithmSummary& ExperimentSummary::algorithm(const std::string& name) const {
  for (const auto& a : algorithms)
    if (a.algorithm == name) return a;
  throw std::out_of_range("no results for algorithm '" + name + "'");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
T get_required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  return get_or<T>(obj, key, T{}, where);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

RegularizerSpec parse_structure(const json& obj, const std::string& where) {
  check_keys(obj, {"kind", "rank", "sparsity", "q", "fiber_mode"}, where);
  RegularizerSpec spec;
  try {
    spec.kind = parse_regularizer_kind(get_required<std::string>(obj, "kind", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (obj.contains("rank")) spec.rank = get_required<std::size_t>(obj, "rank", where);
  if (obj.contains("sparsity")) spec.sparsity = get_required<std::size_t>(obj, "sparsity", where);
  spec.q = get_or<double>(obj, "q", 2.0, where);
  spec.fiber_mode = get_or<std::size_t>(obj, "fiber_mode", 0, where);
  const bool needs_rank = spec.kind == RegularizerKind::OverlappedNuclear || spec.kind == RegularizerKind::SliceNuclear;
  const bool needs_sparsity = spec.kind != RegularizerKind::OverlappedNuclear;
  require(!needs_rank || (spec.rank && *spec.rank >= 1), where + ": rank >= 1 required for this kind");
  require(!needs_sparsity || (spec.sparsity && *spec.sparsity >= 1), where + ": sparsity >= 1 required for this kind");
  require(spec.q > 1.0, where + ": q must exceed 1");
  return spec;
}

GlmFamily parse_family(const json& obj, const std::string& where) {
  check_keys(obj, {"kind", "noise_scale"}, where);
  GlmFamily family;
  try {
    family.kind = parse_glm_kind(get_required<std::string>(obj, "kind", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  const double fallback = family.kind == GlmKind::BernoulliLogistic ? 0.5 : 1.0;
  family.noise_scale = get_or<double>(obj, "noise_scale", fallback, where);
  require(family.noise_scale >= 0.0, where + ": noise_scale must be non-negative");
  return family;
}

ContextModel parse_contexts(const json& obj, const std::string& where) {
  check_keys(obj, {"kind", "rho2"}, where);
  ContextModel model;
  try {
    model.kind = parse_context_kind(get_required<std::string>(obj, "kind", where));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  model.rho2 = get_or<double>(obj, "rho2", 0.0, where);
  require(model.rho2 >= 0.0 && model.rho2 < 1.0, where + ": rho2 must lie in [0, 1)");
  return model;
}

FitOptions parse_fit(const json& obj, const std::string& where) {
  check_keys(obj, {"max_iters", "tol", "stationarity_tol", "initial_step", "shrink", "sufficient_decrease",
                   "restart", "prox"},
             where);
  FitOptions f;
  f.max_iters = get_or<int>(obj, "max_iters", f.max_iters, where);
  f.tol = get_or<double>(obj, "tol", f.tol, where);
  f.stationarity_tol = get_or<double>(obj, "stationarity_tol", f.stationarity_tol, where);
  f.initial_step = get_or<double>(obj, "initial_step", f.initial_step, where);
  f.shrink = get_or<double>(obj, "shrink", f.shrink, where);
  f.sufficient_decrease = get_or<double>(obj, "sufficient_decrease", f.sufficient_decrease, where);
  f.restart = get_or<bool>(obj, "restart", f.restart, where);
  if (obj.contains("prox")) {
    const json& p = obj.at("prox");
    const std::string pw = where + ".prox";
    check_keys(p, {"max_iters", "tol", "rho"}, pw);
    f.prox.max_iters = get_or<int>(p, "max_iters", f.prox.max_iters, pw);
    f.prox.tol = get_or<double>(p, "tol", f.prox.tol, pw);
    f.prox.rho = get_or<double>(p, "rho", f.prox.rho, pw);
    require(f.prox.max_iters >= 1 && f.prox.tol > 0.0 && f.prox.rho > 0.0, pw + ": values must be positive");
  }
  require(f.max_iters >= 1, where + ".max_iters must be positive");
  require(f.tol > 0.0, where + ".tol must be positive");
  require(f.shrink > 0.0 && f.shrink < 1.0, where + ".shrink must lie in (0, 1)");
  require(f.initial_step > 0.0, where + ".initial_step must be positive");
  return f;
}

DrLassoConfig parse_drlasso(const json& obj, const std::string& where) {
  check_keys(obj, {"lambda1", "lambda2", "forced_rounds", "max_sweeps", "tol"}, where);
  DrLassoConfig c;
  c.lambda1 = get_or<double>(obj, "lambda1", c.lambda1, where);
  c.lambda2 = get_or<double>(obj, "lambda2", c.lambda2, where);
  c.forced_rounds = get_or<std::size_t>(obj, "forced_rounds", c.forced_rounds, where);
  c.max_sweeps = get_or<int>(obj, "max_sweeps", c.max_sweeps, where);
  c.tol = get_or<double>(obj, "tol", c.tol, where);
  require(c.lambda1 >= 0.0 && c.lambda2 >= 0.0, where + ": lambdas must be non-negative");
  return c;
}

ExperimentConfig parse_experiment(const json& obj, const std::string& where) {
  check_keys(obj,
             {"schema_version", "id", "structure", "dims", "arms", "horizon", "family", "contexts", "delta",
              "c_explore", "c_lambda", "k", "replications", "width_samples", "seed", "output_dir", "workers",
              "fit", "drlasso"},
             where);
  ExperimentConfig c;
  c.source = obj;
  c.id = get_required<std::string>(obj, "id", where);
  require(!c.id.empty() && c.id.find_first_of("/\\ ") == std::string::npos,
          where + ": id must be non-empty without spaces or path separators");
  const std::string here = where + "[" + c.id + "]";
  if (!obj.contains("structure")) throw ConfigError(here + ": missing required key 'structure'");
  c.structure = parse_structure(obj.at("structure"), here + ".structure");
  c.dims = get_required<Dims>(obj, "dims", here);
  require(!c.dims.empty(), here + ".dims must be non-empty");
  for (auto d : c.dims) require(d >= 1, here + ".dims entries must be positive");
  try {
    check_compatible(c.structure, c.dims);
  } catch (const std::exception& e) {
    throw ConfigError(here + ": " + e.what());
  }
  c.arms = get_or<std::size_t>(obj, "arms", c.arms, here);
  c.horizon = get_required<std::size_t>(obj, "horizon", here);
  if (obj.contains("family")) c.family = parse_family(obj.at("family"), here + ".family");
  if (obj.contains("contexts")) c.contexts = parse_contexts(obj.at("contexts"), here + ".contexts");
  c.delta = get_or<double>(obj, "delta", c.delta, here);
  c.c_explore = get_or<double>(obj, "c_explore", c.c_explore, here);
  c.c_lambda = get_or<double>(obj, "c_lambda", c.c_lambda, here);
  if (obj.contains("k")) c.k = get_required<double>(obj, "k", here);
  c.replications = get_or<std::size_t>(obj, "replications", c.replications, here);
  c.width_samples = get_or<std::size_t>(obj, "width_samples", c.width_samples, here);
  c.seed = get_or<std::uint64_t>(obj, "seed", c.seed, here);
  c.output_dir = get_or<std::string>(obj, "output_dir", c.output_dir.string(), here);
  c.workers = get_or<std::size_t>(obj, "workers", c.workers, here);
  if (obj.contains("fit")) c.fit = parse_fit(obj.at("fit"), here + ".fit");
  if (obj.contains("drlasso")) c.drlasso = parse_drlasso(obj.at("drlasso"), here + ".drlasso");

  require(c.arms >= 2, here + ".arms must be at least 2");
  require(c.horizon >= 2, here + ".horizon must be at least 2");
  require(c.delta > 0.0 && c.delta < 1.0, here + ".delta must lie in (0, 1)");
  require(c.c_explore > 0.0, here + ".c_explore must be positive");
  require(c.c_lambda >= 0.0, here + ".c_lambda must be non-negative");
  require(!c.k || *c.k > 0.0, here + ".k must be positive");
  require(c.replications >= 1, here + ".replications must be at least 1");
  require(c.width_samples >= 1, here + ".width_samples must be at least 1");
  return c;
}

}  // namespace

std::vector<ExperimentConfig> parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  if (!doc.contains("schema_version")) throw ConfigError("config: missing required key 'schema_version'");
  const int version = get_required<int>(doc, "schema_version", "config");
  if (version != kConfigSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");

  std::vector<ExperimentConfig> out;
  if (!doc.contains("experiments")) {
    out.push_back(parse_experiment(doc, "config"));
    return out;
  }
  check_keys(doc, {"schema_version", "defaults", "experiments", "description"}, "config");
  const json defaults = doc.value("defaults", json::object());
  if (!defaults.is_object()) throw ConfigError("config.defaults: expected a JSON object");
  const json& list = doc.at("experiments");
  if (!list.is_array() || list.empty()) throw ConfigError("config.experiments: expected a non-empty array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    json merged = defaults;
    merged.merge_patch(list[i]);
    out.push_back(parse_experiment(merged, "config.experiments[" + std::to_string(i) + "]"));
    if (!seen.insert(out.back().id).second) throw ConfigError("config: duplicate experiment id '" + out.back().id + "'");
  }
  return out;
}

std::vector<ExperimentConfig> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path.string() + " at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_config(doc);
}

// ---------------------------------------------------------------------------
// Running

std::uint64_t replication_seed(const ExperimentConfig& config, std::size_t replication) {
  return derive_seed(config.seed, replication);
}

namespace {

constexpr std::uint64_t kWidthStream = 0x5749445448ULL;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct RepResult {
  std::vector<RunRecord> runs;  // one per algorithm, fixed order
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write output file " + path.string());
  return out;
}

void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

}  // namespace

DerivedQuantities derive(const ExperimentConfig& config) {
  DerivedQuantities d;
  Rng width_rng(derive_seed(config.seed, kWidthStream));
  d.width = gaussian_width_estimate(config.structure, config.dims, config.width_samples, width_rng);
  d.phi = compatibility_phi(config.structure, config.dims);
  d.t1 = exploration_length(config.c_explore, d.phi, d.width.mean, config.horizon);
  d.lambda = lambda_for(config.lambda_schedule(), config.structure, config.dims, d.t1);
  d.bound_at_horizon = theoretical_bound(config.structure, config.dims, static_cast<double>(config.horizon), config.delta);
  return d;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, ExperimentMode mode, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  if (mode == ExperimentMode::CompareLasso) {
    if (config.dims.size() != 1 || config.structure.kind != RegularizerKind::EntryL1 ||
        config.family.kind != GlmKind::GaussianIdentity)
      throw ConfigError(config.id + ": compare-lasso needs 1-order dims, entry_l1 structure and gaussian family");
  }

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + config.output_dir.string() + ": " + ec.message());

  ExperimentSummary summary;
  summary.id = config.id;
  summary.derived = derive(config);

  GeltcOptions geltc_opts;
  geltc_opts.c_explore = config.c_explore;
  geltc_opts.fit = config.fit;
  geltc_opts.width_samples = config.width_samples;
  geltc_opts.width = summary.derived.width.mean;
  const LambdaSchedule schedule = config.lambda_schedule();

  const std::size_t reps = config.replications;
  std::vector<RepResult> results(reps);
  std::vector<std::exception_ptr> errors(reps);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  const auto work = [&]() {
    for (std::size_t k = next++; k < reps; k = next++) {
      try {
        const std::uint64_t seed = replication_seed(config, k);
        BanditInstance instance;
        if (mode == ExperimentMode::CompareLasso) {
          Rng env_rng(seed);
          instance = gen_lasso_comparison_env(config.arms, config.dims[0], *config.structure.sparsity,
                                              config.contexts.rho2, config.family.noise_scale, config.horizon, env_rng);
        } else {
          instance = make_instance(config.dims, config.structure, config.arms, config.horizon, config.family,
                                   config.contexts, InstanceSeeds::derive(seed));
        }
        results[k].runs.push_back(run_geltc(instance, schedule, geltc_opts));
        if (mode == ExperimentMode::CompareLasso) results[k].runs.push_back(run_drlasso(instance, config.drlasso));
        if (log) {
          std::lock_guard lock(log_mutex);
          *log << "  [" << config.id << "] replication " << k + 1 << "/" << reps << " done\n";
        }
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, reps);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const std::size_t n_algorithms = results.front().runs.size();
  const std::size_t horizon = config.horizon;
  std::vector<double> bounds(horizon);
  for (std::size_t t = 0; t < horizon; ++t)
    bounds[t] = theoretical_bound(config.structure, config.dims, static_cast<double>(t + 1), config.delta);

  summary.summary_csv = config.output_dir / (config.id + "_summary.csv");
  summary.reps_csv = config.output_dir / (config.id + "_reps.csv");
  summary.manifest = config.output_dir / (config.id + "_manifest.json");

  {
    std::ofstream out = open_output(summary.summary_csv);
    out << kSummaryHeader << '\n';
    std::vector<double> regrets(reps), ratios(reps);
    for (std::size_t a = 0; a < n_algorithms; ++a) {
      const std::string& name = results.front().runs[a].algorithm;
      for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t k = 0; k < reps; ++k) {
          regrets[k] = results[k].runs[a].cumulative_regret[t];
          ratios[k] = regrets[k] / bounds[t];
        }
        out << name << ',' << t + 1 << ',' << format_double(mean_of(regrets)) << ',' << format_double(std_of(regrets))
            << ',' << format_double(mean_of(ratios)) << ',' << format_double(std_of(ratios)) << '\n';
      }
    }
    check_written(out, summary.summary_csv);
  }

  {
    std::ofstream out = open_output(summary.reps_csv);
    out << kRepsHeader << '\n';
    for (std::size_t a = 0; a < n_algorithms; ++a) {
      for (std::size_t k = 0; k < reps; ++k) {
        const RunRecord& r = results[k].runs[a];
        out << r.algorithm << ',' << k << ',' << replication_seed(config, k) << ',' << r.t1 << ','
            << format_double(r.lambda) << ',' << format_double(r.width) << ',' << format_double(r.final_regret()) << ','
            << format_double(r.final_regret() / bounds.back()) << ',' << r.fit.iterations << ','
            << format_double(r.fit.objective) << ',' << format_double(r.fit.stationarity) << ','
            << (r.fit.converged ? 1 : 0) << ',' << r.nonconverged_fits << '\n';
      }
    }
    check_written(out, summary.reps_csv);
  }

  for (std::size_t a = 0; a < n_algorithms; ++a) {
    AlgorithmSummary s;
    s.algorithm = results.front().runs[a].algorithm;
    std::vector<double> ratios;
    for (std::size_t k = 0; k < reps; ++k) {
      s.final_regrets.push_back(results[k].runs[a].final_regret());
      ratios.push_back(s.final_regrets.back() / bounds.back());
    }
    s.final_mean = mean_of(s.final_regrets);
    s.final_std = std_of(s.final_regrets);
    s.final_ratio_mean = mean_of(ratios);
    summary.algorithms.push_back(std::move(s));
  }

  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  {
    json manifest;
    manifest["schema_version"] = kConfigSchemaVersion;
    manifest["experiment_id"] = config.id;
    manifest["mode"] = mode == ExperimentMode::CompareLasso ? "compare-lasso" : "run";
    manifest["config"] = config.source;
    manifest["config_hash"] = hex64(fnv1a(config.source.dump()));
    manifest["derived"] = {{"width", summary.derived.width.mean},
                           {"width_std_error", summary.derived.width.std_error},
                           {"width_samples", summary.derived.width.samples},
                           {"phi", summary.derived.phi},
                           {"t1", summary.derived.t1},
                           {"lambda", summary.derived.lambda},
                           {"bound_at_horizon", summary.derived.bound_at_horizon}};
    json reps_json = json::array();
    for (std::size_t k = 0; k < reps; ++k) {
      json entry = {{"replication", k}, {"replication_seed", replication_seed(config, k)}};
      json runs = json::array();
      for (const RunRecord& r : results[k].runs) {
        runs.push_back({{"algorithm", r.algorithm},
                        {"seeds", {{"truth", r.seeds.truth}, {"contexts", r.seeds.contexts},
                                   {"rewards", r.seeds.rewards}, {"policy", r.seeds.policy}}},
                        {"t1", r.t1},
                        {"lambda", r.lambda},
                        {"final_cum_regret", r.final_regret()},
                        {"fit", {{"iterations", r.fit.iterations}, {"objective", r.fit.objective},
                                 {"relative_change", r.fit.relative_change}, {"stationarity", r.fit.stationarity},
                                 {"prox_residual", r.fit.prox_residual}, {"restarts", r.fit.restarts},
                                 {"converged", r.fit.converged}}},
                        {"nonconverged_fits", r.nonconverged_fits},
                        {"wall_seconds", r.wall_seconds}});
      }
      entry["runs"] = std::move(runs);
      reps_json.push_back(std::move(entry));
    }
    manifest["replications"] = std::move(reps_json);
    manifest["outputs"] = {summary.summary_csv.filename().string(), summary.reps_csv.filename().string()};
    manifest["versions"] = {{"geltc", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"compiler", __VERSION__}};
    manifest["wall_seconds"] = summary.wall_seconds;
    std::ofstream out = open_output(summary.manifest);
    out << manifest.dump(2) << '\n';
    check_written(out, summary.manifest);
  }
  return summary;
}

void print_summary(std::ostream& os, const ExperimentSummary& summary) {
  const auto& d = summary.derived;
  os << "experiment " << summary.id << ": width " << std::setprecision(5) << d.width.mean << " (se "
     << d.width.std_error << "), T1 " << d.t1 << ", lambda " << d.lambda << '\n';
  os << "  " << std::left << std::setw(10) << "algorithm" << std::right << std::setw(16) << "final regret"
     << std::setw(12) << "std" << std::setw(14) << "R_T/B_T" << '\n';
  for (const auto& a : summary.algorithms) {
    os << "  " << std::left << std::setw(10) << a.algorithm << std::right << std::fixed << std::setprecision(3)
       << std::setw(16) << a.final_mean << std::setw(12) << a.final_std << std::setprecision(5) << std::setw(14)
       << a.final_ratio_mean << '\n';
    os.unsetf(std::ios::fixed);
  }
  os << "  outputs: " << summary.summary_csv.string() << ", " << summary.reps_csv.string() << ", "
     << summary.manifest.string() << '\n';
}

}  // namespace geltc
