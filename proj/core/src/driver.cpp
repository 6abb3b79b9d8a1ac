#include "rembo/driver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "rembo/random.hpp"
#include "rembo/stats.hpp"

namespace rembo {

namespace {

constexpr std::uint64_t kEmbeddingStream = 0;
constexpr std::uint64_t kStepStream = 1u << 20;

double to_internal(double v, Sense s) { return s == Sense::Minimize ? -v : v; }
double from_internal(double v, Sense s) { return s == Sense::Minimize ? -v : v; }

bool better(double a, double b, Sense s) { return s == Sense::Minimize ? a < b : a > b; }

struct Normalized {
  Dataset data;
  double shift = 0.0;
  double scale = 1.0;
};

Normalized normalize(const Dataset& raw, Normalization how) {
  Normalized n;
  n.data.points = raw.points;
  n.shift = stats::mean(raw.values);
  if (how == Normalization::Standardize && raw.values.size() > 1) {
    const double sd = stats::stddev(raw.values);
    if (sd > 0.0) n.scale = sd;
  }
  n.data.values.reserve(raw.values.size());
  for (double v : raw.values) n.data.values.push_back((v - n.shift) / n.scale);
  return n;
}

KernelSpec kernel_family(const OptimizerState& s, const RunConfig& cfg) {
  switch (cfg.kernel_variant) {
    case KernelVariant::LowDimSE:
      return KernelSpec::low_dim_se(LengthScale(s.hyper.ell));
    case KernelVariant::HighDimProjectedSE:
      return KernelSpec::high_dim_projected_se(s.embedding, LengthScale(s.hyper.ell));
    case KernelVariant::CategoricalHamming:
      return KernelSpec::categorical(s.embedding, 1.0 / (s.hyper.ell * s.hyper.ell));
    case KernelVariant::SkewSE:
      break;
  }
  throw std::invalid_argument("skew SE kernel is not available in the optimization loop");
}

struct Proposal {
  Eigen::VectorXd point;
  double std = 1.0;
};

/// The Hamming kernel can turn indefinite beyond what jitter repairs as points
/// arrive, so a scale chosen at the last retune may stop factorizing. A failed
/// fit then triggers an off-schedule refit of ell over [L, U] (the counter and
/// iteration are left alone); only if that also fails does the error escape.
GpModel fit_surrogate(OptimizerState& s, const RunConfig& cfg, const Dataset& data) {
  try {
    return GpModel::fit(data, kernel_family(s, cfg), cfg.jitter);
  } catch (const NumericalError&) {
    if (!cfg.adapt_length_scale) throw;
    s.hyper.ell = fit_length_scale(data, kernel_family(s, cfg), cfg.jitter, s.hyper.lower, s.hyper.upper);
    return GpModel::fit(data, kernel_family(s, cfg), cfg.jitter);
  }
}

Proposal propose(OptimizerState& s, const RunConfig& cfg) {
  if (s.data.empty()) return {s.domain.center(), 1.0};
  const Normalized n = normalize(s.data, cfg.normalization);
  const GpModel gp = fit_surrogate(s, cfg, n.data);
  const Incumbent inc{s.incumbent.point, (s.incumbent.value - n.shift) / n.scale};
  InnerOptBudget budget;
  budget.max_evals = cfg.inner_budget(s.domain.dim());
  const auto res =
      maximize_acquisition(gp, cfg.acquisition, s.domain, inc, budget, derive_seed(s.seed, kStepStream + s.evals_used));
  return {res.point, std::sqrt(gp.predict(res.point).variance)};
}

/// Shared tail of bo_step / rembo_step: evaluate, augment, update incumbent
/// and controller.
template <class Evaluate>
StepRecord complete_step(OptimizerState& s, const Objective& obj, const RunConfig& cfg, const Proposal& p,
                         Evaluate&& evaluate) {
  StepRecord rec;
  rec.step = s.evals_used + 1;
  rec.proposal_std = p.std;
  const Sense sense = obj.sense();
  double internal = 0.0;
  try {
    const double v = evaluate(p.point);
    if (!std::isfinite(v)) throw EvaluationFailure(EvaluationFailure::Kind::Unparseable, "objective returned a non-finite value");
    internal = to_internal(v, sense);
    rec.value = v;
    if (!s.best_value || better(v, *s.best_value, sense)) s.best_value = v;
  } catch (const EvaluationFailure& e) {
    // Worst value seen so far minus one unit.
    internal = s.data.empty() ? -1.0 : *std::min_element(s.data.values.begin(), s.data.values.end()) - 1.0;
    rec.value = from_internal(internal, sense);
    rec.failed = true;
    rec.failure = FailureRecord{0, rec.step, e.kind(), e.what()};
  }

  const bool first = s.data.empty();
  s.data.add(p.point, internal);
  ++s.evals_used;
  if (first || internal > s.incumbent.value) s.incumbent = Incumbent{p.point, internal};

  if (cfg.adapt_length_scale) {
    s.hyper = observe_proposal(s.hyper, p.std);
    const Normalized n = normalize(s.data, cfg.normalization);
    s.hyper = maybe_retune(s.hyper, n.data, kernel_family(s, cfg), cfg.jitter);
  } else {
    ++s.hyper.iter;
  }
  rec.hyper = s.hyper;
  return rec;
}

}  // namespace

void RunConfig::validate(std::size_t D) const {
  if (D < 1) throw std::invalid_argument("objective dimension must be >= 1");
  if (total_budget < 1) throw std::invalid_argument("total_budget must be >= 1");
  if (mode == Mode::RandomSearch) return;
  if (k_interleaved < 1) throw std::invalid_argument("k must be >= 1");
  if (total_budget / k_interleaved < 2) {
    throw std::invalid_argument(fmt::format("budget per interleaved run floor({}/{}) must be >= 2", total_budget,
                                            k_interleaved));
  }
  hyper.validate();
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be >= 0");
  if (kernel_variant == KernelVariant::SkewSE) throw std::invalid_argument("kernel variant skew_se cannot drive a run");
  if (mode == Mode::Rembo) {
    if (d < 1 || d > D) throw std::invalid_argument(fmt::format("need 1 <= d <= D (d = {}, D = {})", d, D));
    if (!(embedding_scale > 0.0)) throw std::invalid_argument("embedding_scale must be > 0");
    if (kernel_variant == KernelVariant::HighDimProjectedSE && D > kLazyThreshold) {
      throw std::invalid_argument("high-dimensional kernel needs D <= 100000");
    }
  } else {
    if (kernel_variant != KernelVariant::LowDimSE) throw std::invalid_argument("BO runs use the se kernel on X");
    if (D > kLazyThreshold) throw std::invalid_argument("BO needs D <= 100000");
  }
}

std::size_t RunConfig::sub_run_budget(std::size_t r) const {
  if (r >= k_interleaved) throw std::out_of_range("sub-run index out of range");
  return total_budget / k_interleaved + (r < total_budget % k_interleaved ? 1 : 0);
}

OptimizerState init_state(const RunConfig& cfg, const Objective& obj, std::size_t sub_run) {
  const std::size_t D = obj.dimension();
  cfg.validate(D);
  if (cfg.mode == Mode::RandomSearch) throw std::invalid_argument("random search keeps no optimizer state");
  OptimizerState s;
  s.seed = derive_seed(cfg.seed, sub_run);
  s.hyper = cfg.hyper;
  if (cfg.mode == Mode::Rembo) {
    std::optional<CategoricalTable> table;
    if (cfg.kernel_variant == KernelVariant::CategoricalHamming) {
      table = obj.categories();
      if (!table) throw std::invalid_argument("categorical kernel needs an objective with categories");
    }
    auto emb = std::make_shared<const Embedding>(
        Embedding::draw(D, cfg.d, derive_seed(s.seed, kEmbeddingStream), std::nullopt, table, cfg.embedding_scale));
    if (emb->storage() == Embedding::Storage::LazyRows && !obj.support()) {
      throw std::invalid_argument("objective must declare its support when D > 100000");
    }
    s.domain = emb->y_box();
    s.embedding = std::move(emb);
  } else {
    s.domain = Box::cube(D, -1.0, 1.0);
  }
  return s;
}

Point embed_point(const Embedding& emb, const Eigen::VectorXd& y, const Objective& objective) {
  if (const auto support = objective.support()) {
    return Point::sparse(emb.extrinsic_dim(), *support, emb.map_coordinates(y, *support));
  }
  return Point::dense(emb.map_to_x(y));
}

StepRecord bo_step(OptimizerState& state, const Objective& objective, const RunConfig& config) {
  if (state.embedding) throw std::logic_error("bo_step: state belongs to a REMBO run");
  const Proposal p = propose(state, config);
  return complete_step(state, objective, config, p,
                       [&](const Eigen::VectorXd& x) { return objective.evaluate(Point::dense(x)); });
}

StepRecord rembo_step(OptimizerState& state, const Objective& objective, const RunConfig& config) {
  if (!state.embedding) throw std::logic_error("rembo_step: state has no embedding");
  const Proposal p = propose(state, config);
  return complete_step(state, objective, config, p, [&](const Eigen::VectorXd& y) {
    return objective.evaluate(embed_point(*state.embedding, y, objective));
  });
}

std::optional<double> RunReport::final_gap() const {
  if (trace.empty()) return std::nullopt;
  return trace.back().best_gap;
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<StepRecord> run_single(const RunConfig& cfg, const Objective& obj, std::size_t sub_run) {
  OptimizerState s = init_state(cfg, obj, sub_run);
  const std::size_t budget = cfg.sub_run_budget(sub_run);
  std::vector<StepRecord> out;
  out.reserve(budget);
  while (s.evals_used < budget) {
    out.push_back(cfg.mode == Mode::Rembo ? rembo_step(s, obj, cfg) : bo_step(s, obj, cfg));
    if (out.back().failure) out.back().failure->sub_run = sub_run;
  }
  return out;
}

void append_row(RunReport& rep, const Objective& obj, std::optional<double>& best, const StepRecord& rec,
                std::size_t sub_run, bool with_hyper) {
  if (!rec.failed && (!best || better(rec.value, *best, obj.sense()))) best = rec.value;
  TraceRow row;
  row.cumulative_evals = rep.trace.size() + 1;
  row.best_value = best;
  if (best) row.best_gap = obj.gap(*best);
  row.sub_run = sub_run;
  row.step = rec.step;
  if (with_hyper) {
    row.ell = rec.hyper.ell;
    row.upper = rec.hyper.upper;
    row.exploit_count = rec.hyper.exploit_count;
  }
  rep.trace.push_back(row);
  if (rec.failure) rep.failures.push_back(*rec.failure);
}

}  // namespace

RunReport run_interleaved(const RunConfig& config, const Objective& objective, std::size_t threads) {
  if (config.mode == Mode::RandomSearch) throw std::invalid_argument("run_interleaved: use random_search");
  config.validate(objective.dimension());
  const auto start = Clock::now();
  const std::size_t k = config.k_interleaved;
  std::vector<std::vector<StepRecord>> runs(k);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t r = next++; r < k; r = next++) {
      try {
        runs[r] = run_single(config, objective, r);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, k);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  RunReport rep;
  rep.seed = config.seed;
  rep.config_echo = describe(config);
  std::optional<double> best;
  const std::size_t rounds = config.sub_run_budget(0);
  for (std::size_t s = 0; s < rounds; ++s) {
    for (std::size_t r = 0; r < k; ++r) {
      if (s < runs[r].size()) append_row(rep, objective, best, runs[r][s], r, true);
    }
  }
  rep.wall_time_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

RunReport random_search(const RunConfig& config, const Objective& objective) {
  const std::size_t D = objective.dimension();
  if (config.total_budget < 1) throw std::invalid_argument("random search needs a budget >= 1");
  const auto start = Clock::now();
  const auto support = objective.support();
  if (!support && D > kLazyThreshold) throw std::invalid_argument("objective must declare its support when D > 100000");

  RunReport rep;
  rep.seed = config.seed;
  rep.config_echo = describe(config);
  std::optional<double> best;
  for (std::size_t t = 0; t < config.total_budget; ++t) {
    const std::uint64_t key = derive_seed(config.seed, t);
    const auto coord = [&](std::size_t i) { return -1.0 + 2.0 * counter_uniform(key, i); };
    Point x;
    if (support) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(support->size()));
      for (std::size_t k = 0; k < support->size(); ++k) v(static_cast<Eigen::Index>(k)) = coord((*support)[k]);
      x = Point::sparse(D, *support, std::move(v));
    } else {
      Eigen::VectorXd v(static_cast<Eigen::Index>(D));
      for (std::size_t i = 0; i < D; ++i) v(static_cast<Eigen::Index>(i)) = coord(i);
      x = Point::dense(std::move(v));
    }
    StepRecord rec;
    rec.step = t + 1;
    try {
      rec.value = objective.evaluate(x);
      if (!std::isfinite(rec.value)) {
        throw EvaluationFailure(EvaluationFailure::Kind::Unparseable, "objective returned a non-finite value");
      }
    } catch (const EvaluationFailure& e) {
      rec.failed = true;
      rec.failure = FailureRecord{0, rec.step, e.kind(), e.what()};
    }
    append_row(rep, objective, best, rec, 0, false);
  }
  rep.wall_time_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

RunReport run(const RunConfig& config, const Objective& objective, std::size_t threads) {
  if (config.mode == Mode::RandomSearch) return random_search(config, objective);
  return run_interleaved(config, objective, threads);
}

namespace {

std::string opt_str(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

}  // namespace

void write_trace_csv(std::ostream& out, const RunReport& report) {
  out << kTraceHeader << '\n';
  for (const auto& r : report.trace) {
    out << r.cumulative_evals << ',' << opt_str(r.best_value) << ',' << opt_str(r.best_gap) << ',' << r.sub_run << ','
        << r.step << ',' << opt_str(r.ell) << ',' << opt_str(r.upper) << ','
        << (r.exploit_count ? std::to_string(*r.exploit_count) : std::string()) << '\n';
  }
}

void write_report_meta(std::ostream& out, const RunReport& report) {
  out << report.config_echo;
  out << "seed = " << report.seed << '\n';
  out << fmt::format("wall_time_seconds = {:.3f}\n", report.wall_time_seconds);
  out << "failures = " << report.failures.size() << '\n';
  for (const auto& f : report.failures) {
    out << fmt::format("failure sub_run={} step={} kind={} message={}\n", f.sub_run, f.step, to_string(f.kind),
                       f.message);
  }
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Rembo: return "rembo";
    case Mode::Bo: return "bo";
    case Mode::RandomSearch: return "random";
  }
  return "?";
}

const char* to_string(KernelVariant variant) {
  switch (variant) {
    case KernelVariant::LowDimSE: return "se";
    case KernelVariant::HighDimProjectedSE: return "se_projected";
    case KernelVariant::CategoricalHamming: return "hamming";
    case KernelVariant::SkewSE: return "skew_se";
  }
  return "?";
}

std::string describe(const RunConfig& c) {
  std::string s;
  s += fmt::format("mode = {}\n", to_string(c.mode));
  if (c.mode == Mode::RandomSearch) return s + fmt::format("budget = {}\n", c.total_budget);
  if (c.mode == Mode::Rembo) s += fmt::format("d = {}\n", c.d);
  s += fmt::format("kernel = {}\n", to_string(c.kernel_variant));
  s += fmt::format("k = {}\nbudget = {}\n", c.k_interleaved, c.total_budget);
  s += c.acquisition.variant == AcquisitionSpec::Variant::ExpectedImprovement
           ? std::string("acquisition = ei\n")
           : fmt::format("acquisition = ucb\nucb_beta = {}\n", c.acquisition.ucb_beta);
  s += c.inner_evals ? fmt::format("inner_evals = {}\n", c.inner_evals) : std::string("inner_evals = auto\n");
  s += fmt::format("ell = {}\nell_lower = {}\nell_upper = {}\nt_sigma = {}\nadapt_ell = {}\n", c.hyper.ell,
                   c.hyper.lower, c.hyper.upper, c.hyper.t_sigma, c.adapt_length_scale);
  s += fmt::format("embedding_scale = {}\njitter = {}\nnormalization = {}\n", c.embedding_scale, c.jitter,
                   c.normalization == Normalization::Center ? "center" : "standardize");
  return s;
}

}  // namespace rembo
