#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rembo/acquisition.hpp"
#include "rembo/embedding.hpp"
#include "rembo/gp.hpp"
#include "rembo/hyperopt.hpp"
#include "rembo/kernels.hpp"
#include "rembo/objective.hpp"

namespace rembo {

enum class Mode { Rembo, Bo, RandomSearch };

/// How observed values are transformed before the zero-mean GP sees them.
enum class Normalization { Center, Standardize };

struct RunConfig {
  Mode mode = Mode::Rembo;
  /// Embedding dimension (REMBO only).
  std::size_t d = 2;
  KernelVariant kernel_variant = KernelVariant::LowDimSE;
  std::size_t k_interleaved = 1;
  std::size_t total_budget = 500;
  AcquisitionSpec acquisition;
  std::uint64_t seed = 0;

  /// Acquisition evaluations per step, split between DIRECT and CMA-ES;
  /// 0 means 500 per search dimension.
  std::size_t inner_evals = 0;
  /// Starting length scale and bounds of the adaptive controller.
  HyperState hyper{.ell = 0.1};
  /// false keeps ell fixed at hyper.ell for the whole run.
  bool adapt_length_scale = true;
  /// Standard deviation of the entries of A.
  double embedding_scale = 1.0;
  double jitter = 1e-6;
  Normalization normalization = Normalization::Center;

  void validate(std::size_t D) const;
  std::size_t inner_budget(std::size_t search_dim) const { return inner_evals ? inner_evals : 500 * search_dim; }
  /// Evaluations granted to sub-run r; the first total_budget % k sub-runs
  /// get one extra so the total is exact.
  std::size_t sub_run_budget(std::size_t r) const;
};

/// Loop state of one BO or REMBO run. Values in `data` are in the internal
/// maximization sense (negated for minimization objectives).
struct OptimizerState {
  std::shared_ptr<const Embedding> embedding;
  Dataset data;
  HyperState hyper;
  Incumbent incumbent;
  std::size_t evals_used = 0;
  std::uint64_t seed = 0;
  /// Search domain: Y for REMBO, X for BO.
  Box domain;
  /// Best non-failed value in the objective's own sense.
  std::optional<double> best_value;
};

struct FailureRecord {
  std::size_t sub_run = 0;
  std::size_t step = 0;
  EvaluationFailure::Kind kind = EvaluationFailure::Kind::Other;
  std::string message;
};

/// What happened in one loop iteration.
struct StepRecord {
  std::size_t step = 0;  // 1-based within the run
  double value = 0.0;    // objective sense; the substitute value on failure
  bool failed = false;
  std::optional<FailureRecord> failure;
  double proposal_std = 0.0;
  HyperState hyper;
};

/// Fresh state for sub-run `sub_run` of `config` (embedding drawn for REMBO).
OptimizerState init_state(const RunConfig& config, const Objective& objective, std::size_t sub_run);

/// One iteration of standard BO in X. The first query is the box center.
StepRecord bo_step(OptimizerState& state, const Objective& objective, const RunConfig& config);

/// One iteration of REMBO in Y. The first query is y = 0.
StepRecord rembo_step(OptimizerState& state, const Objective& objective, const RunConfig& config);

/// The point of R^D that REMBO evaluates for y: only the objective's support
/// coordinates when it declares one.
Point embed_point(const Embedding& emb, const Eigen::VectorXd& y, const Objective& objective);

struct TraceRow {
  std::size_t cumulative_evals = 0;
  std::optional<double> best_value;
  std::optional<double> best_gap;
  std::size_t sub_run = 0;
  std::size_t step = 0;
  std::optional<double> ell;
  std::optional<double> upper;
  std::optional<int> exploit_count;
};

struct RunReport {
  std::vector<TraceRow> trace;
  std::vector<FailureRecord> failures;
  std::string config_echo;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;

  std::optional<double> final_gap() const;
};

/// k independent runs advanced round-robin one step at a time. Sub-runs share
/// nothing, so they are computed on up to `threads` workers and merged in
/// (round, sub_run) order afterwards.
RunReport run_interleaved(const RunConfig& config, const Objective& objective, std::size_t threads = 1);

/// Uniform sampling of [-1, 1]^D. Coordinate i of draw t is a pure function
/// of (seed, t, i), so sparse objectives never need full vectors.
RunReport random_search(const RunConfig& config, const Objective& objective);

/// Dispatches on config.mode.
RunReport run(const RunConfig& config, const Objective& objective, std::size_t threads = 1);

inline constexpr const char* kTraceHeader = "cumulative_evals,best_value,best_gap,sub_run,step,ell,U,C";

void write_trace_csv(std::ostream& out, const RunReport& report);
/// Sidecar text: config echo, seed, wall time and evaluation failures.
void write_report_meta(std::ostream& out, const RunReport& report);

std::string describe(const RunConfig& config);
const char* to_string(Mode mode);
const char* to_string(KernelVariant variant);

}  // namespace rembo
