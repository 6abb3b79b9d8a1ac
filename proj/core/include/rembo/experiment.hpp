#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rembo/driver.hpp"
#include "rembo/objectives.hpp"

namespace rembo {

/// Configuration problem anchored to a line of the source file (0 = whole file).
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string source, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr int kConfigVersion = 1;

/// Everything a `run` or `compare` invocation needs.
///
/// Text format: one `key = value` per line, `#` starts a comment, and the
/// first setting must be `version = 1`. `d`, `k` and `modes` take
/// comma-separated lists.
struct ExperimentConfig {
  ObjectiveSpec objective;
  /// The objective seed is derived per replication unless set explicitly.
  bool objective_seed_fixed = false;
  /// BraninRotated: identity rotation when true.
  bool identity_rotation = false;
  RunConfig run;
  std::vector<Mode> modes;
  std::vector<std::size_t> d_values;
  std::vector<std::size_t> k_values;
  std::size_t replications = 1;
  std::filesystem::path output_dir = "rembo-out";
  std::uint64_t global_seed = 0;
};

ExperimentConfig parse_config(std::istream& in, const std::string& source_name = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Objective of replication r. Every mode and sweep cell of a replication
/// sees the same objective, so comparisons are paired.
ObjectiveSpec objective_for(const ExperimentConfig& config, std::size_t replication);
/// Run seed of replication r.
std::uint64_t run_seed_for(const ExperimentConfig& config, std::size_t replication);

struct AggregateRow {
  std::size_t eval_index = 0;
  double mean_gap = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  std::size_t n = 0;
};

inline constexpr const char* kAggregateHeader = "eval_index,mean_gap,q25,q50,q75,n";

/// Per evaluation index: mean and quartiles over the replications that have
/// a gap at that index.
std::vector<AggregateRow> aggregate_gaps(const std::vector<std::vector<std::optional<double>>>& traces);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path);
/// best_gap column of a trace CSV.
std::vector<std::optional<double>> read_trace_gaps(const std::filesystem::path& path);

struct CellResult {
  std::string name;
  RunConfig run;
  std::vector<std::vector<std::optional<double>>> gap_traces;  // successful replications only
  std::vector<std::optional<double>> final_gaps;               // one per replication, nullopt on failure
  std::vector<std::string> errors;
  std::vector<AggregateRow> aggregate;

  std::vector<double> successful_final_gaps() const;
};

struct ExperimentOutcome {
  std::vector<CellResult> cells;
  std::size_t failed_replications = 0;
};

/// `run`: one cell per (d, k) combination of config.run.mode. Writes
/// <output>/<cell>/rep_NNN.csv (+ .meta), <output>/<cell>/aggregate.csv and,
/// for sweeps, <output>/summary.csv and <output>/summary.txt.
ExperimentOutcome run_experiment(const ExperimentConfig& config, std::size_t jobs);

/// `compare`: one cell per listed mode (at least two). Writes the cell files,
/// <output>/aggregate_<mode>.csv and <output>/ranking.csv.
ExperimentOutcome compare_modes(const ExperimentConfig& config, std::size_t jobs);

struct VerifyResult {
  std::size_t aggregates_checked = 0;
  std::vector<std::string> mismatches;
  bool ok() const { return aggregates_checked > 0 && mismatches.empty(); }
};

/// Recomputes every <cell>/aggregate.csv under `dir` from the rep_*.csv files
/// beside it and compares within `tolerance`.
VerifyResult verify_aggregates(const std::filesystem::path& dir, double tolerance = 1e-12);

/// Writes `content` to a sibling temporary file and renames it into place,
/// creating missing parent directories.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

Mode parse_mode(const std::string& text);

}  // namespace rembo
