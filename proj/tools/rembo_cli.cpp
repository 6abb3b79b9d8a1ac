// rembo: experiment runner and theorem checks.
//
//   rembo run --config configs/embedded_branin.cfg --jobs 4
//   rembo compare --config configs/compare_modes.cfg --output out/compare
//   rembo theory theorem1 --D 10 --de 2 --d 2 --trials 1000
//   rembo verify-aggregates --output out/compare

#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rembo/experiment.hpp"
#include "rembo/stats.hpp"
#include "rembo/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string output;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* opt = cmd->add_option("--config", f.config, "experiment configuration file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "global seed (overrides the config)");
  cmd->add_option("--jobs", f.jobs, "concurrent replications")->check(CLI::PositiveNumber);
  cmd->add_option("--output", f.output, "output directory (overrides the config)");
}

rembo::ExperimentConfig load(const CommonFlags& f) {
  auto cfg = rembo::load_config(f.config);
  if (f.seed) cfg.global_seed = *f.seed;
  if (!f.output.empty()) cfg.output_dir = f.output;
  return cfg;
}

int report_outcome(const rembo::ExperimentOutcome& out, const rembo::ExperimentConfig& cfg) {
  for (const auto& cell : out.cells) {
    const auto gaps = cell.successful_final_gaps();
    if (gaps.empty()) {
      fmt::print("{:<16} no successful replications\n", cell.name);
    } else {
      fmt::print("{:<16} n={:<3} final gap mean={:.6g} median={:.6g}\n", cell.name, gaps.size(),
                 rembo::stats::mean(gaps), rembo::stats::median(gaps));
    }
    for (const auto& e : cell.errors) fmt::print(stderr, "{}: replication failed: {}\n", cell.name, e);
  }
  fmt::print("outputs in {}\n", cfg.output_dir.string());
  return out.failed_replications == 0 ? kExitOk : kExitRuntime;
}

int print_check(const char* name, const rembo::TheoremCheckReport& r, bool frequency_bound) {
  fmt::print("{}: trials={} successes={} degenerate={} frequency={:.6f} {}={:.6g} verdict={}\n", name, r.trials,
             r.successes, r.degenerate, r.frequency(), frequency_bound ? "min_frequency" : "tolerance", r.bound,
             r.verdict ? "pass" : "fail");
  return r.verdict ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-embedding Bayesian optimization experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run one experiment (sweeps over d and k lists)");
  add_common(run_cmd, run_flags, true);

  CommonFlags cmp_flags;
  auto* cmp_cmd = app.add_subcommand("compare", "run every listed mode on paired replications");
  add_common(cmp_cmd, cmp_flags, true);

  CommonFlags ver_flags;
  auto* ver_cmd = app.add_subcommand("verify-aggregates", "recompute aggregate CSVs from replication CSVs");
  ver_cmd->add_option("--output", ver_flags.output, "experiment output directory")->required();

  std::string which;
  std::size_t D = 10;
  std::size_t de = 2;
  std::optional<std::size_t> d;
  std::size_t trials = 1000;
  double epsilon = 0.1;
  std::uint64_t theory_seed = 0;
  std::size_t seeds = 10;
  std::size_t budget = 40;
  double ell = 0.25;
  auto* th_cmd = app.add_subcommand("theory", "Monte-Carlo theorem checks and the regret-decay probe");
  th_cmd->add_option("check", which, "theorem1, theorem2 or regret")
      ->required()
      ->check(CLI::IsMember({"theorem1", "theorem2", "regret"}));
  th_cmd->add_option("--D", D, "extrinsic dimension")->check(CLI::PositiveNumber);
  th_cmd->add_option("--de", de, "effective dimension")->check(CLI::PositiveNumber);
  th_cmd->add_option("--d", d, "embedding dimension (default: de)")->check(CLI::PositiveNumber);
  th_cmd->add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  th_cmd->add_option("--epsilon", epsilon, "failure probability for theorem2")->check(CLI::Range(0.0, 1.0));
  th_cmd->add_option("--seed", theory_seed, "seed");
  th_cmd->add_option("--seeds", seeds, "regret: number of runs")->check(CLI::PositiveNumber);
  th_cmd->add_option("--budget", budget, "regret: evaluations per run")->check(CLI::Range(2, 100000));
  th_cmd->add_option("--ell", ell, "regret: fixed length scale")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run_cmd) {
      const auto cfg = load(run_flags);
      return report_outcome(rembo::run_experiment(cfg, run_flags.jobs), cfg);
    }
    if (*cmp_cmd) {
      const auto cfg = load(cmp_flags);
      const auto out = rembo::compare_modes(cfg, cmp_flags.jobs);
      const int rc = report_outcome(out, cfg);
      fmt::print("ranking written to {}\n", (cfg.output_dir / "ranking.csv").string());
      return rc;
    }
    if (*ver_cmd) {
      const auto res = rembo::verify_aggregates(ver_flags.output);
      for (const auto& m : res.mismatches) fmt::print(stderr, "mismatch: {}\n", m);
      fmt::print("checked {} aggregate file(s): {}\n", res.aggregates_checked, res.ok() ? "ok" : "FAILED");
      if (res.aggregates_checked == 0) return kExitValidation;
      return res.ok() ? kExitOk : kExitValidation;
    }
    if (*th_cmd) {
      const std::size_t dd = d.value_or(de);
      if (which == "regret") {
        rembo::RegretProbeOptions opt;
        opt.seed = theory_seed;
        opt.ell = ell;
        opt.D = std::max(D, dd);
        const auto res = rembo::regret_decay_probe(dd, seeds, budget, opt);
        fmt::print("regret probe: d={} seeds={} budget={} ell={} excluded={} slope={}\n", dd, seeds, budget, ell,
                   res.excluded, res.slope ? fmt::format("{:.4f}", *res.slope) : std::string("undefined"));
        return res.slope ? kExitOk : kExitRuntime;
      }
      if (dd < de) {
        fmt::print(stderr, "error: d ({}) must be >= de ({})\n", dd, de);
        return kExitValidation;
      }
      if (de > D || dd > D) {
        fmt::print(stderr, "error: de and d must not exceed D ({})\n", D);
        return kExitValidation;
      }
      if (which == "theorem1") {
        const auto inst = rembo::EffectiveSubspaceInstance::random(D, de, theory_seed);
        return print_check("theorem1", rembo::check_theorem1(inst, dd, trials, theory_seed), false);
      }
      if (!(epsilon > 0.0 && epsilon < 1.0)) {
        fmt::print(stderr, "error: epsilon must lie in (0, 1)\n");
        return kExitValidation;
      }
      std::vector<std::size_t> dims(de);
      for (std::size_t i = 0; i < de; ++i) dims[i] = i;
      const auto base = rembo::EffectiveSubspaceInstance::random(de, de, theory_seed);
      const auto inst = rembo::EffectiveSubspaceInstance::axis_aligned(D, dims, base.optimizer_in_T);
      return print_check("theorem2", rembo::check_theorem2(inst, dd, epsilon, trials, theory_seed), true);
    }
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "runtime failure: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}
