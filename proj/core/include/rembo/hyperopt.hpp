#pragma once

#include <cstddef>

#include "rembo/gp.hpp"
#include "rembo/kernels.hpp"

namespace rembo {

/// Adaptive length-scale controller state.
///
/// The controller counts consecutive proposals whose predictive standard
/// deviation falls below `t_sigma`. Every `kRetunePeriod` iterations, or
/// when that count reaches `kExploitLimit`, the length scale is re-fit by
/// maximizing the log marginal likelihood over [lower, upper]; an exploit
/// trigger first shrinks `upper` to max(0.9 ell, lower).
struct HyperState {
  double ell = 1.0;
  double lower = 0.01;
  double upper = 50.0;
  int exploit_count = 0;
  double t_sigma = 0.002;
  /// Index t of the current optimization iteration (1-based).
  std::size_t iter = 1;

  void validate() const;
};

inline constexpr std::size_t kRetunePeriod = 20;
inline constexpr int kExploitLimit = 5;
inline constexpr double kUpperShrink = 0.9;
inline constexpr std::size_t kRetuneEvals = 200;

/// Updates the exploitation counter from the predictive std-dev at the chosen
/// next query.
HyperState observe_proposal(HyperState state, double proposal_std);

/// Retunes when `iter` is a multiple of the period or the counter hit the
/// limit, then advances `iter`. `family` supplies everything but the length
/// scale. `jitter` is passed through to the likelihood.
HyperState maybe_retune(HyperState state, const Dataset& data, const KernelSpec& family, double jitter);

/// argmax over ell in [lower, upper] of the log marginal likelihood, searched
/// by DIRECT in log(ell). Likelihood failures score -inf.
double fit_length_scale(const Dataset& data, const KernelSpec& family, double jitter, double lower, double upper);

}  // namespace rembo
