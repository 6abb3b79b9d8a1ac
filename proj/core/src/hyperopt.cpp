#include "rembo/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rembo/inner_opt.hpp"

namespace rembo {

void HyperState::validate() const {
  if (!(lower > 0.0) || !(lower <= upper)) throw std::invalid_argument("HyperState: need 0 < lower <= upper");
  if (ell < lower || ell > upper) throw std::invalid_argument("HyperState: ell outside [lower, upper]");
  if (exploit_count < 0 || exploit_count > kExploitLimit) throw std::invalid_argument("HyperState: counter out of range");
  if (!(t_sigma > 0.0)) throw std::invalid_argument("HyperState: t_sigma must be > 0");
}

HyperState observe_proposal(HyperState state, double proposal_std) {
  if (proposal_std < state.t_sigma) {
    state.exploit_count = std::min(state.exploit_count + 1, kExploitLimit);
  } else {
    state.exploit_count = 0;
  }
  return state;
}

double fit_length_scale(const Dataset& data, const KernelSpec& family, double jitter, double lower, double upper) {
  if (!(lower > 0.0) || !(lower <= upper)) throw std::invalid_argument("fit_length_scale: need 0 < lower <= upper");
  if (lower == upper) return lower;
  const LengthScaleLikelihood likelihood(data, family, jitter);
  const auto score = [&](const Eigen::VectorXd& log_ell) {
    const double ell = std::clamp(std::exp(log_ell(0)), lower, upper);
    try {
      const double v = likelihood(ell);
      return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  Box box(Eigen::VectorXd::Constant(1, std::log(lower)), Eigen::VectorXd::Constant(1, std::log(upper)));
  InnerOptBudget budget;
  budget.max_evals = kRetuneEvals;
  const auto best = direct_maximize(score, box, budget);
  return std::clamp(std::exp(best.point(0)), lower, upper);
}

HyperState maybe_retune(HyperState state, const Dataset& data, const KernelSpec& family, double jitter) {
  if (data.empty()) throw std::invalid_argument("maybe_retune: dataset must be nonempty");
  const bool exploit = state.exploit_count >= kExploitLimit;
  if (state.iter % kRetunePeriod == 0 || exploit) {
    if (exploit) {
      state.upper = std::max(kUpperShrink * state.ell, state.lower);
      state.exploit_count = 0;
    }
    state.ell = fit_length_scale(data, family, jitter, state.lower, state.upper);
  }
  ++state.iter;
  return state;
}

}  // namespace rembo
