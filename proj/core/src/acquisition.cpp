#include "rembo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rembo {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mu, double var, double incumbent_value) {
  if (var < 0.0) throw std::invalid_argument("expected_improvement: negative variance");
  const double improvement = mu - incumbent_value;
  if (var == 0.0) return std::max(0.0, improvement);
  const double sigma = std::sqrt(var);
  const double z = improvement / sigma;
  return std::max(0.0, improvement * normal_cdf(z) + sigma * normal_pdf(z));
}

double ucb(double mu, double var, double beta) {
  if (var < 0.0) throw std::invalid_argument("ucb: negative variance");
  if (!(beta > 0.0)) throw std::invalid_argument("ucb: beta must be > 0");
  return mu + std::sqrt(beta) * std::sqrt(var);
}

double acquisition_value(const AcquisitionSpec& spec, const Prediction& p, double incumbent_value) {
  switch (spec.variant) {
    case AcquisitionSpec::Variant::ExpectedImprovement:
      return expected_improvement(p.mean, p.variance, incumbent_value);
    case AcquisitionSpec::Variant::UCB:
      return ucb(p.mean, p.variance, spec.ucb_beta);
  }
  return 0.0;
}

const InnerOptResult& better_of(const InnerOptResult& direct, const InnerOptResult& cmaes) {
  if (std::isnan(direct.value)) return cmaes;
  if (std::isnan(cmaes.value)) return direct;
  return cmaes.value > direct.value ? cmaes : direct;
}

AcquisitionResult maximize_acquisition(const Surrogate& model, const AcquisitionSpec& spec, const Box& domain,
                                       const Incumbent& incumbent, const InnerOptBudget& budget, std::uint64_t seed) {
  domain.validate();
  if (domain.dim() != model.input_dim()) throw std::invalid_argument("maximize_acquisition: domain/model mismatch");
  const ScalarObjective acq = [&](const Eigen::VectorXd& x) {
    return acquisition_value(spec, model.predict(x), incumbent.value);
  };
  InnerOptBudget half = budget;
  half.max_evals = std::max(budget.max_evals / 2, domain.dim() + 1);

  AcquisitionResult out;
  out.direct = direct_maximize(acq, domain, half);
  out.cmaes = cmaes_maximize(acq, domain, half, seed);
  if (!std::isfinite(out.direct.value) && !std::isfinite(out.cmaes.value)) {
    throw std::runtime_error("maximize_acquisition: both DIRECT (value " + std::to_string(out.direct.value) +
                             ") and CMA-ES (value " + std::to_string(out.cmaes.value) + ") failed");
  }
  const auto& winner = better_of(out.direct, out.cmaes);
  out.point = winner.point;
  out.value = winner.value;
  return out;
}

}  // namespace rembo
