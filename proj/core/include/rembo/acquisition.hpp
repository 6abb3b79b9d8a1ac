#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "rembo/box.hpp"
#include "rembo/gp.hpp"
#include "rembo/inner_opt.hpp"

namespace rembo {

/// Best observed point x+ under maximization.
struct Incumbent {
  Eigen::VectorXd point;
  double value = 0.0;
};

struct AcquisitionSpec {
  enum class Variant { ExpectedImprovement, UCB };
  Variant variant = Variant::ExpectedImprovement;
  double ucb_beta = 4.0;

  static AcquisitionSpec expected_improvement() { return {}; }
  static AcquisitionSpec upper_confidence_bound(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("UCB beta must be > 0");
    return {Variant::UCB, beta};
  }
};

double normal_pdf(double z);
/// Standard normal CDF via erfc; accurate in both tails.
double normal_cdf(double z);

/// E[max(0, F - incumbent)] for F ~ N(mu, var).
double expected_improvement(double mu, double var, double incumbent_value);

/// mu + sqrt(beta) * sqrt(var).
double ucb(double mu, double var, double beta);

/// Acquisition value of a posterior prediction under `spec`.
double acquisition_value(const AcquisitionSpec& spec, const Prediction& p, double incumbent_value);

struct AcquisitionResult {
  Eigen::VectorXd point;
  double value = 0.0;
  InnerOptResult direct;
  InnerOptResult cmaes;
};

/// Maximizes the acquisition over `domain`, splitting `budget.max_evals`
/// evenly between DIRECT and CMA-ES and returning the better candidate.
AcquisitionResult maximize_acquisition(const Surrogate& model, const AcquisitionSpec& spec, const Box& domain,
                                       const Incumbent& incumbent, const InnerOptBudget& budget, std::uint64_t seed);

/// Reduction used by maximize_acquisition: the candidate with the larger
/// value, DIRECT on ties.
const InnerOptResult& better_of(const InnerOptResult& direct, const InnerOptResult& cmaes);

}  // namespace rembo
