#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "rembo/box.hpp"

namespace rembo {

using ScalarObjective = std::function<double(const Eigen::VectorXd&)>;

struct InnerOptBudget {
  std::size_t max_evals = 1000;
  std::size_t max_iters = 100000;
  /// Stagnation tolerance in objective units (CMA-ES restarts when the
  /// generation spread falls below it).
  double tol = 1e-12;

  void validate(std::size_t dim) const;
};

struct InnerOptResult {
  Eigen::VectorXd point;
  double value = 0.0;
  std::size_t evals = 0;
};

/// DIRECT (dividing rectangles) maximizer. Deterministic; the first sample is
/// the box center. Potentially-optimal selection uses epsilon = 1e-4.
InnerOptResult direct_maximize(const ScalarObjective& objective, const Box& box, const InnerOptBudget& budget);

/// CMA-ES maximizer with restarts. Population 4 + floor(3 ln n), initial step
/// 0.3 of the box width, infeasible samples resampled up to 100 times then
/// clamped. Reproducible per seed.
InnerOptResult cmaes_maximize(const ScalarObjective& objective, const Box& box, const InnerOptBudget& budget,
                              std::uint64_t seed);

inline constexpr double kDirectEpsilon = 1e-4;

}  // namespace rembo
