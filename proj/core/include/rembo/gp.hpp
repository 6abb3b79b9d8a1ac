#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rembo/kernels.hpp"

namespace rembo {

/// Observation history D_t = {x_{1:t}, f_{1:t}}.
struct Dataset {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> values;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void add(Eigen::VectorXd x, double f);
  /// Throws std::invalid_argument when sizes or dimensions disagree.
  void validate() const;
};

struct Prediction {
  double mean = 0.0;
  /// Posterior variance clamped to >= 0.
  double variance = 0.0;
  /// Variance before clamping.
  double raw_variance = 0.0;
};

/// Anything that yields a Gaussian predictive distribution at a point.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual Prediction predict(const Eigen::VectorXd& query) const = 0;
  virtual std::size_t input_dim() const = 0;
};

/// Cholesky factorization failed at every jitter level tried.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::vector<double> ladder)
      : std::runtime_error(what), jitter_ladder(std::move(ladder)) {}
  std::vector<double> jitter_ladder;
};

/// Jitter escalation bounds: failures retry at 10x the previous jitter,
/// starting no lower than kJitterFloor, up to kJitterCeiling.
inline constexpr double kJitterFloor = 1e-6;
inline constexpr double kJitterCeiling = 1e-2;

/// The jitter levels fit() tries, in order, starting from `jitter`.
std::vector<double> jitter_ladder(double jitter);

/// Zero-mean GP posterior over a fixed dataset. Immutable once fitted.
class GpModel final : public Surrogate {
 public:
  static GpModel fit(const Dataset& data, const KernelSpec& kernel, double jitter);

  Prediction predict(const Eigen::VectorXd& query) const override;
  std::size_t input_dim() const override { return input_dim_; }

  const KernelSpec& kernel() const { return kernel_; }
  /// Jitter actually used (after any escalation).
  double jitter() const { return jitter_; }
  /// Lower-triangular L with L L^T = K + jitter I.
  const Eigen::MatrixXd& factor() const { return L_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  std::size_t size() const { return static_cast<std::size_t>(alpha_.size()); }

 private:
  GpModel(KernelSpec kernel) : kernel_(std::move(kernel)) {}

  KernelSpec kernel_;
  std::size_t input_dim_ = 0;
  double jitter_ = 0.0;
  Eigen::MatrixXd features_;  // one row per training input
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
};

/// Gram matrix K(x_{1:t}, x_{1:t}) without jitter.
Eigen::MatrixXd gram_matrix(const Dataset& data, const KernelSpec& kernel);

/// log p(f | x, kernel) = -1/2 f^T (K + jI)^{-1} f - 1/2 log det(K + jI) - t/2 log 2 pi.
/// Uses the same jitter ladder as fit().
double log_marginal_likelihood(const Dataset& data, const KernelSpec& kernel, double jitter);

/// log_marginal_likelihood of a fixed dataset as a function of the length
/// scale. For every family with a scalar length scale the Gram matrix is
/// exp(-S / (2 ell^2)) for a fixed pairwise matrix S (squared feature
/// distances, or squared Hamming distances), so S is computed once.
class LengthScaleLikelihood {
 public:
  LengthScaleLikelihood(const Dataset& data, const KernelSpec& family, double jitter);
  double operator()(double ell) const;

 private:
  Eigen::MatrixXd S_;
  Eigen::VectorXd f_;
  double jitter_;
};

}  // namespace rembo
