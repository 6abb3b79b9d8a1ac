#pragma once

// Reference computations that share no code with the library: explicit
// matrix inverses instead of Cholesky solves, textbook formulas written out
// directly, and plain Monte-Carlo.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double se(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double ell) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) sq += (a(i) - b(i)) * (a(i) - b(i));
  return std::exp(-sq / (2.0 * ell * ell));
}

struct Gaussian1 {
  double mean;
  double variance;
};

/// Condition the joint Gaussian of (f(x_1..x_t), f(q)) on the observed values
/// using an explicit inverse of the training block.
inline Gaussian1 condition(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& fs,
                           const Eigen::VectorXd& q, double ell, double jitter) {
  const auto t = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd joint(t + 1, t + 1);
  for (Eigen::Index i = 0; i <= t; ++i) {
    for (Eigen::Index j = 0; j <= t; ++j) {
      const Eigen::VectorXd& a = i < t ? xs[static_cast<std::size_t>(i)] : q;
      const Eigen::VectorXd& b = j < t ? xs[static_cast<std::size_t>(j)] : q;
      joint(i, j) = se(a, b, ell);
    }
  }
  Eigen::MatrixXd K = joint.topLeftCorner(t, t);
  K.diagonal().array() += jitter;
  const Eigen::MatrixXd Kinv = K.inverse();
  const Eigen::VectorXd kq = joint.topRightCorner(t, 1);
  Eigen::VectorXd f(t);
  for (Eigen::Index i = 0; i < t; ++i) f(i) = fs[static_cast<std::size_t>(i)];
  return {kq.dot(Kinv * f), joint(t, t) - kq.dot(Kinv * kq)};
}

/// log N(f; 0, K + jitter I) from a dense inverse and determinant.
inline double log_likelihood(const std::vector<Eigen::VectorXd>& xs, const std::vector<double>& fs, double ell,
                             double jitter) {
  const auto t = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd K(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) K(i, j) = se(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)], ell);
  }
  K.diagonal().array() += jitter;
  Eigen::VectorXd f(t);
  for (Eigen::Index i = 0; i < t; ++i) f(i) = fs[static_cast<std::size_t>(i)];
  return -0.5 * f.dot(K.inverse() * f) - 0.5 * std::log(K.determinant()) -
         0.5 * static_cast<double>(t) * std::log(2.0 * std::numbers::pi);
}

struct MonteCarlo {
  double estimate;
  double standard_error;
};

/// E[max(0, F - incumbent)], F ~ N(mu, var), from `draws` samples.
inline MonteCarlo expected_improvement(double mu, double var, double incumbent, std::size_t draws,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mu, std::sqrt(var));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double g = std::max(0.0, normal(rng) - incumbent);
    sum += g;
    sum_sq += g * g;
  }
  const double n = static_cast<double>(draws);
  const double m = sum / n;
  const double var_g = std::max(0.0, sum_sq / n - m * m);
  return {m, std::sqrt(var_g / n)};
}

/// Branin written out term by term on its native domain.
inline double branin(double u, double v) {
  const double pi = std::numbers::pi;
  const double a = 1.0;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double r = 6.0;
  const double s = 10.0;
  const double t = 1.0 / (8.0 * pi);
  return a * std::pow(v - b * u * u + c * u - r, 2) + s * (1.0 - t) * std::cos(u) + s;
}

}  // namespace oracle
