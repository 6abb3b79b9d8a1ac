#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace rembo {

/// f(x) = base(Phi^T x) for an orthonormal D x d_e basis Phi; f is constant
/// along the orthogonal complement of span(Phi).
struct EffectiveSubspaceInstance {
  std::size_t D = 0;
  std::size_t d_e = 0;
  Eigen::MatrixXd basis;
  std::function<double(const Eigen::VectorXd&)> base_function;
  /// Maximizer of base_function, in basis coordinates.
  Eigen::VectorXd optimizer_in_T;

  double operator()(const Eigen::VectorXd& x) const { return base_function(basis.transpose() * x); }
  void validate() const;

  /// Random orthonormal basis, base = -|z - z*|^2 with z* ~ N(0, I).
  static EffectiveSubspaceInstance random(std::size_t D, std::size_t d_e, std::uint64_t seed);
  /// Basis of coordinate vectors e_i for i in `dims`, same quadratic base.
  static EffectiveSubspaceInstance axis_aligned(std::size_t D, const std::vector<std::size_t>& dims,
                                                Eigen::VectorXd optimizer);
};

struct TheoremCheckReport {
  std::size_t trials = 0;
  std::size_t successes = 0;
  std::size_t degenerate = 0;
  /// check_theorem1: the tolerance factor. check_theorem2: the minimum passing frequency.
  double bound = 0.0;
  bool verdict = false;

  double frequency() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
};

/// Optional override for the random matrix of each trial (adversarial cases).
using MatrixDraw = std::function<Eigen::MatrixXd(std::size_t trial)>;

/// Per trial: draw A ~ N(0,1)^{D x d} and x ~ N(0, I_D), solve
/// (Phi^T A) y = Phi^T x by least squares, and check
/// |f(x) - f(A y)| <= 1e-6 (1 + |f(x)|). A rank-deficient Phi^T A counts as
/// degenerate. The verdict holds iff no trial fails.
TheoremCheckReport check_theorem1(const EffectiveSubspaceInstance& instance, std::size_t d, std::size_t trials,
                                  std::uint64_t seed, const MatrixDraw& draw = {});

/// Per trial: draw A, take the d_e x d_e block B of A on the effective rows
/// and first d_e columns, solve B y = x*, and succeed iff
/// |y| <= sqrt(d_e) / epsilon * |x*|. Singular B fails. The verdict holds iff
/// the success frequency is >= 1 - eps - 3 sqrt(eps (1 - eps) / trials).
TheoremCheckReport check_theorem2(const EffectiveSubspaceInstance& instance, std::size_t d, double epsilon,
                                  std::size_t trials, std::uint64_t seed);

struct RegretProbeOptions {
  std::size_t D = 10;
  /// Fixed length scale of the REMBO run.
  double ell = 0.25;
  std::size_t inner_evals = 600;
  std::uint64_t seed = 0;
  /// Function on the d effective coordinates, maximized. Defaults to a fixed
  /// three-bump SE expansion.
  std::function<double(const Eigen::VectorXd&)> base;
};

struct RegretProbeResult {
  /// Least-squares slope of log(median regret) against log t over the second
  /// half of the run; nullopt when fewer than two usable points remain.
  std::optional<double> slope;
  std::vector<double> median_regret;
  /// Points of the tail window dropped because the median regret was 0.
  std::size_t excluded = 0;
  std::vector<std::optional<double>> seed_slopes;
};

/// The default probe function: a finite SE kernel expansion in d variables.
double probe_function(const Eigen::VectorXd& z);

/// Runs REMBO (EI, fixed ell, entries of A scaled by 1/sqrt(d)) on a function
/// of the first d of D coordinates and fits the decay of simple regret,
/// measured against the best value reachable through each run's embedding.
RegretProbeResult regret_decay_probe(std::size_t d, std::size_t seeds, std::size_t budget,
                                     const RegretProbeOptions& options = {});

}  // namespace rembo
