#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rembo/inner_opt.hpp"
#include "rembo/random.hpp"

namespace rembo {

namespace {

constexpr int kMaxResample = 100;
constexpr double kInitialSigma = 0.3;
constexpr std::size_t kStagnationGenerations = 10;

// Minimizes g = -objective in unit-cube coordinates.
class Cmaes {
 public:
  Cmaes(const ScalarObjective& f, const Box& box, const InnerOptBudget& budget, std::uint64_t seed)
      : f_(f), box_(box), budget_(budget), n_(box.dim()), rng_(seed) {
    const double n = static_cast<double>(n_);
    lambda_ = 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(n)));
    mu_ = lambda_ / 2;
    weights_.resize(static_cast<Eigen::Index>(mu_));
    for (std::size_t i = 0; i < mu_; ++i) {
      weights_(static_cast<Eigen::Index>(i)) = std::log(static_cast<double>(mu_) + 0.5) - std::log(i + 1.0);
    }
    weights_ /= weights_.sum();
    mueff_ = 1.0 / weights_.squaredNorm();
    cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
    ds_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
    cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
    c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
    cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
    chin_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  }

  InnerOptResult run() {
    restart();
    std::size_t generation = 0;
    while (evals_ < budget_.max_evals && generation < budget_.max_iters) {
      ++generation;
      if (!generation_step()) break;
    }
    return {best_point_, -best_value_, evals_};
  }

 private:
  void restart() {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    mean_.resize(static_cast<Eigen::Index>(n_));
    for (Eigen::Index i = 0; i < mean_.size(); ++i) mean_(i) = unif(rng_);
    sigma_ = kInitialSigma;
    C_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    B_ = C_;
    Dvec_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_));
    pc_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    ps_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    history_.clear();
  }

  Eigen::VectorXd draw_z() {
    Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(rng_);
    return z;
  }

  bool inside(const Eigen::VectorXd& u) const { return (u.array() >= 0.0).all() && (u.array() <= 1.0).all(); }

  double evaluate(const Eigen::VectorXd& u) {
    const Eigen::VectorXd x = box_.clamp(box_.lower + u.cwiseProduct(box_.width()));
    const double fx = f_(x);
    ++evals_;
    const double g = std::isnan(fx) ? std::numeric_limits<double>::infinity() : -fx;
    if (evals_ == 1 || g < best_value_) {
      best_value_ = g;
      best_point_ = x;
    }
    return g;
  }

  // Returns false once the evaluation budget is exhausted.
  bool generation_step() {
    struct Sample {
      Eigen::VectorXd u, y;
      double g;
    };
    std::vector<Sample> pop;
    pop.reserve(lambda_);
    const Eigen::MatrixXd BD = B_ * Dvec_.asDiagonal();
    for (std::size_t k = 0; k < lambda_; ++k) {
      if (evals_ >= budget_.max_evals) return false;
      Eigen::VectorXd y = BD * draw_z();
      Eigen::VectorXd u = mean_ + sigma_ * y;
      for (int tries = 0; tries < kMaxResample && !inside(u); ++tries) {
        y = BD * draw_z();
        u = mean_ + sigma_ * y;
      }
      if (!inside(u)) {
        u = u.cwiseMax(0.0).cwiseMin(1.0);
        y = (u - mean_) / sigma_;
      }
      const double g = evaluate(u);
      pop.push_back({std::move(u), std::move(y), g});
    }
    std::stable_sort(pop.begin(), pop.end(), [](const Sample& a, const Sample& b) { return a.g < b.g; });

    const Eigen::VectorXd old_mean = mean_;
    Eigen::VectorXd ymean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < mu_; ++i) ymean += weights_(static_cast<Eigen::Index>(i)) * pop[i].y;
    mean_ = old_mean + sigma_ * ymean;

    const Eigen::VectorXd invsqrt_y = B_ * Dvec_.cwiseInverse().asDiagonal() * B_.transpose() * ymean;
    ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * invsqrt_y;
    const double gen = static_cast<double>(++generations_since_restart_);
    const double ps_norm = ps_.norm();
    const bool hsig =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs_, 2.0 * gen)) / chin_ < 1.4 + 2.0 / (static_cast<double>(n_) + 1.0);
    pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * ymean;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < mu_; ++i) {
      rank_mu += weights_(static_cast<Eigen::Index>(i)) * pop[i].y * pop[i].y.transpose();
    }
    const double delta_h = hsig ? 0.0 : cc_ * (2.0 - cc_);
    C_ = (1.0 - c1_ - cmu_) * C_ + c1_ * (pc_ * pc_.transpose() + delta_h * C_) + cmu_ * rank_mu;
    sigma_ *= std::exp((cs_ / ds_) * (ps_norm / chin_ - 1.0));

    history_.push_back(pop.front().g);
    if (degenerate(pop.back().g - pop.front().g)) {
      restart();
      generations_since_restart_ = 0;
    }
    return true;
  }

  bool degenerate(double spread) {
    if (!C_.allFinite() || !std::isfinite(sigma_) || !mean_.allFinite()) return true;
    C_ = 0.5 * (C_ + C_.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C_);
    if (eig.info() != Eigen::Success) return true;
    const Eigen::VectorXd ev = eig.eigenvalues();
    if (ev.minCoeff() <= 0.0 || ev.maxCoeff() / ev.minCoeff() > 1e14) return true;
    B_ = eig.eigenvectors();
    Dvec_ = ev.cwiseSqrt();
    if (sigma_ * Dvec_.maxCoeff() < 1e-13) return true;
    if (std::isfinite(spread) && spread <= budget_.tol && history_.size() >= kStagnationGenerations) return true;
    if (history_.size() >= kStagnationGenerations) {
      const auto tail = history_.end() - static_cast<std::ptrdiff_t>(kStagnationGenerations);
      const auto [lo, hi] = std::minmax_element(tail, history_.end());
      if (std::isfinite(*hi - *lo) && *hi - *lo <= budget_.tol) return true;
    }
    return false;
  }

  const ScalarObjective& f_;
  const Box& box_;
  InnerOptBudget budget_;
  std::size_t n_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};

  std::size_t lambda_ = 0;
  std::size_t mu_ = 0;
  Eigen::VectorXd weights_;
  double mueff_ = 0, cs_ = 0, ds_ = 0, cc_ = 0, c1_ = 0, cmu_ = 0, chin_ = 0;

  Eigen::VectorXd mean_, pc_, ps_, Dvec_;
  Eigen::MatrixXd C_, B_;
  double sigma_ = kInitialSigma;
  std::size_t generations_since_restart_ = 0;
  std::vector<double> history_;

  std::size_t evals_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_point_;
};

}  // namespace

InnerOptResult cmaes_maximize(const ScalarObjective& objective, const Box& box, const InnerOptBudget& budget,
                              std::uint64_t seed) {
  box.validate();
  budget.validate(box.dim());
  return Cmaes(objective, box, budget, seed).run();
}

}  // namespace rembo
