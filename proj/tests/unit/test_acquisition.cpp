#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rembo/acquisition.hpp"

using namespace rembo;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

// Mean -|x - peak|^2 with constant variance: EI is maximized exactly at peak.
class BowlSurrogate final : public Surrogate {
 public:
  explicit BowlSurrogate(Eigen::VectorXd peak) : peak_(std::move(peak)) {}
  Prediction predict(const Eigen::VectorXd& q) const override {
    const double m = -(q - peak_).squaredNorm();
    return {m, 0.01, 0.01};
  }
  std::size_t input_dim() const override { return static_cast<std::size_t>(peak_.size()); }

 private:
  Eigen::VectorXd peak_;
};

Incumbent best_of(const Dataset& data) {
  Incumbent inc{data.points[0], data.values[0]};
  for (std::size_t i = 1; i < data.size(); ++i) {
    if (data.values[i] > inc.value) inc = {data.points[i], data.values[i]};
  }
  return inc;
}

}  // namespace

TEST(ExpectedImprovement, SpecExamples) {
  EXPECT_EQ(expected_improvement(0.7, 0.0, 0.7), 0.0);
  EXPECT_NEAR(expected_improvement(0.7, 1.0, 0.7), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(expected_improvement(1.7, 0.0, 0.7), 1.0, 1e-12);
}

TEST(ExpectedImprovement, FarBelowIncumbentMatchesMonteCarlo) {
  const double ei = expected_improvement(-2.0, 1.0, 0.0);
  const auto mc = oracle::expected_improvement(-2.0, 1.0, 0.0, 10'000'000, 11);
  EXPECT_LE(std::abs(ei - mc.estimate), 3.0 * mc.standard_error);
}

TEST(ExpectedImprovement, RandomTriplesMatchMonteCarlo) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> mu_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> var_dist(0.01, 4.0);
  for (int i = 0; i < 20; ++i) {
    const double mu = mu_dist(rng);
    const double var = var_dist(rng);
    const double inc = mu_dist(rng);
    const auto mc = oracle::expected_improvement(mu, var, inc, 1'000'000, 100 + static_cast<std::uint64_t>(i));
    EXPECT_LE(std::abs(expected_improvement(mu, var, inc) - mc.estimate), 4.0 * mc.standard_error)
        << "mu=" << mu << " var=" << var << " inc=" << inc;
  }
}

TEST(ExpectedImprovement, MonotoneInMeanAndVanishesFarBelow) {
  double prev = 0.0;
  for (double mu = -10.0; mu <= 3.0; mu += 0.25) {
    const double ei = expected_improvement(mu, 0.5, 0.0);
    EXPECT_GE(ei, 0.0);
    EXPECT_GT(ei, prev);
    prev = ei;
  }
  EXPECT_LT(expected_improvement(-40.0, 1.0, 0.0), 1e-300);
  EXPECT_THROW(expected_improvement(0.0, -1e-3, 0.0), std::invalid_argument);
}

TEST(ExpectedImprovement, ZeroAtNoiselessTrainingPoints) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset data;
  for (int i = 0; i < 6; ++i) data.add(vec({u(rng), u(rng)}), u(rng));
  const auto gp = GpModel::fit(data, KernelSpec::low_dim_se(LengthScale(0.3)), 0.0);
  const double inc = best_of(data).value;
  for (const auto& x : data.points) {
    const auto p = gp.predict(x);
    EXPECT_NEAR(expected_improvement(p.mean, p.variance, inc), 0.0, 1e-8);
  }
}

TEST(Ucb, SpecExamples) {
  EXPECT_DOUBLE_EQ(ucb(1.0, 0.0, 4.0), 1.0);
  EXPECT_DOUBLE_EQ(ucb(0.0, 1.0, 4.0), 2.0);
  EXPECT_DOUBLE_EQ(ucb(-1.0, 0.25, 1.0), -0.5);
  EXPECT_THROW(ucb(0.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(AcquisitionSpec::upper_confidence_bound(-1.0), std::invalid_argument);
}

TEST(NormalFunctions, TailsAreAccurate) {
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
  // Reference values of the standard normal CDF.
  EXPECT_NEAR(normal_cdf(-10.0) / 7.619853024160527e-24, 1.0, 1e-12);
  EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
}

TEST(MaximizeAcquisition, AvoidsTheOnlyObservedPoint) {
  Dataset data;
  data.add(vec({0.0, 0.0}), 0.0);
  const auto gp = GpModel::fit(data, KernelSpec::low_dim_se(LengthScale(0.5)), 0.0);
  const Box box = Box::cube(2, -1.0, 1.0);
  const auto res = maximize_acquisition(gp, AcquisitionSpec::expected_improvement(), box, best_of(data),
                                        InnerOptBudget{400}, 1);
  EXPECT_TRUE(box.contains(res.point));
  EXPECT_GT(res.point.norm(), 1e-3);
  EXPECT_GT(res.value, 0.0);
}

TEST(MaximizeAcquisition, FindsAnalyticMaximizer) {
  const Eigen::VectorXd peak = vec({0.37, -0.61});
  const BowlSurrogate bowl(peak);
  const Box box = Box::cube(2, -1.0, 1.0);
  const auto res = maximize_acquisition(bowl, AcquisitionSpec::expected_improvement(), box,
                                        Incumbent{vec({0.0, 0.0}), -0.5}, InnerOptBudget{2000}, 3);
  EXPECT_LT((res.point - peak).norm(), 1e-3);
}

TEST(MaximizeAcquisition, ReportsTheBetterOfBothOptimizers) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    Dataset data;
    for (int i = 0; i < 8; ++i) data.add(vec({u(rng), u(rng)}), u(rng));
    const auto gp = GpModel::fit(data, KernelSpec::low_dim_se(LengthScale(0.4)), 1e-6);
    const auto res = maximize_acquisition(gp, AcquisitionSpec::expected_improvement(), Box::cube(2, -1.0, 1.0),
                                          best_of(data), InnerOptBudget{600}, static_cast<std::uint64_t>(rep));
    EXPECT_EQ(res.value, std::max(res.direct.value, res.cmaes.value));
    EXPECT_LE(res.direct.evals, 300u);
    EXPECT_LE(res.cmaes.evals, 300u);
  }
}

TEST(MaximizeAcquisition, BetterOfPrefersDirectOnTies) {
  InnerOptResult a{vec({0.0}), 1.0, 1};
  InnerOptResult b{vec({1.0}), 1.0, 1};
  EXPECT_EQ(&better_of(a, b), &a);
  b.value = 2.0;
  EXPECT_EQ(&better_of(a, b), &b);
}

TEST(MaximizeAcquisition, DominatesUniformSample) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& spec : {AcquisitionSpec::expected_improvement(), AcquisitionSpec::upper_confidence_bound(4.0)}) {
    Dataset data;
    for (int i = 0; i < 10; ++i) data.add(vec({u(rng), u(rng)}), std::sin(3.0 * data.size()));
    const auto gp = GpModel::fit(data, KernelSpec::low_dim_se(LengthScale(0.3)), 1e-6);
    const Incumbent inc = best_of(data);
    const auto res = maximize_acquisition(gp, spec, Box::cube(2, -1.0, 1.0), inc, InnerOptBudget{1000}, 7);
    for (int i = 0; i < 1024; ++i) {
      const double sampled = acquisition_value(spec, gp.predict(vec({u(rng), u(rng)})), inc.value);
      EXPECT_GE(res.value, sampled);
    }
  }
}

TEST(MaximizeAcquisition, NegatedObjectiveGivesMirroredArgmax) {
  // A minimization surface g and its mirror h(x) = g(-x) posed as maximization
  // of -h. After the sense adapter both GPs see the same values at mirrored
  // points, so the proposals must mirror each other.
  const auto g = [](const Eigen::VectorXd& x) { return (x - vec({0.4, 0.1})).squaredNorm(); };
  const std::vector<Eigen::VectorXd> pts = {vec({0.0, 0.0}), vec({0.5, 0.5}), vec({-0.5, 0.2}), vec({0.3, -0.6})};
  Dataset minimized;
  Dataset mirrored;
  for (const auto& p : pts) {
    minimized.add(p, -g(p));
    mirrored.add(-p, -g(p));
  }
  const auto k = KernelSpec::low_dim_se(LengthScale(0.5));
  const Box box = Box::cube(2, -1.0, 1.0);
  const auto a = maximize_acquisition(GpModel::fit(minimized, k, 1e-6), AcquisitionSpec::expected_improvement(), box,
                                      best_of(minimized), InnerOptBudget{2000}, 5);
  const auto b = maximize_acquisition(GpModel::fit(mirrored, k, 1e-6), AcquisitionSpec::expected_improvement(), box,
                                      best_of(mirrored), InnerOptBudget{2000}, 5);
  EXPECT_NEAR(a.value, b.value, 1e-6);
  EXPECT_LT((a.point + b.point).norm(), 1e-2);
}

TEST(MaximizeAcquisition, RejectsDomainMismatch) {
  const BowlSurrogate bowl(vec({0.0, 0.0}));
  EXPECT_THROW(maximize_acquisition(bowl, {}, Box::cube(3, -1.0, 1.0), Incumbent{vec({0.0, 0.0}), 0.0},
                                    InnerOptBudget{100}, 0),
               std::invalid_argument);
}
