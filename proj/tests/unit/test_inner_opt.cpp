#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rembo/inner_opt.hpp"

using namespace rembo;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x(i++) = e;
  return x;
}

const Box kBraninBox(vec({-5.0, 0.0}), vec({10.0, 15.0}));
const double kBraninOpt = oracle::branin(std::numbers::pi, 2.275);

double neg_branin(const Eigen::VectorXd& x) { return -oracle::branin(x(0), x(1)); }

// Wraps an objective and records every point it is asked about.
struct Recorder {
  ScalarObjective inner;
  std::vector<Eigen::VectorXd> seen;
  std::vector<double> values;

  ScalarObjective fn() {
    return [this](const Eigen::VectorXd& x) {
      seen.push_back(x);
      values.push_back(inner(x));
      return values.back();
    };
  }
};

}  // namespace

TEST(Direct, SamplesTheCenterFirst) {
  Recorder rec{[](const Eigen::VectorXd& x) { return -(x - vec({0.5, 0.5})).squaredNorm(); }, {}, {}};
  const auto res = direct_maximize(rec.fn(), Box::cube(2, 0.0, 1.0), InnerOptBudget{50});
  ASSERT_FALSE(rec.seen.empty());
  EXPECT_EQ(rec.seen.front(), vec({0.5, 0.5}));
  EXPECT_EQ(res.value, 0.0);
  EXPECT_EQ(res.point, vec({0.5, 0.5}));
}

TEST(Direct, SolvesBranin) {
  const auto res = direct_maximize(neg_branin, kBraninBox, InnerOptBudget{2000});
  EXPECT_LT(-res.value - kBraninOpt, 1e-3);
  EXPECT_LE(res.evals, 2000u);
}

TEST(Direct, FindsSineMaximum) {
  const auto res =
      direct_maximize([](const Eigen::VectorXd& x) { return std::sin(x(0)); }, Box::cube(1, 0.0, std::numbers::pi),
                      InnerOptBudget{100});
  EXPECT_NEAR(res.point(0), std::numbers::pi / 2.0, 1e-2);
}

TEST(Direct, IsDeterministic) {
  const auto a = direct_maximize(neg_branin, kBraninBox, InnerOptBudget{500});
  const auto b = direct_maximize(neg_branin, kBraninBox, InnerOptBudget{500});
  EXPECT_EQ(a.point, b.point);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.evals, b.evals);
}

TEST(Cmaes, SolvesSphere) {
  const auto res = cmaes_maximize([](const Eigen::VectorXd& x) { return -x.squaredNorm(); }, Box::cube(5, -1.0, 1.0),
                                  InnerOptBudget{5000}, 1);
  EXPECT_GE(res.value, -1e-6);
}

TEST(Cmaes, SolvesBraninInTheMedian) {
  std::vector<double> gaps;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    gaps.push_back(-cmaes_maximize(neg_branin, kBraninBox, InnerOptBudget{3000}, seed).value - kBraninOpt);
  }
  std::nth_element(gaps.begin(), gaps.begin() + 5, gaps.end());
  EXPECT_LT(gaps[5], 1e-3);
}

TEST(Cmaes, SameSeedSameTrajectory) {
  Recorder a{neg_branin, {}, {}};
  Recorder b{neg_branin, {}, {}};
  cmaes_maximize(a.fn(), kBraninBox, InnerOptBudget{400}, 9);
  cmaes_maximize(b.fn(), kBraninBox, InnerOptBudget{400}, 9);
  ASSERT_EQ(a.seen.size(), b.seen.size());
  for (std::size_t i = 0; i < a.seen.size(); ++i) EXPECT_EQ(a.seen[i], b.seen[i]);
}

class BothOptimizers : public ::testing::TestWithParam<bool> {
 protected:
  InnerOptResult run(const ScalarObjective& f, const Box& box, std::size_t evals) {
    return GetParam() ? cmaes_maximize(f, box, InnerOptBudget{evals}, 4) : direct_maximize(f, box, InnerOptBudget{evals});
  }
};

TEST_P(BothOptimizers, OnlyEvaluatesInsideTheBox) {
  // Optimum in a corner pushes CMA-ES samples against the boundary.
  const Box box(vec({-1.0, 2.0, 0.0}), vec({0.5, 3.0, 0.1}));
  Recorder rec{[](const Eigen::VectorXd& x) { return x.sum(); }, {}, {}};
  run(rec.fn(), box, 800);
  for (const auto& x : rec.seen) EXPECT_TRUE(box.contains(x));
}

TEST_P(BothOptimizers, RespectsBudgetExactly) {
  for (std::size_t evals : {4u, 17u, 250u}) {
    Recorder rec{neg_branin, {}, {}};
    const auto res = run(rec.fn(), kBraninBox, evals);
    EXPECT_LE(rec.seen.size(), evals);
    EXPECT_EQ(res.evals, rec.seen.size());
  }
}

TEST_P(BothOptimizers, ReportsTheBestEvaluatedPoint) {
  Recorder rec{[](const Eigen::VectorXd& x) { return std::sin(5.0 * x(0)) * std::cos(3.0 * x(1)); }, {}, {}};
  const auto res = run(rec.fn(), Box::cube(2, -1.0, 1.0), 300);
  const auto best = std::max_element(rec.values.begin(), rec.values.end());
  EXPECT_EQ(res.value, *best);
  EXPECT_EQ(res.point, rec.seen[static_cast<std::size_t>(best - rec.values.begin())]);
}

INSTANTIATE_TEST_SUITE_P(DirectAndCmaes, BothOptimizers, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Cmaes" : "Direct"; });

TEST(InnerOptBudget, RejectsTooFewEvaluations) {
  EXPECT_THROW(InnerOptBudget{2}.validate(2), std::invalid_argument);
  EXPECT_NO_THROW(InnerOptBudget{3}.validate(2));
}
