#include "rembo/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "rembo/driver.hpp"
#include "rembo/inner_opt.hpp"
#include "rembo/objective.hpp"
#include "rembo/random.hpp"
#include "rembo/stats.hpp"

namespace rembo {

namespace {

constexpr std::uint64_t kMatrixStream = 11;
constexpr std::uint64_t kPointStream = 12;

Eigen::MatrixXd gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t key) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      M(r, c) = counter_normal(key, static_cast<std::uint64_t>(r * M.cols() + c));
    }
  }
  return M;
}

std::function<double(const Eigen::VectorXd&)> negative_squared_distance(Eigen::VectorXd center) {
  return [center = std::move(center)](const Eigen::VectorXd& z) { return -(z - center).squaredNorm(); };
}

Eigen::MatrixXd trial_matrix(const EffectiveSubspaceInstance& inst, std::size_t d, std::uint64_t seed,
                             std::size_t trial, const MatrixDraw& draw) {
  if (draw) {
    Eigen::MatrixXd A = draw(trial);
    if (static_cast<std::size_t>(A.rows()) != inst.D || static_cast<std::size_t>(A.cols()) != d) {
      throw std::invalid_argument("injected matrix must be D x d");
    }
    return A;
  }
  return gaussian_matrix(inst.D, d, derive_seed(derive_seed(seed, kMatrixStream), trial));
}

}  // namespace

void EffectiveSubspaceInstance::validate() const {
  if (d_e < 1 || d_e > D) throw std::invalid_argument("instance: need 1 <= d_e <= D");
  if (static_cast<std::size_t>(basis.rows()) != D || static_cast<std::size_t>(basis.cols()) != d_e) {
    throw std::invalid_argument("instance: basis must be D x d_e");
  }
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  if ((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("instance: basis columns must be orthonormal");
  }
  if (static_cast<std::size_t>(optimizer_in_T.size()) != d_e) throw std::invalid_argument("instance: optimizer size");
  if (!base_function) throw std::invalid_argument("instance: base function missing");
}

EffectiveSubspaceInstance EffectiveSubspaceInstance::random(std::size_t D, std::size_t d_e, std::uint64_t seed) {
  if (d_e < 1 || d_e > D) throw std::invalid_argument("instance: need 1 <= d_e <= D");
  EffectiveSubspaceInstance inst;
  inst.D = D;
  inst.d_e = d_e;
  const Eigen::MatrixXd G = gaussian_matrix(D, d_e, derive_seed(seed, 1));
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  inst.basis = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(d_e));
  inst.optimizer_in_T = gaussian_matrix(d_e, 1, derive_seed(seed, 2)).col(0);
  inst.base_function = negative_squared_distance(inst.optimizer_in_T);
  return inst;
}

EffectiveSubspaceInstance EffectiveSubspaceInstance::axis_aligned(std::size_t D, const std::vector<std::size_t>& dims,
                                                                  Eigen::VectorXd optimizer) {
  if (dims.empty() || dims.size() > D) throw std::invalid_argument("instance: need 1 <= |dims| <= D");
  if (static_cast<std::size_t>(optimizer.size()) != dims.size()) {
    throw std::invalid_argument("instance: optimizer must have one entry per effective dim");
  }
  EffectiveSubspaceInstance inst;
  inst.D = D;
  inst.d_e = dims.size();
  inst.basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t c = 0; c < dims.size(); ++c) {
    if (dims[c] >= D) throw std::invalid_argument("instance: effective dim out of range");
    for (std::size_t p = 0; p < c; ++p) {
      if (dims[p] == dims[c]) throw std::invalid_argument("instance: effective dims must be distinct");
    }
    inst.basis(static_cast<Eigen::Index>(dims[c]), static_cast<Eigen::Index>(c)) = 1.0;
  }
  inst.optimizer_in_T = std::move(optimizer);
  inst.base_function = negative_squared_distance(inst.optimizer_in_T);
  return inst;
}

TheoremCheckReport check_theorem1(const EffectiveSubspaceInstance& inst, std::size_t d, std::size_t trials,
                                  std::uint64_t seed, const MatrixDraw& draw) {
  inst.validate();
  if (d < inst.d_e) throw std::invalid_argument("check_theorem1: needs d >= d_e");
  if (d > inst.D) throw std::invalid_argument("check_theorem1: needs d <= D");
  constexpr double kTol = 1e-6;
  TheoremCheckReport rep;
  rep.trials = trials;
  rep.bound = kTol;
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::MatrixXd A = trial_matrix(inst, d, seed, t, draw);
    const Eigen::VectorXd x = gaussian_matrix(inst.D, 1, derive_seed(derive_seed(seed, kPointStream), t)).col(0);
    const Eigen::MatrixXd M = inst.basis.transpose() * A;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const Eigen::Index de = static_cast<Eigen::Index>(inst.d_e);
    if (s(0) <= 0.0 || s(de - 1) <= 1e-10 * s(0)) {
      ++rep.degenerate;
      continue;
    }
    const Eigen::VectorXd y = svd.solve(inst.basis.transpose() * x);
    const double fx = inst(x);
    const double fay = inst(A * y);
    if (std::abs(fx - fay) <= kTol * (1.0 + std::abs(fx))) ++rep.successes;
  }
  rep.verdict = rep.successes + rep.degenerate == rep.trials;
  return rep;
}

TheoremCheckReport check_theorem2(const EffectiveSubspaceInstance& inst, std::size_t d, double epsilon,
                                  std::size_t trials, std::uint64_t seed) {
  inst.validate();
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("check_theorem2: needs 0 < epsilon < 1");
  if (d < inst.d_e || d > inst.D) throw std::invalid_argument("check_theorem2: needs d_e <= d <= D");
  if (trials < 1) throw std::invalid_argument("check_theorem2: needs trials >= 1");
  // Effective coordinate of each basis column; the hypothesis requires e_i columns.
  std::vector<Eigen::Index> rows(inst.d_e);
  for (std::size_t c = 0; c < inst.d_e; ++c) {
    Eigen::Index r = 0;
    const double peak = inst.basis.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff(&r);
    if (std::abs(peak - 1.0) > 1e-12 || inst.basis.col(static_cast<Eigen::Index>(c)).cwiseAbs().sum() - 1.0 > 1e-12) {
      throw std::invalid_argument("check_theorem2: needs an axis-aligned effective subspace");
    }
    rows[c] = r;
  }
  const Eigen::Index de = static_cast<Eigen::Index>(inst.d_e);
  const Eigen::VectorXd target = inst.optimizer_in_T;
  const double radius = std::sqrt(static_cast<double>(inst.d_e)) / epsilon * target.norm();

  TheoremCheckReport rep;
  rep.trials = trials;
  const double n = static_cast<double>(trials);
  rep.bound = 1.0 - epsilon - 3.0 * std::sqrt(epsilon * (1.0 - epsilon) / n);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::MatrixXd A = trial_matrix(inst, d, seed, t, {});
    Eigen::MatrixXd B(de, de);
    for (Eigen::Index r = 0; r < de; ++r) B.row(r) = A.row(rows[static_cast<std::size_t>(r)]).head(de);
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) {
      ++rep.degenerate;
      continue;
    }
    const Eigen::VectorXd y = lu.solve(target);
    if (y.norm() <= radius) ++rep.successes;
  }
  rep.verdict = rep.frequency() >= rep.bound;
  return rep;
}

double probe_function(const Eigen::VectorXd& z) {
  struct Bump {
    double weight;
    double a;
    double b;
  };
  // Center of bump m is (a, b, a, b, ...).
  static constexpr Bump kBumps[] = {{1.0, 0.3, -0.2}, {0.6, -0.6, 0.5}, {0.4, 0.8, 0.8}};
  constexpr double kWidth = 0.3;
  double f = 0.0;
  for (const auto& bump : kBumps) {
    double sq = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double c = (i % 2 == 0) ? bump.a : bump.b;
      sq += (z(i) - c) * (z(i) - c);
    }
    f += bump.weight * std::exp(-sq / (2.0 * kWidth * kWidth));
  }
  return f;
}

namespace {

class ProbeObjective final : public Objective {
 public:
  ProbeObjective(std::size_t D, std::size_t d, std::function<double(const Eigen::VectorXd&)> base)
      : D_(D), d_(d), base_(std::move(base)) {}

  std::size_t dimension() const override { return D_; }
  Sense sense() const override { return Sense::Maximize; }
  std::optional<std::vector<std::size_t>> support() const override {
    std::vector<std::size_t> s(d_);
    for (std::size_t i = 0; i < d_; ++i) s[i] = i;
    return s;
  }
  double evaluate(const Point& x) const override {
    Eigen::VectorXd z(static_cast<Eigen::Index>(d_));
    for (std::size_t i = 0; i < d_; ++i) z(static_cast<Eigen::Index>(i)) = x.at(i);
    return base_(z);
  }

 private:
  std::size_t D_;
  std::size_t d_;
  std::function<double(const Eigen::VectorXd&)> base_;
};

/// sup over y in Y of f(p_X(A y)): grid scan, then CMA-ES polish near the best cell.
double reachable_supremum(const Embedding& emb, const Objective& obj) {
  const std::size_t d = emb.embedding_dim();
  const Box& Y = emb.y_box();
  const auto value = [&](const Eigen::VectorXd& y) { return obj.evaluate(embed_point(emb, y, obj)); };
  const std::size_t per_axis = d == 1 ? 20001 : std::max<std::size_t>(
      3, static_cast<std::size_t>(std::pow(4.0e5, 1.0 / static_cast<double>(d))));
  Eigen::VectorXd best_y = Y.center();
  double best = value(best_y);
  std::vector<std::size_t> idx(d, 0);
  Eigen::VectorXd y(static_cast<Eigen::Index>(d));
  while (true) {
    for (std::size_t c = 0; c < d; ++c) {
      const auto C = static_cast<Eigen::Index>(c);
      y(C) = Y.lower(C) + (Y.upper(C) - Y.lower(C)) * static_cast<double>(idx[c]) / static_cast<double>(per_axis - 1);
    }
    const double v = value(y);
    if (v > best) {
      best = v;
      best_y = y;
    }
    std::size_t pos = 0;
    while (pos < d && ++idx[pos] == per_axis) idx[pos++] = 0;
    if (pos == d) break;
  }
  const Eigen::VectorXd cell = Y.width() / static_cast<double>(per_axis - 1);
  const Box local((best_y - 2.0 * cell).cwiseMax(Y.lower), (best_y + 2.0 * cell).cwiseMin(Y.upper));
  InnerOptBudget budget;
  budget.max_evals = 4000;
  budget.tol = 0.0;
  const auto polished = cmaes_maximize(value, local, budget, 7);
  return std::max(best, polished.value);
}

std::optional<double> tail_slope(const std::vector<double>& regret, std::size_t* excluded) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t t = regret.size() / 2; t < regret.size(); ++t) {
    if (regret[t] > 0.0) {
      lx.push_back(std::log(static_cast<double>(t + 1)));
      ly.push_back(std::log(regret[t]));
    } else if (excluded) {
      ++*excluded;
    }
  }
  if (lx.size() < 2) return std::nullopt;
  return stats::ols_slope(lx, ly);
}

}  // namespace

RegretProbeResult regret_decay_probe(std::size_t d, std::size_t seeds, std::size_t budget,
                                     const RegretProbeOptions& opt) {
  if (d < 1 || d > opt.D) throw std::invalid_argument("regret probe needs 1 <= d <= D");
  if (seeds < 1 || budget < 2) throw std::invalid_argument("regret probe needs seeds >= 1 and budget >= 2");
  const ProbeObjective objective(opt.D, d, opt.base ? opt.base : probe_function);

  RunConfig cfg;
  cfg.mode = Mode::Rembo;
  cfg.d = d;
  cfg.kernel_variant = KernelVariant::LowDimSE;
  cfg.k_interleaved = 1;
  cfg.total_budget = budget;
  cfg.inner_evals = opt.inner_evals;
  cfg.hyper.ell = opt.ell;
  cfg.hyper.lower = std::min(cfg.hyper.lower, opt.ell);
  cfg.hyper.upper = std::max(cfg.hyper.upper, opt.ell);
  cfg.adapt_length_scale = false;
  cfg.embedding_scale = 1.0 / std::sqrt(static_cast<double>(d));

  RegretProbeResult res;
  std::vector<std::vector<double>> regrets;
  for (std::size_t s = 0; s < seeds; ++s) {
    cfg.seed = derive_seed(opt.seed, s);
    const RunReport rep = run_interleaved(cfg, objective);
    const OptimizerState st = init_state(cfg, objective, 0);
    double sup = reachable_supremum(*st.embedding, objective);
    for (const auto& row : rep.trace) {
      if (row.best_value) sup = std::max(sup, *row.best_value);
    }
    std::vector<double> r(budget);
    for (std::size_t t = 0; t < budget; ++t) {
      const auto& bv = rep.trace[t].best_value;
      r[t] = bv ? std::max(0.0, sup - *bv) : std::numeric_limits<double>::infinity();
    }
    res.seed_slopes.push_back(tail_slope(r, nullptr));
    regrets.push_back(std::move(r));
  }
  res.median_regret.resize(budget);
  for (std::size_t t = 0; t < budget; ++t) {
    std::vector<double> col;
    for (const auto& r : regrets) col.push_back(r[t]);
    res.median_regret[t] = stats::median(col);
  }
  res.slope = tail_slope(res.median_regret, &res.excluded);
  return res;
}

}  // namespace rembo
