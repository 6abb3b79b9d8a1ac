#include "rembo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

#include "rembo/random.hpp"

namespace rembo {

double Point::at(std::size_t i) const {
  if (i >= dim) throw std::out_of_range("Point: coordinate " + std::to_string(i) + " outside dimension");
  if (is_dense()) return value(static_cast<Eigen::Index>(i));
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] == i) return value(static_cast<Eigen::Index>(k));
  }
  throw std::out_of_range("Point: coordinate " + std::to_string(i) + " not materialized");
}

const char* to_string(EvaluationFailure::Kind kind) {
  switch (kind) {
    case EvaluationFailure::Kind::Spawn: return "spawn";
    case EvaluationFailure::Kind::Timeout: return "timeout";
    case EvaluationFailure::Kind::NonzeroExit: return "nonzero_exit";
    case EvaluationFailure::Kind::Unparseable: return "unparseable";
    case EvaluationFailure::Kind::Other: return "other";
  }
  return "other";
}

double Objective::evaluate_discrete(std::span<const int>) const {
  throw std::logic_error("objective has no discrete parameterization");
}

std::optional<double> Objective::gap(double value) const {
  const auto opt = known_optimum();
  if (!opt) return std::nullopt;
  return sense() == Sense::Minimize ? value - *opt : *opt - value;
}

double branin(double u, double v) {
  constexpr double pi = std::numbers::pi;
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double s = 10.0 * (1.0 - 1.0 / (8.0 * pi));
  const double q = v - b * u * u + c * u - 6.0;
  return q * q + s * std::cos(u) + 10.0;
}

double rescale_unit(double x, double lo, double hi) { return lo + (x + 1.0) * 0.5 * (hi - lo); }

namespace {

constexpr std::uint64_t kIndexStream = 1;
constexpr std::uint64_t kTableStream = 2;

std::pair<std::size_t, std::size_t> draw_pair(std::size_t D, std::uint64_t seed) {
  // First two entries of a uniformly random permutation of {0, ..., D-1}.
  Rng rng(derive_seed(seed, kIndexStream));
  std::uniform_int_distribution<std::size_t> first(0, D - 1);
  std::uniform_int_distribution<std::size_t> second(0, D - 2);
  const std::size_t i = first(rng);
  std::size_t j = second(rng);
  if (j >= i) ++j;
  return {i, j};
}

}  // namespace

EmbeddedBranin::EmbeddedBranin(std::size_t D, std::uint64_t seed) : D_(D) {
  if (D < 2) throw std::invalid_argument("embedded Branin needs D >= 2");
  std::tie(i_, j_) = draw_pair(D, seed);
}

EmbeddedBranin::EmbeddedBranin(std::size_t D, std::size_t i, std::size_t j) : D_(D), i_(i), j_(j) {
  if (D < 2) throw std::invalid_argument("embedded Branin needs D >= 2");
  if (i >= D || j >= D || i == j) throw std::invalid_argument("embedded Branin: indices must be distinct and < D");
}

double EmbeddedBranin::from_effective(double xi, double xj) const {
  return branin(rescale_unit(xi, -5.0, 10.0), rescale_unit(xj, 0.0, 15.0));
}

double EmbeddedBranin::evaluate(const Point& x) const {
  if (x.dim != D_) throw std::invalid_argument("embedded Branin: point dimension mismatch");
  return from_effective(x.at(i_), x.at(j_));
}

Eigen::MatrixXd random_rotation(std::size_t n, std::uint64_t seed) {
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd G(N, N);
  for (Eigen::Index r = 0; r < N; ++r) {
    for (Eigen::Index c = 0; c < N; ++c) G(r, c) = counter_normal(seed, static_cast<std::uint64_t>(r * N + c));
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(N, N);
  const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < N; ++c) {
    if (R(c, c) < 0.0) Q.col(c) = -Q.col(c);
  }
  return Q;
}

RotatedBranin::RotatedBranin(std::size_t D, std::uint64_t seed, std::optional<std::uint64_t> rotation_seed)
    : base_(D, seed) {
  if (D > kMaxDim) {
    throw std::invalid_argument("rotated Branin: D = " + std::to_string(D) + " exceeds the dense rotation cap of " +
                                std::to_string(kMaxDim));
  }
  R_ = rotation_seed ? random_rotation(D, *rotation_seed)
                     : Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
}

double RotatedBranin::evaluate(const Point& x) const {
  if (!x.is_dense() || x.dim != dimension()) throw std::invalid_argument("rotated Branin needs a dense D-vector");
  // Only two rows of R x are ever read.
  const auto i = static_cast<Eigen::Index>(base_.first_index());
  const auto j = static_cast<Eigen::Index>(base_.second_index());
  return base_.from_effective(R_.row(i).dot(x.value), R_.row(j).dot(x.value));
}

SyntheticCategorical::SyntheticCategorical(std::uint64_t seed) {
  table_.counts.assign(kBinary, 2);
  table_.counts.insert(table_.counts.end(), kSevenValued, kValues);

  Rng rng(derive_seed(seed, kTableStream));
  std::vector<std::size_t> binary(kBinary);
  std::vector<std::size_t> seven(kSevenValued);
  for (std::size_t i = 0; i < kBinary; ++i) binary[i] = i;
  for (std::size_t i = 0; i < kSevenValued; ++i) seven[i] = kBinary + i;
  std::shuffle(binary.begin(), binary.end(), rng);
  std::shuffle(seven.begin(), seven.end(), rng);
  effective_ = {binary[0], binary[1], seven[0], seven[1], seven[2]};
  std::sort(effective_.begin(), effective_.end());

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t m = effective_.size();
  unary_.resize(m);
  for (std::size_t a = 0; a < m; ++a) {
    unary_[a].resize(static_cast<std::size_t>(table_.counts[effective_[a]]));
    for (double& v : unary_[a]) v = unit(rng);
  }
  pairwise_.assign(m, std::vector<std::vector<double>>(m));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      auto& t = pairwise_[a][b];
      t.resize(static_cast<std::size_t>(table_.counts[effective_[a]] * table_.counts[effective_[b]]));
      for (double& v : t) v = unit(rng);
    }
  }

  // Exhaustive search over the effective parameters (2*2*7*7*7 = 1372 cells).
  std::vector<int> cur(m, 0);
  optimum_ = std::numeric_limits<double>::infinity();
  while (true) {
    const double c = cost_of_effective(cur);
    if (c < optimum_) {
      optimum_ = c;
      best_assignment_ = cur;
    }
    std::size_t pos = 0;
    while (pos < m && ++cur[pos] == table_.counts[effective_[pos]]) cur[pos++] = 0;
    if (pos == m) break;
  }
}

double SyntheticCategorical::cost_of_effective(std::span<const int> v) const {
  double c = 0.0;
  const std::size_t m = effective_.size();
  for (std::size_t a = 0; a < m; ++a) c += unary_[a][static_cast<std::size_t>(v[a])];
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const auto nb = static_cast<std::size_t>(table_.counts[effective_[b]]);
      c += kInteraction * pairwise_[a][b][static_cast<std::size_t>(v[a]) * nb + static_cast<std::size_t>(v[b])];
    }
  }
  return c;
}

double SyntheticCategorical::evaluate_discrete(std::span<const int> categories) const {
  if (categories.size() != dimension()) throw std::invalid_argument("synthetic categorical: expected 47 categories");
  std::vector<int> eff(effective_.size());
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] < 0 || categories[i] >= table_.counts[i]) {
      throw std::out_of_range("synthetic categorical: category " + std::to_string(categories[i]) +
                              " out of range for parameter " + std::to_string(i));
    }
  }
  for (std::size_t a = 0; a < effective_.size(); ++a) eff[a] = categories[effective_[a]];
  return cost_of_effective(eff);
}

double SyntheticCategorical::evaluate(const Point& x) const {
  if (x.dim != dimension()) throw std::invalid_argument("synthetic categorical: point dimension mismatch");
  std::vector<int> cats(dimension());
  for (std::size_t i = 0; i < cats.size(); ++i) cats[i] = decode_coordinate(x.at(i), table_.counts[i]);
  return evaluate_discrete(cats);
}

std::unique_ptr<Objective> make_objective(const ObjectiveSpec& spec) {
  switch (spec.id) {
    case ObjectiveSpec::Id::BraninEmbedded:
      if (spec.effective_dims.empty()) return std::make_unique<EmbeddedBranin>(spec.D, spec.seed);
      if (spec.effective_dims.size() != 2) throw std::invalid_argument("embedded Branin takes exactly 2 effective dims");
      return std::make_unique<EmbeddedBranin>(spec.D, spec.effective_dims[0], spec.effective_dims[1]);
    case ObjectiveSpec::Id::BraninRotated:
      if (!spec.effective_dims.empty()) throw std::invalid_argument("rotated Branin derives its indices from the seed");
      return std::make_unique<RotatedBranin>(spec.D, spec.seed, spec.rotation_seed);
    case ObjectiveSpec::Id::SyntheticCategorical:
      if (spec.D != SyntheticCategorical::kBinary + SyntheticCategorical::kSevenValued) {
        throw std::invalid_argument("synthetic categorical problem has D = 47");
      }
      return std::make_unique<SyntheticCategorical>(spec.seed);
    case ObjectiveSpec::Id::ExternalCommand:
      if (!spec.command) throw std::invalid_argument("external command objective needs a command");
      return std::make_unique<ExternalCommand>(spec.D, *spec.command, spec.categories, spec.sense, spec.known_optimum);
  }
  throw std::invalid_argument("unknown objective id");
}

}  // namespace rembo
