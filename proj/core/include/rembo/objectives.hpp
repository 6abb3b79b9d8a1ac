#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rembo/objective.hpp"

namespace rembo {

/// Branin function on its native domain u in [-5, 10], v in [0, 15].
double branin(double u, double v);

/// Global minimum of Branin, attained at (-pi, 12.275), (pi, 2.275) and
/// (9.42478, 2.475).
inline constexpr double kBraninMinimum = 0.39788735772973816;

/// Affine map of [-1, 1] onto [lo, hi].
double rescale_unit(double x, double lo, double hi);

/// How to launch an external program for one evaluation.
struct CommandDescriptor {
  std::string program;
  /// argv templates. An argument containing `{i}` or `{v}` is repeated once
  /// per parameter with the index and value substituted; other arguments are
  /// passed through unchanged.
  std::vector<std::string> args;
  double timeout_seconds = 10.0;
  std::size_t max_concurrent = 4;
};

struct ObjectiveSpec {
  enum class Id { BraninEmbedded, BraninRotated, SyntheticCategorical, ExternalCommand };
  Id id = Id::BraninEmbedded;
  std::size_t D = 25;
  std::uint64_t seed = 0;
  /// Hidden effective coordinates; filled from `seed` when empty.
  std::vector<std::size_t> effective_dims;
  /// Rotation draw for BraninRotated; nullopt means R = I.
  std::optional<std::uint64_t> rotation_seed;
  std::optional<CommandDescriptor> command;
  /// For ExternalCommand: discrete parameter space, if any.
  std::optional<CategoricalTable> categories;
  Sense sense = Sense::Minimize;
  std::optional<double> known_optimum;
};

/// f(x) = branin(x_i, x_j) after rescaling [-1, 1] onto Branin's box; every
/// other coordinate is ignored.
class EmbeddedBranin final : public Objective {
 public:
  EmbeddedBranin(std::size_t D, std::uint64_t seed);
  EmbeddedBranin(std::size_t D, std::size_t i, std::size_t j);

  std::size_t dimension() const override { return D_; }
  std::optional<double> known_optimum() const override { return kBraninMinimum; }
  std::optional<std::vector<std::size_t>> support() const override { return std::vector<std::size_t>{i_, j_}; }
  double evaluate(const Point& x) const override;

  std::size_t first_index() const { return i_; }
  std::size_t second_index() const { return j_; }
  /// Value from the two effective coordinates in [-1, 1].
  double from_effective(double xi, double xj) const;

 private:
  std::size_t D_;
  std::size_t i_;
  std::size_t j_;
};

/// x -> EmbeddedBranin(R x) for a seeded random orthogonal R.
class RotatedBranin final : public Objective {
 public:
  static constexpr std::size_t kMaxDim = 1000;

  RotatedBranin(std::size_t D, std::uint64_t seed, std::optional<std::uint64_t> rotation_seed);

  std::size_t dimension() const override { return base_.dimension(); }
  std::optional<double> known_optimum() const override { return kBraninMinimum; }
  double evaluate(const Point& x) const override;

  const Eigen::MatrixXd& rotation() const { return R_; }
  const EmbeddedBranin& base() const { return base_; }

 private:
  EmbeddedBranin base_;
  Eigen::MatrixXd R_;
};

/// Seeded orthogonal matrix: QR of a Gaussian matrix with R's diagonal made positive.
Eigen::MatrixXd random_rotation(std::size_t n, std::uint64_t seed);

/// Stand-in for a solver-configuration problem: 40 binary and 7 seven-valued
/// parameters, of which 5 matter (2 binary, 3 seven-valued).
///
/// cost = sum of per-parameter table entries over the effective parameters
///        + 0.1 * pairwise interaction table entries.
/// The optimum is found by enumeration at construction.
class SyntheticCategorical final : public Objective {
 public:
  static constexpr std::size_t kBinary = 40;
  static constexpr std::size_t kSevenValued = 7;
  static constexpr int kValues = 7;
  static constexpr double kInteraction = 0.1;

  explicit SyntheticCategorical(std::uint64_t seed);

  std::size_t dimension() const override { return kBinary + kSevenValued; }
  std::optional<double> known_optimum() const override { return optimum_; }
  std::optional<CategoricalTable> categories() const override { return table_; }
  double evaluate(const Point& x) const override;
  double evaluate_discrete(std::span<const int> categories) const override;

  const std::vector<std::size_t>& effective_dims() const { return effective_; }
  const std::vector<int>& optimal_assignment() const { return best_assignment_; }

 private:
  double cost_of_effective(std::span<const int> effective_values) const;

  CategoricalTable table_;
  std::vector<std::size_t> effective_;
  std::vector<std::vector<double>> unary_;
  // pairwise_[a][b] is a counts[a] x counts[b] table (a < b), row-major.
  std::vector<std::vector<std::vector<double>>> pairwise_;
  double optimum_ = 0.0;
  std::vector<int> best_assignment_;
};

/// Runs an external program per evaluation and parses the last numeric line
/// of its stdout.
class ExternalCommand final : public Objective {
 public:
  ExternalCommand(std::size_t D, CommandDescriptor command, std::optional<CategoricalTable> categories = std::nullopt,
                  Sense sense = Sense::Minimize, std::optional<double> known_optimum = std::nullopt);

  std::size_t dimension() const override { return D_; }
  Sense sense() const override { return sense_; }
  std::optional<double> known_optimum() const override { return optimum_; }
  std::optional<CategoricalTable> categories() const override { return categories_; }
  double evaluate(const Point& x) const override;
  double evaluate_discrete(std::span<const int> categories) const override;

  /// argv (excluding the program) for a parameter vector already formatted as strings.
  std::vector<std::string> render_args(const std::vector<std::string>& values) const;

 private:
  double run(const std::vector<std::string>& values) const;

  std::size_t D_;
  CommandDescriptor command_;
  std::optional<CategoricalTable> categories_;
  Sense sense_;
  std::optional<double> optimum_;
  std::shared_ptr<std::counting_semaphore<>> slots_;
};

/// Parses the last line of `text` that is a complete floating-point number.
std::optional<double> parse_last_number(const std::string& text);

std::unique_ptr<Objective> make_objective(const ObjectiveSpec& spec);

}  // namespace rembo
