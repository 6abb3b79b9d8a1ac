#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rembo/embedding.hpp"

namespace rembo {

enum class Sense { Minimize, Maximize };

/// A point of R^D that may carry only some coordinates. Dense points store
/// all D values with an empty index list.
struct Point {
  std::size_t dim = 0;
  std::vector<std::size_t> index;
  Eigen::VectorXd value;

  static Point dense(Eigen::VectorXd x) {
    Point p;
    p.dim = static_cast<std::size_t>(x.size());
    p.value = std::move(x);
    return p;
  }
  static Point sparse(std::size_t dim, std::vector<std::size_t> idx, Eigen::VectorXd vals) {
    if (idx.size() != static_cast<std::size_t>(vals.size())) throw std::invalid_argument("Point: index/value mismatch");
    return Point{dim, std::move(idx), std::move(vals)};
  }

  bool is_dense() const { return index.empty() && static_cast<std::size_t>(value.size()) == dim; }
  /// Coordinate i; throws std::out_of_range if a sparse point lacks it.
  double at(std::size_t i) const;
};

/// Raised by objectives whose evaluation did not produce a value.
class EvaluationFailure : public std::runtime_error {
 public:
  enum class Kind { Spawn, Timeout, NonzeroExit, Unparseable, Other };
  EvaluationFailure(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* to_string(EvaluationFailure::Kind kind);

/// Black-box objective over a box in R^D (default [-1, 1]^D).
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dimension() const = 0;
  virtual Sense sense() const { return Sense::Minimize; }
  /// Optimal value, used to report optimality gaps.
  virtual std::optional<double> known_optimum() const { return std::nullopt; }
  /// Coordinates evaluate() reads; nullopt means all of them.
  virtual std::optional<std::vector<std::size_t>> support() const { return std::nullopt; }
  /// Present for discrete objectives: inputs are decoded to categories first.
  virtual std::optional<CategoricalTable> categories() const { return std::nullopt; }

  virtual double evaluate(const Point& x) const = 0;
  /// Discrete objectives override this; the default throws.
  virtual double evaluate_discrete(std::span<const int> categories) const;

  /// Distance to the known optimum in the objective's own sense (>= 0 up to rounding).
  std::optional<double> gap(double value) const;
};

}  // namespace rembo
