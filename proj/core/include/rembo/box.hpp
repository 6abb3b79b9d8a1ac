#pragma once

#include <cstddef>
#include <stdexcept>

#include <Eigen/Core>

namespace rembo {

/// Axis-aligned box [lower, upper] in R^n.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  static Box cube(std::size_t n, double lo, double hi) {
    return Box(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), lo),
               Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), hi));
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd width() const { return upper - lower; }

  bool contains(const Eigen::VectorXd& x) const {
    if (x.size() != lower.size()) return false;
    return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

  void validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("Box: lower/upper dimension mismatch");
    if (lower.size() == 0) throw std::invalid_argument("Box: empty dimension");
    if (!(lower.array() < upper.array()).all()) throw std::invalid_argument("Box: lower must be < upper");
  }
};

}  // namespace rembo
