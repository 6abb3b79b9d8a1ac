#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>

#include <Eigen/Core>

#include "rembo/embedding.hpp"

namespace rembo {

/// Positive length scale of a squared exponential kernel.
class LengthScale {
 public:
  explicit LengthScale(double ell) : ell_(ell) {
    if (!(ell > 0.0) || !std::isfinite(ell)) throw std::invalid_argument("LengthScale must be finite and > 0");
  }
  double value() const { return ell_; }

 private:
  double ell_;
};

enum class KernelVariant { LowDimSE, HighDimProjectedSE, CategoricalHamming, SkewSE };

/// k(y1, y2) = exp(-|y1 - y2|^2 / (2 ell^2)).
double k_se(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, LengthScale ell);

/// SE kernel between the projected images p_X(A y1) and p_X(A y2).
double k_se_highdim(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, const Embedding& emb, LengthScale ell);

/// Number of coordinates where x1 and x2 differ.
std::size_t hamming(std::span<const int> x1, std::span<const int> x2);

/// k = exp(-(lambda / 2) h^2) with h the Hamming distance between s(A y1) and s(A y2).
double k_categorical(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, const Embedding& emb, double lambda);

/// Skew SE kernel exp(-(x1 - x2)^T Lambda^{-1} (x1 - x2)). Note the missing 1/2:
/// Lambda = 2 ell^2 I reproduces k_se with length scale ell.
double k_skew_se(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const Eigen::MatrixXd& Lambda);

/// A fully parameterized covariance function.
///
/// GP code works with features: the kernel is evaluated as
/// `between(features(a), features(b))`, so expensive maps (projection through
/// A, categorical decoding) run once per input rather than once per pair.
class KernelSpec {
 public:
  static KernelSpec low_dim_se(LengthScale ell);
  static KernelSpec high_dim_projected_se(std::shared_ptr<const Embedding> emb, LengthScale ell);
  static KernelSpec categorical(std::shared_ptr<const Embedding> emb, double lambda);
  static KernelSpec skew_se(Eigen::MatrixXd Lambda);

  KernelVariant variant() const { return variant_; }

  /// Length scale of the SE variants; for the categorical kernel the
  /// equivalent ell = 1 / sqrt(lambda).
  double length_scale() const;
  /// Same family with a new length scale (lambda = 1 / ell^2 for categorical).
  KernelSpec with_length_scale(double ell) const;

  double lambda() const { return lambda_; }
  const Eigen::MatrixXd& skew_matrix() const { return Lambda_; }
  const std::shared_ptr<const Embedding>& embedding() const { return emb_; }

  Eigen::VectorXd features(const Eigen::VectorXd& input) const;
  double between(const Eigen::VectorXd& fa, const Eigen::VectorXd& fb) const;
  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return between(features(a), features(b));
  }

 private:
  KernelSpec() = default;

  KernelVariant variant_ = KernelVariant::LowDimSE;
  double ell_ = 1.0;
  double lambda_ = 1.0;
  Eigen::MatrixXd Lambda_;
  Eigen::MatrixXd Lambda_inv_;
  std::shared_ptr<const Embedding> emb_;
};

}  // namespace rembo
