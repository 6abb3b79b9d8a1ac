#include "rembo/kernels.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

namespace rembo {

namespace {

void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
  }
}

double se_from_sqdist(double sq, double ell) { return std::exp(-sq / (2.0 * ell * ell)); }

double hamming_kernel(std::size_t h, double lambda) {
  const double hd = static_cast<double>(h);
  return std::exp(-0.5 * lambda * hd * hd);
}

Eigen::MatrixXd checked_spd_inverse(const Eigen::MatrixXd& Lambda) {
  if (Lambda.rows() != Lambda.cols() || Lambda.rows() == 0) {
    throw std::invalid_argument("skew SE: Lambda must be a non-empty square matrix");
  }
  if (!Lambda.isApprox(Lambda.transpose(), 1e-12)) throw std::invalid_argument("skew SE: Lambda must be symmetric");
  const Eigen::LLT<Eigen::MatrixXd> llt(Lambda);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("skew SE: Lambda must be positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(Lambda.rows(), Lambda.cols()));
}

void require_decode(const Embedding& emb) {
  if (!emb.decode_table()) throw std::invalid_argument("categorical kernel: embedding has no decoding table");
}

}  // namespace

double k_se(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, LengthScale ell) {
  require_same_size(y1.size(), y2.size(), "k_se");
  return se_from_sqdist((y1 - y2).squaredNorm(), ell.value());
}

double k_se_highdim(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, const Embedding& emb, LengthScale ell) {
  require_same_size(y1.size(), y2.size(), "k_se_highdim");
  return se_from_sqdist((emb.map_to_x(y1) - emb.map_to_x(y2)).squaredNorm(), ell.value());
}

std::size_t hamming(std::span<const int> x1, std::span<const int> x2) {
  if (x1.size() != x2.size()) throw std::invalid_argument("hamming: length mismatch");
  std::size_t h = 0;
  for (std::size_t i = 0; i < x1.size(); ++i) h += (x1[i] != x2[i]) ? 1 : 0;
  return h;
}

double k_categorical(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2, const Embedding& emb, double lambda) {
  require_decode(emb);
  require_same_size(y1.size(), y2.size(), "k_categorical");
  if (!(lambda > 0.0)) throw std::invalid_argument("k_categorical: lambda must be > 0");
  const auto a = emb.decode_from_y(y1);
  const auto b = emb.decode_from_y(y2);
  return hamming_kernel(hamming(a, b), lambda);
}

double k_skew_se(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, const Eigen::MatrixXd& Lambda) {
  require_same_size(x1.size(), x2.size(), "k_skew_se");
  require_same_size(x1.size(), Lambda.rows(), "k_skew_se");
  const Eigen::MatrixXd inv = checked_spd_inverse(Lambda);
  const Eigen::VectorXd delta = x1 - x2;
  return std::exp(-delta.dot(inv * delta));
}

KernelSpec KernelSpec::low_dim_se(LengthScale ell) {
  KernelSpec k;
  k.variant_ = KernelVariant::LowDimSE;
  k.ell_ = ell.value();
  return k;
}

KernelSpec KernelSpec::high_dim_projected_se(std::shared_ptr<const Embedding> emb, LengthScale ell) {
  if (!emb) throw std::invalid_argument("high-dimensional SE kernel requires an embedding");
  if (emb->storage() == Embedding::Storage::LazyRows) {
    throw std::invalid_argument("high-dimensional SE kernel needs a dense embedding (D too large)");
  }
  KernelSpec k;
  k.variant_ = KernelVariant::HighDimProjectedSE;
  k.ell_ = ell.value();
  k.emb_ = std::move(emb);
  return k;
}

KernelSpec KernelSpec::categorical(std::shared_ptr<const Embedding> emb, double lambda) {
  if (!emb) throw std::invalid_argument("categorical kernel requires an embedding");
  require_decode(*emb);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("categorical kernel: lambda must be > 0");
  KernelSpec k;
  k.variant_ = KernelVariant::CategoricalHamming;
  k.lambda_ = lambda;
  k.emb_ = std::move(emb);
  return k;
}

KernelSpec KernelSpec::skew_se(Eigen::MatrixXd Lambda) {
  KernelSpec k;
  k.variant_ = KernelVariant::SkewSE;
  k.Lambda_inv_ = checked_spd_inverse(Lambda);
  k.Lambda_ = std::move(Lambda);
  return k;
}

double KernelSpec::length_scale() const {
  switch (variant_) {
    case KernelVariant::LowDimSE:
    case KernelVariant::HighDimProjectedSE:
      return ell_;
    case KernelVariant::CategoricalHamming:
      return 1.0 / std::sqrt(lambda_);
    case KernelVariant::SkewSE:
      break;
  }
  throw std::logic_error("skew SE kernel has no scalar length scale");
}

KernelSpec KernelSpec::with_length_scale(double ell) const {
  const LengthScale checked(ell);
  KernelSpec k = *this;
  switch (variant_) {
    case KernelVariant::LowDimSE:
    case KernelVariant::HighDimProjectedSE:
      k.ell_ = checked.value();
      return k;
    case KernelVariant::CategoricalHamming:
      k.lambda_ = 1.0 / (checked.value() * checked.value());
      return k;
    case KernelVariant::SkewSE:
      break;
  }
  throw std::logic_error("skew SE kernel has no scalar length scale");
}

Eigen::VectorXd KernelSpec::features(const Eigen::VectorXd& input) const {
  switch (variant_) {
    case KernelVariant::LowDimSE:
    case KernelVariant::SkewSE:
      return input;
    case KernelVariant::HighDimProjectedSE:
      return emb_->map_to_x(input);
    case KernelVariant::CategoricalHamming: {
      const auto cats = emb_->decode_from_y(input);
      Eigen::VectorXd f(static_cast<Eigen::Index>(cats.size()));
      for (std::size_t i = 0; i < cats.size(); ++i) f(static_cast<Eigen::Index>(i)) = cats[i];
      return f;
    }
  }
  return input;
}

double KernelSpec::between(const Eigen::VectorXd& fa, const Eigen::VectorXd& fb) const {
  require_same_size(fa.size(), fb.size(), "kernel");
  switch (variant_) {
    case KernelVariant::LowDimSE:
    case KernelVariant::HighDimProjectedSE:
      return se_from_sqdist((fa - fb).squaredNorm(), ell_);
    case KernelVariant::CategoricalHamming:
      return hamming_kernel(static_cast<std::size_t>((fa.array() != fb.array()).count()), lambda_);
    case KernelVariant::SkewSE: {
      require_same_size(fa.size(), Lambda_.rows(), "skew SE kernel");
      const Eigen::VectorXd delta = fa - fb;
      return std::exp(-delta.dot(Lambda_inv_ * delta));
    }
  }
  return 0.0;
}

}  // namespace rembo
