#include "rembo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Cholesky>

namespace rembo {

void Dataset::add(Eigen::VectorXd x, double f) {
  if (!points.empty() && x.size() != points.front().size()) {
    throw std::invalid_argument("Dataset: point dimension mismatch");
  }
  points.push_back(std::move(x));
  values.push_back(f);
}

void Dataset::validate() const {
  if (points.size() != values.size()) throw std::invalid_argument("Dataset: |points| != |values|");
  for (const auto& p : points) {
    if (p.size() != points.front().size()) throw std::invalid_argument("Dataset: point dimension mismatch");
  }
}

std::vector<double> jitter_ladder(double jitter) {
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be >= 0");
  std::vector<double> ladder{jitter};
  double next = std::max(kJitterFloor, jitter * 10.0);
  if (jitter < kJitterFloor) next = kJitterFloor;
  while (next <= kJitterCeiling * (1.0 + 1e-12)) {
    if (next > ladder.back()) ladder.push_back(next);
    next *= 10.0;
  }
  return ladder;
}

namespace {

Eigen::MatrixXd feature_matrix(const Dataset& data, const KernelSpec& kernel) {
  const auto first = kernel.features(data.points.front());
  Eigen::MatrixXd F(static_cast<Eigen::Index>(data.size()), first.size());
  F.row(0) = first.transpose();
  for (std::size_t i = 1; i < data.size(); ++i) {
    F.row(static_cast<Eigen::Index>(i)) = kernel.features(data.points[i]).transpose();
  }
  return F;
}

/// Pairwise S with K = exp(-S / (2 ell^2)) for the scalar-length families.
Eigen::MatrixXd pairwise_scale_free(const Eigen::MatrixXd& F, KernelVariant variant) {
  const Eigen::Index t = F.rows();
  Eigen::MatrixXd S(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    S(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      double v;
      if (variant == KernelVariant::CategoricalHamming) {
        const double h = static_cast<double>((F.row(i).array() != F.row(j).array()).count());
        v = h * h;
      } else {
        v = (F.row(i) - F.row(j)).squaredNorm();
      }
      S(i, j) = S(j, i) = v;
    }
  }
  return S;
}

Eigen::MatrixXd gram_from_scale_free(const Eigen::MatrixXd& S, double ell) {
  return (-S.array() / (2.0 * ell * ell)).exp().matrix();
}

Eigen::MatrixXd gram_from_features(const Eigen::MatrixXd& F, const KernelSpec& kernel) {
  if (kernel.variant() != KernelVariant::SkewSE) {
    return gram_from_scale_free(pairwise_scale_free(F, kernel.variant()), kernel.length_scale());
  }
  const Eigen::Index t = F.rows();
  Eigen::MatrixXd K(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const Eigen::VectorXd fi = F.row(i).transpose();
    K(i, i) = kernel.between(fi, fi);
    for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i) = kernel.between(fi, F.row(j).transpose());
  }
  return K;
}

struct Factorization {
  Eigen::MatrixXd L;
  double jitter;
};

Factorization factorize(const Eigen::MatrixXd& K, double jitter) {
  const auto ladder = jitter_ladder(jitter);
  Eigen::MatrixXd Kj(K.rows(), K.cols());
  for (double j : ladder) {
    Kj = K;
    Kj.diagonal().array() += j;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(Kj);
    if (llt.info() == Eigen::Success) {
      Kj.triangularView<Eigen::StrictlyUpper>().setZero();
      if (Kj.allFinite() && (Kj.diagonal().array() > 0.0).all()) return {std::move(Kj), j};
    }
  }
  throw NumericalError("GP: Cholesky factorization failed for every jitter level", ladder);
}

Eigen::VectorXd values_vector(const Dataset& data) {
  return Eigen::Map<const Eigen::VectorXd>(data.values.data(), static_cast<Eigen::Index>(data.values.size()));
}

void check_fit_inputs(const Dataset& data, double jitter) {
  data.validate();
  if (data.empty()) throw std::invalid_argument("GP: dataset must be nonempty");
  if (!(jitter >= 0.0)) throw std::invalid_argument("GP: jitter must be >= 0");
}

}  // namespace

Eigen::MatrixXd gram_matrix(const Dataset& data, const KernelSpec& kernel) {
  check_fit_inputs(data, 0.0);
  return gram_from_features(feature_matrix(data, kernel), kernel);
}

GpModel GpModel::fit(const Dataset& data, const KernelSpec& kernel, double jitter) {
  check_fit_inputs(data, jitter);
  GpModel model(kernel);
  model.input_dim_ = static_cast<std::size_t>(data.points.front().size());
  model.features_ = feature_matrix(data, kernel);
  auto fac = factorize(gram_from_features(model.features_, kernel), jitter);
  model.L_ = std::move(fac.L);
  model.jitter_ = fac.jitter;
  const Eigen::VectorXd w = model.L_.triangularView<Eigen::Lower>().solve(values_vector(data));
  model.alpha_ = model.L_.transpose().triangularView<Eigen::Upper>().solve(w);
  return model;
}

Prediction GpModel::predict(const Eigen::VectorXd& query) const {
  if (static_cast<std::size_t>(query.size()) != input_dim_) {
    throw std::invalid_argument("GP predict: query dimension " + std::to_string(query.size()) + ", expected " +
                                std::to_string(input_dim_));
  }
  const Eigen::VectorXd fq = kernel_.features(query);
  const Eigen::Index t = features_.rows();
  Eigen::VectorXd kstar(t);
  if (kernel_.variant() == KernelVariant::LowDimSE || kernel_.variant() == KernelVariant::HighDimProjectedSE) {
    const double ell = kernel_.length_scale();
    const Eigen::VectorXd sq = (features_.rowwise() - fq.transpose()).rowwise().squaredNorm();
    kstar = (-sq.array() / (2.0 * ell * ell)).exp().matrix();
  } else {
    for (Eigen::Index i = 0; i < t; ++i) kstar(i) = kernel_.between(features_.row(i).transpose(), fq);
  }
  Prediction p;
  p.mean = kstar.dot(alpha_);
  const Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(kstar);
  p.raw_variance = kernel_.between(fq, fq) - v.squaredNorm();
  p.variance = std::max(0.0, p.raw_variance);
  return p;
}

namespace {

double lml_from_gram(const Eigen::MatrixXd& K, const Eigen::VectorXd& f, double jitter) {
  const auto fac = factorize(K, jitter);
  const Eigen::VectorXd w = fac.L.triangularView<Eigen::Lower>().solve(f);
  const double log_det = 2.0 * fac.L.diagonal().array().log().sum();
  const double t = static_cast<double>(f.size());
  return -0.5 * w.squaredNorm() - 0.5 * log_det - 0.5 * t * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double log_marginal_likelihood(const Dataset& data, const KernelSpec& kernel, double jitter) {
  check_fit_inputs(data, jitter);
  return lml_from_gram(gram_matrix(data, kernel), values_vector(data), jitter);
}

LengthScaleLikelihood::LengthScaleLikelihood(const Dataset& data, const KernelSpec& family, double jitter)
    : jitter_(jitter) {
  check_fit_inputs(data, jitter);
  if (family.variant() == KernelVariant::SkewSE) {
    throw std::invalid_argument("LengthScaleLikelihood: skew SE kernel has no scalar length scale");
  }
  S_ = pairwise_scale_free(feature_matrix(data, family), family.variant());
  f_ = values_vector(data);
}

double LengthScaleLikelihood::operator()(double ell) const {
  const LengthScale checked(ell);
  return lml_from_gram(gram_from_scale_free(S_, checked.value()), f_, jitter_);
}

}  // namespace rembo
