#include "rembo/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "rembo/random.hpp"

namespace rembo {

void CategoricalTable::validate(std::size_t expected_dim) const {
  if (counts.size() != expected_dim) {
    throw std::invalid_argument("CategoricalTable: expected " + std::to_string(expected_dim) + " counts, got " +
                                std::to_string(counts.size()));
  }
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("CategoricalTable: every category count must be >= 1");
  }
}

int decode_coordinate(double x, int count) {
  const double clamped = std::clamp(x, -1.0, 1.0);
  const double scaled = (clamped + 1.0) / 2.0 * count;
  const int cat = static_cast<int>(std::floor(scaled));
  return std::clamp(cat, 0, count - 1);
}

namespace {

Box default_y_box(std::size_t d) {
  const double r = std::sqrt(static_cast<double>(d));
  return Box::cube(d, -r, r);
}

}  // namespace

Embedding Embedding::draw(std::size_t D, std::size_t d, std::uint64_t seed, std::optional<Box> x_box,
                          std::optional<CategoricalTable> decode, double entry_scale) {
  if (d < 1) throw std::invalid_argument("Embedding: d must be >= 1");
  if (d > D) throw std::invalid_argument("Embedding: d must not exceed D");
  if (!(entry_scale > 0.0)) throw std::invalid_argument("Embedding: entry scale must be positive");
  if (x_box && x_box->dim() != D) throw std::invalid_argument("Embedding: x_box dimension must equal D");
  if (decode) decode->validate(D);

  Embedding e;
  e.D_ = D;
  e.d_ = d;
  e.seed_ = seed;
  e.scale_ = entry_scale;
  e.x_box_ = std::move(x_box);
  e.y_box_ = default_y_box(d);
  e.decode_ = std::move(decode);
  e.storage_ = D > kLazyThreshold ? Storage::LazyRows : Storage::Dense;
  if (e.storage_ == Storage::Dense) {
    e.dense_.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < D; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        e.dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            entry_scale * counter_normal(seed, static_cast<std::uint64_t>(i) * d + c);
      }
    }
  }
  return e;
}

Embedding Embedding::from_matrix(Eigen::MatrixXd A, std::optional<Box> x_box, std::optional<CategoricalTable> decode) {
  const auto D = static_cast<std::size_t>(A.rows());
  const auto d = static_cast<std::size_t>(A.cols());
  if (d < 1 || d > D) throw std::invalid_argument("Embedding: need 1 <= d <= D");
  if (x_box && x_box->dim() != D) throw std::invalid_argument("Embedding: x_box dimension must equal D");
  if (decode) decode->validate(D);
  Embedding e;
  e.D_ = D;
  e.d_ = d;
  e.dense_ = std::move(A);
  e.x_box_ = std::move(x_box);
  e.y_box_ = default_y_box(d);
  e.decode_ = std::move(decode);
  return e;
}

double Embedding::x_lower(std::size_t i) const {
  return x_box_ ? x_box_->lower(static_cast<Eigen::Index>(i)) : -1.0;
}

double Embedding::x_upper(std::size_t i) const {
  return x_box_ ? x_box_->upper(static_cast<Eigen::Index>(i)) : 1.0;
}

Box Embedding::x_box() const {
  if (x_box_) return *x_box_;
  if (storage_ == Storage::LazyRows) throw std::logic_error("Embedding: X box of a lazy embedding is implicit");
  return Box::cube(D_, -1.0, 1.0);
}

double Embedding::entry(std::size_t i, std::size_t c) const {
  if (i >= D_ || c >= d_) throw std::out_of_range("Embedding: entry index out of range");
  if (storage_ == Storage::Dense) return dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  // Row i owns counters [i*d, (i+1)*d); rows never share underlying draws.
  return scale_ * counter_normal(seed_, static_cast<std::uint64_t>(i) * d_ + c);
}

Eigen::VectorXd Embedding::row(std::size_t i) const {
  if (i >= D_) throw std::out_of_range("Embedding: row index out of range");
  if (storage_ == Storage::Dense) return dense_.row(static_cast<Eigen::Index>(i)).transpose();
  rows_generated_->fetch_add(1, std::memory_order_relaxed);
  Eigen::VectorXd r(static_cast<Eigen::Index>(d_));
  for (std::size_t c = 0; c < d_; ++c) {
    r(static_cast<Eigen::Index>(c)) = scale_ * counter_normal(seed_, static_cast<std::uint64_t>(i) * d_ + c);
  }
  return r;
}

const Eigen::MatrixXd& Embedding::matrix() const {
  if (storage_ == Storage::LazyRows) throw std::logic_error("Embedding: lazy embedding has no dense matrix");
  return dense_;
}

void Embedding::check_y(const Eigen::VectorXd& y) const {
  if (static_cast<std::size_t>(y.size()) != d_) {
    throw std::invalid_argument("Embedding: y has dimension " + std::to_string(y.size()) + ", expected " +
                                std::to_string(d_));
  }
  if (!y.allFinite()) throw std::invalid_argument("Embedding: y must be finite");
}

Eigen::VectorXd Embedding::map_to_x(const Eigen::VectorXd& y) const {
  check_y(y);
  if (storage_ == Storage::LazyRows) {
    throw std::logic_error("Embedding: full map_to_x is unavailable for lazy storage; use map_coordinates");
  }
  Eigen::VectorXd x = dense_ * y;
  for (std::size_t i = 0; i < D_; ++i) {
    auto& v = x(static_cast<Eigen::Index>(i));
    v = std::clamp(v, x_lower(i), x_upper(i));
  }
  return x;
}

Eigen::VectorXd Embedding::map_coordinates(const Eigen::VectorXd& y, std::span<const std::size_t> indices) const {
  check_y(y);
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    out(static_cast<Eigen::Index>(k)) = std::clamp(row(i).dot(y), x_lower(i), x_upper(i));
  }
  return out;
}

std::vector<int> Embedding::decode_categorical(const Eigen::VectorXd& x) const {
  if (!decode_) throw std::logic_error("Embedding: no categorical decoding table configured");
  if (static_cast<std::size_t>(x.size()) != D_) throw std::invalid_argument("Embedding: decode expects a D-vector");
  std::vector<int> out(D_);
  for (std::size_t i = 0; i < D_; ++i) out[i] = decode_coordinate(x(static_cast<Eigen::Index>(i)), decode_->counts[i]);
  return out;
}

std::vector<int> Embedding::decode_from_y(const Eigen::VectorXd& y) const { return decode_categorical(map_to_x(y)); }

bool subspace_rank_check(const Embedding& emb, const Eigen::MatrixXd& effective_basis) {
  if (static_cast<std::size_t>(effective_basis.rows()) != emb.extrinsic_dim()) {
    throw std::invalid_argument("subspace_rank_check: basis must have D rows");
  }
  const Eigen::Index de = effective_basis.cols();
  if (de == 0) return true;
  Eigen::MatrixXd projected(de, static_cast<Eigen::Index>(emb.embedding_dim()));
  if (emb.storage() == Embedding::Storage::Dense) {
    projected = effective_basis.transpose() * emb.matrix();
  } else {
    projected.setZero();
    for (std::size_t i = 0; i < emb.extrinsic_dim(); ++i) {
      const Eigen::VectorXd b = effective_basis.row(static_cast<Eigen::Index>(i)).transpose();
      if (b.isZero(0.0)) continue;
      projected += b * emb.row(i).transpose();
    }
  }
  if (projected.cols() < de) return false;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(projected);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0) return false;
  return s(de - 1) > 1e-10 * s(0);
}

}  // namespace rembo
