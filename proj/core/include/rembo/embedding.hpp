#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rembo/box.hpp"

namespace rembo {

/// Number of categories per high-dimensional coordinate; the codomain of the
/// continuous-to-discrete decoding.
struct CategoricalTable {
  std::vector<int> counts;

  void validate(std::size_t expected_dim) const;
};

/// Above this extrinsic dimension the matrix is never materialized; rows are
/// regenerated on demand from (seed, row).
inline constexpr std::size_t kLazyThreshold = 100'000;

/// Random embedding y -> p_X(A y), with A in R^{D x d}.
///
/// Entry (i, c) of A is a pure function of (seed, i, c), so a dense cache and
/// lazy row generation agree exactly. The high-dimensional box X defaults to
/// [-1, 1]^D and is kept implicit in that case so huge D costs no memory.
/// The low-dimensional box Y is [-sqrt(d), sqrt(d)]^d.
class Embedding {
 public:
  enum class Storage { Dense, LazyRows };

  /// Draws A with i.i.d. N(0, entry_scale^2) entries. Storage is lazy when
  /// D > kLazyThreshold.
  static Embedding draw(std::size_t D, std::size_t d, std::uint64_t seed,
                        std::optional<Box> x_box = std::nullopt,
                        std::optional<CategoricalTable> decode = std::nullopt,
                        double entry_scale = 1.0);

  /// Wraps an explicit matrix (used for constructed/adversarial cases).
  static Embedding from_matrix(Eigen::MatrixXd A, std::optional<Box> x_box = std::nullopt,
                               std::optional<CategoricalTable> decode = std::nullopt);

  std::size_t extrinsic_dim() const { return D_; }
  std::size_t embedding_dim() const { return d_; }
  Storage storage() const { return storage_; }
  std::uint64_t seed() const { return seed_; }
  const Box& y_box() const { return y_box_; }
  const std::optional<CategoricalTable>& decode_table() const { return decode_; }

  double x_lower(std::size_t i) const;
  double x_upper(std::size_t i) const;
  /// Materialized X box; throws for lazy embeddings.
  Box x_box() const;

  /// Row i of A.
  Eigen::VectorXd row(std::size_t i) const;
  double entry(std::size_t i, std::size_t c) const;
  /// Dense A; throws for lazy embeddings.
  const Eigen::MatrixXd& matrix() const;

  /// p_X(A y) over all D coordinates; throws for lazy embeddings.
  Eigen::VectorXd map_to_x(const Eigen::VectorXd& y) const;
  /// clamp(row_i(A) . y) for each requested i, in the order given.
  Eigen::VectorXd map_coordinates(const Eigen::VectorXd& y, std::span<const std::size_t> indices) const;

  /// s(x): clamp to [-1, 1], rescale to [0, count_i), floor, clamp the top edge.
  std::vector<int> decode_categorical(const Eigen::VectorXd& x) const;
  /// s(p_X(A y)).
  std::vector<int> decode_from_y(const Eigen::VectorXd& y) const;

  /// Rows regenerated so far (lazy storage only); instrumentation for the
  /// sparsity contract.
  std::size_t rows_generated() const { return rows_generated_->load(std::memory_order_relaxed); }

 private:
  Embedding() = default;
  void check_y(const Eigen::VectorXd& y) const;

  std::size_t D_ = 0;
  std::size_t d_ = 0;
  Storage storage_ = Storage::Dense;
  std::uint64_t seed_ = 0;
  double scale_ = 1.0;
  Eigen::MatrixXd dense_;
  std::optional<Box> x_box_;
  Box y_box_;
  std::optional<CategoricalTable> decode_;
  std::shared_ptr<std::atomic<std::size_t>> rows_generated_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// Decode one coordinate (already in any units) into [0, count - 1].
int decode_coordinate(double x, int count);

/// True iff basis^T A has numerical rank equal to basis.cols(): its smallest
/// singular value exceeds 1e-10 times its largest.
bool subspace_rank_check(const Embedding& emb, const Eigen::MatrixXd& effective_basis);

}  // namespace rembo
