#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rembo/inner_opt.hpp"

namespace rembo {

void InnerOptBudget::validate(std::size_t dim) const {
  if (max_evals < dim + 1) {
    throw std::invalid_argument("InnerOptBudget: max_evals must be >= dimension + 1 (" + std::to_string(dim + 1) +
                                ")");
  }
  if (max_iters < 1) throw std::invalid_argument("InnerOptBudget: max_iters must be >= 1");
  if (!(tol >= 0.0)) throw std::invalid_argument("InnerOptBudget: tol must be >= 0");
}

namespace {

// Rectangles live in the unit cube; side length along dim i is 3^-level[i].
struct Rect {
  Eigen::VectorXd center;
  std::vector<int> level;
  double value;  // minimization sense
  double size;   // half-diagonal
  std::size_t index;
};

double half_diagonal(const std::vector<int>& level) {
  std::vector<int> sorted = level;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (int l : sorted) sum += std::pow(9.0, -l);
  return 0.5 * std::sqrt(sum);
}

class DirectSearch {
 public:
  DirectSearch(const ScalarObjective& f, const Box& box, const InnerOptBudget& budget)
      : f_(f), box_(box), budget_(budget), n_(box.dim()) {}

  InnerOptResult run() {
    Eigen::VectorXd c = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_), 0.5);
    double v = 0.0;
    if (!sample(c, v)) return result();
    rects_.push_back({c, std::vector<int>(n_, 0), v, half_diagonal(std::vector<int>(n_, 0)), 0});

    for (std::size_t iter = 0; iter < budget_.max_iters && evals_ < budget_.max_evals; ++iter) {
      const auto selected = potentially_optimal();
      if (selected.empty()) break;
      for (std::size_t r : selected) {
        if (!divide(r)) return result();
      }
    }
    return result();
  }

 private:
  Eigen::VectorXd to_box(const Eigen::VectorXd& u) const {
    return box_.clamp(box_.lower + u.cwiseProduct(box_.width()));
  }

  bool sample(const Eigen::VectorXd& u, double& out) {
    if (evals_ >= budget_.max_evals) return false;
    const Eigen::VectorXd x = to_box(u);
    const double fx = f_(x);
    ++evals_;
    out = std::isnan(fx) ? std::numeric_limits<double>::infinity() : -fx;
    if (evals_ == 1 || out < best_value_) {
      best_value_ = out;
      best_point_ = x;
    }
    return true;
  }

  InnerOptResult result() const { return {best_point_, -best_value_, evals_}; }

  std::vector<std::size_t> potentially_optimal() const {
    // Best rectangle per distinct size; ties go to the lower index.
    std::map<double, std::size_t> best_by_size;
    for (std::size_t i = 0; i < rects_.size(); ++i) {
      auto [it, inserted] = best_by_size.emplace(rects_[i].size, i);
      if (!inserted && rects_[i].value < rects_[it->second].value) it->second = i;
    }
    double fmin = std::numeric_limits<double>::infinity();
    for (const auto& r : rects_) fmin = std::min(fmin, r.value);

    std::vector<std::pair<double, std::size_t>> groups(best_by_size.begin(), best_by_size.end());
    std::vector<std::size_t> selected;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const Rect& rj = rects_[groups[g].second];
      double k_low = 0.0;
      double k_high = std::numeric_limits<double>::infinity();
      for (std::size_t h = 0; h < groups.size(); ++h) {
        if (h == g) continue;
        const Rect& ri = rects_[groups[h].second];
        if (ri.size < rj.size) {
          k_low = std::max(k_low, (rj.value - ri.value) / (rj.size - ri.size));
        } else {
          k_high = std::min(k_high, (ri.value - rj.value) / (ri.size - rj.size));
        }
      }
      if (k_high <= 0.0 || k_low > k_high) continue;
      if (std::isfinite(k_high) && rj.value - k_high * rj.size > fmin - kDirectEpsilon * std::abs(fmin)) continue;
      selected.push_back(groups[g].second);
    }
    // Larger rectangles first, then creation order.
    std::sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
      if (rects_[a].size != rects_[b].size) return rects_[a].size > rects_[b].size;
      return rects_[a].index < rects_[b].index;
    });
    return selected;
  }

  bool divide(std::size_t r) {
    const int min_level = *std::min_element(rects_[r].level.begin(), rects_[r].level.end());
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < n_; ++i) {
      if (rects_[r].level[i] == min_level) dims.push_back(i);
    }
    const double delta = std::pow(3.0, -(min_level + 1));
    struct Probe {
      std::size_t dim;
      Eigen::VectorXd plus, minus;
      double fplus, fminus;
    };
    std::vector<Probe> probes;
    for (std::size_t i : dims) {
      Probe p{i, rects_[r].center, rects_[r].center, 0.0, 0.0};
      p.plus(static_cast<Eigen::Index>(i)) += delta;
      p.minus(static_cast<Eigen::Index>(i)) -= delta;
      if (!sample(p.plus, p.fplus)) return false;
      if (!sample(p.minus, p.fminus)) return false;
      probes.push_back(std::move(p));
    }
    std::stable_sort(probes.begin(), probes.end(), [](const Probe& a, const Probe& b) {
      return std::min(a.fplus, a.fminus) < std::min(b.fplus, b.fminus);
    });
    for (auto& p : probes) {
      rects_[r].level[p.dim] += 1;
      const auto lv = rects_[r].level;
      const double sz = half_diagonal(lv);
      rects_.push_back({std::move(p.plus), lv, p.fplus, sz, rects_.size()});
      rects_.push_back({std::move(p.minus), lv, p.fminus, sz, rects_.size()});
    }
    rects_[r].size = half_diagonal(rects_[r].level);
    return true;
  }

  const ScalarObjective& f_;
  const Box& box_;
  InnerOptBudget budget_;
  std::size_t n_;
  std::vector<Rect> rects_;
  std::size_t evals_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_point_;
};

}  // namespace

InnerOptResult direct_maximize(const ScalarObjective& objective, const Box& box, const InnerOptBudget& budget) {
  box.validate();
  budget.validate(box.dim());
  return DirectSearch(objective, box, budget).run();
}

}  // namespace rembo
