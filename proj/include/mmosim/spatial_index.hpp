#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mmosim/geometry.hpp"

namespace mmosim {

// Uniform bucket grid over a fixed set of points, for disk range queries.
class PointGrid {
 public:
  PointGrid() = default;
  PointGrid(std::span<const Point> points, double cell_size) { rebuild(points, cell_size); }

  void rebuild(std::span<const Point> points, double cell_size) {
    points_.assign(points.begin(), points.end());
    cell_ = cell_size > 0.0 ? cell_size : 1.0;
    if (points_.empty()) {
      cols_ = rows_ = 0;
      start_.assign(1, 0);
      order_.clear();
      return;
    }
    min_x_ = max_x_ = points_[0].x;
    min_y_ = max_y_ = points_[0].y;
    for (const auto& p : points_) {
      min_x_ = std::min(min_x_, p.x);
      max_x_ = std::max(max_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_y_ = std::max(max_y_, p.y);
    }
    cols_ = static_cast<std::int64_t>((max_x_ - min_x_) / cell_) + 1;
    rows_ = static_cast<std::int64_t>((max_y_ - min_y_) / cell_) + 1;
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(cols_ * rows_) + 1, 0);
    std::vector<std::uint32_t> cell_of(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      cell_of[i] = static_cast<std::uint32_t>(cell_index(points_[i]));
      ++counts[cell_of[i] + 1];
    }
    for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
    start_ = counts;
    order_.resize(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) order_[counts[cell_of[i]]++] = static_cast<std::uint32_t>(i);
  }

  // Calls f(index) for every point with distance <= radius from center.
  template <class F>
  void for_each_in_disk(Point center, double radius, F&& f) const {
    if (points_.empty()) return;
    const double r2 = radius * radius;
    const auto c0 = clamp_col(static_cast<std::int64_t>(std::floor((center.x - radius - min_x_) / cell_)));
    const auto c1 = clamp_col(static_cast<std::int64_t>(std::floor((center.x + radius - min_x_) / cell_)));
    const auto r0 = clamp_row(static_cast<std::int64_t>(std::floor((center.y - radius - min_y_) / cell_)));
    const auto r1 = clamp_row(static_cast<std::int64_t>(std::floor((center.y + radius - min_y_) / cell_)));
    if (center.x + radius < min_x_ || center.x - radius > max_x_ || center.y + radius < min_y_ ||
        center.y - radius > max_y_) {
      return;
    }
    for (auto r = r0; r <= r1; ++r) {
      for (auto c = c0; c <= c1; ++c) {
        const auto cell = static_cast<std::size_t>(r * cols_ + c);
        for (auto k = start_[cell]; k < start_[cell + 1]; ++k) {
          const auto idx = order_[k];
          if (distance_sq(points_[idx], center) <= r2) f(idx);
        }
      }
    }
  }

  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }

 private:
  std::int64_t cell_index(Point p) const {
    auto c = clamp_col(static_cast<std::int64_t>((p.x - min_x_) / cell_));
    auto r = clamp_row(static_cast<std::int64_t>((p.y - min_y_) / cell_));
    return r * cols_ + c;
  }
  std::int64_t clamp_col(std::int64_t c) const { return std::clamp<std::int64_t>(c, 0, cols_ - 1); }
  std::int64_t clamp_row(std::int64_t r) const { return std::clamp<std::int64_t>(r, 0, rows_ - 1); }

  std::vector<Point> points_;
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> order_;
  double cell_{1.0};
  double min_x_{0}, max_x_{0}, min_y_{0}, max_y_{0};
  std::int64_t cols_{0}, rows_{0};
};

}  // namespace mmosim
