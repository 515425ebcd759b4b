#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mmosim/pam.hpp"

namespace mmosim {

TileGrid::TileGrid(const Aoi& p, int resolution) : p_(p), res_(resolution) {
  if (resolution < 1) throw std::invalid_argument("grid resolution must be at least 1");
  side_ = 2.0 * p.radius / resolution;
  const auto n = static_cast<std::size_t>(res_) * res_;
  mask_.assign(n, 0);
  counts_.assign(n, 0);
  const double r2 = p.radius * p.radius;
  for (int i = 0; i < res_; ++i) {
    for (int j = 0; j < res_; ++j) {
      mask_[idx(i, j)] = distance_sq(tile(i, j).center(), p.center) > r2 ? 1 : 0;
    }
  }
}

Rect TileGrid::tile(int row, int col) const {
  const double x0 = p_.center.x - p_.radius + col * side_;
  const double y0 = p_.center.y - p_.radius + row * side_;
  return {x0, y0, x0 + side_, y0 + side_};
}

int TileGrid::unmasked_tiles() const {
  return static_cast<int>(std::count(mask_.begin(), mask_.end(), 0));
}

CoverageResult coverage(const Aoi& p, std::span<const Aoi> neighbors, int resolution) {
  CoverageResult out{0, TileGrid(p, resolution)};
  auto& grid = out.grid;
  for (const auto& aoi : neighbors) {
    for (int i = 0; i < resolution; ++i) {
      for (int j = 0; j < resolution; ++j) {
        if (grid.masked(i, j)) continue;
        if (intersects(aoi.disk(), grid.tile(i, j))) {
          if (grid.count(i, j) == 0) ++out.covered_tiles;
          grid.increment(i, j);
        }
      }
    }
  }
  return out;
}

int TileSet::count() const {
  int c = 0;
  for (auto w : words_) c += std::popcount(w);
  return c;
}

int TileSet::count_union(const TileSet& other) const {
  int c = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) c += std::popcount(words_[i] | other.words_[i]);
  return c;
}

void TileSet::merge(const TileSet& other) {
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
}

void TileSet::set_range(std::size_t lo, std::size_t hi) {
  while (lo < hi) {
    const std::size_t w = lo >> 6;
    const std::size_t b = lo & 63;
    const std::size_t n = std::min<std::size_t>(64 - b, hi - lo);
    const std::uint64_t bits = n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1) << b;
    words_[w] |= bits;
    lo += n;
  }
}

void TileSet::intersect(const TileSet& other) {
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
}

bool TileSet::empty() const {
  return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

CoverageModel::CoverageModel(const Aoi& p, std::span<const Aoi> neighbors, int resolution) {
  const TileGrid grid(p, resolution);
  const int res = resolution;
  const auto tiles = static_cast<std::size_t>(res) * res;
  words_ = (tiles + 63) / 64;
  const double s = grid.tile_side();
  const double bx = p.center.x - p.radius;
  const double by = p.center.y - p.radius;
  TileSet valid(words_);
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      if (!grid.masked(i, j)) valid.set(static_cast<std::size_t>(i) * res + static_cast<std::size_t>(j));
    }
  }
  sets_.reserve(neighbors.size());
  for (const auto& q : neighbors) {
    TileSet set(words_);
    const Disk disk = q.disk();
    const Rect bounds{bx, by, bx + res * s, by + res * s};
    if (!intersects(disk, bounds)) {
      sets_.push_back(std::move(set));
      continue;
    }
    const double R2 = q.radius * q.radius;
    for (int i = 0; i < res; ++i) {
      const double y0 = by + i * s;
      const double y1 = y0 + s;
      const double dy = std::max(0.0, std::max(y0 - q.center.y, q.center.y - y1));
      if (dy * dy >= R2) continue;
      const double w = std::sqrt(R2 - dy * dy);
      const auto jlo = std::max<long>(0, static_cast<long>(std::floor((q.center.x - w - bx) / s)) - 1);
      const auto jhi = std::min<long>(res - 1, static_cast<long>(std::ceil((q.center.x + w - bx) / s)));
      const auto row = static_cast<std::size_t>(i) * res;
      // Columns two away from either end are strictly inside the chord.
      if (jhi - jlo >= 4) set.set_range(row + static_cast<std::size_t>(jlo + 2), row + static_cast<std::size_t>(jhi - 1));
      for (long j = jlo; j <= jhi; ++j) {
        if (jhi - jlo >= 4 && j == jlo + 2) j = jhi - 1;
        if (intersects(disk, grid.tile(i, static_cast<int>(j)))) set.set(row + static_cast<std::size_t>(j));
      }
    }
    set.intersect(valid);
    sets_.push_back(std::move(set));
  }
}

int CoverageModel::covered(std::span<const std::size_t> subset) const {
  TileSet u(words_);
  for (auto i : subset) u.merge(sets_[i]);
  return u.count();
}

std::vector<std::size_t> score_select(const CoverageModel& model, std::size_t d) {
  const auto n = model.size();
  const auto bits = model.words() * 64;
  std::vector<int> counts(bits, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& words = model.tiles(i).words();
    for (std::size_t w = 0; w < words.size(); ++w) {
      for (auto x = words[w]; x; x &= x - 1) ++counts[w * 64 + std::countr_zero(x)];
    }
  }
  std::vector<double> inv(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) inv[k] = 1.0 / static_cast<double>(k);
  std::vector<double> score(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& words = model.tiles(i).words();
    for (std::size_t w = 0; w < words.size(); ++w) {
      for (auto x = words[w]; x; x &= x - 1) score[i] += inv[counts[w * 64 + std::countr_zero(x)]];
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(std::min(d, n));
  return order;
}

std::vector<std::size_t> greedy_select(const CoverageModel& model, std::size_t d) {
  const auto n = model.size();
  std::vector<std::size_t> chosen;
  std::vector<char> taken(n, 0);
  TileSet u(model.words());
  for (std::size_t round = 0; round < std::min(d, n); ++round) {
    int best = -1;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const int c = u.count_union(model.tiles(i));
      if (c > best) {
        best = c;
        pick = i;
      }
    }
    taken[pick] = 1;
    chosen.push_back(pick);
    u.merge(model.tiles(pick));
  }
  return chosen;
}

std::vector<std::size_t> score_heuristic(const Aoi& p, std::span<const Aoi> neighbors, std::size_t d,
                                         int resolution) {
  return score_select(CoverageModel(p, neighbors, resolution), d);
}

std::vector<std::size_t> greedy_heuristic(const Aoi& p, std::span<const Aoi> neighbors, std::size_t d,
                                          int resolution) {
  return greedy_select(CoverageModel(p, neighbors, resolution), d);
}

double binomial_coefficient(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

BruteForceResult brute_force_select(const CoverageModel& model, std::size_t d, double limit) {
  const auto n = model.size();
  const auto k = std::min(d, n);
  if (binomial_coefficient(n, k) > limit) throw std::invalid_argument("too many subsets to enumerate");
  BruteForceResult best;
  best.covered_tiles = -1;
  std::vector<std::size_t> cur;
  std::vector<TileSet> unions(k + 1, TileSet(model.words()));
  auto rec = [&](auto&& self, std::size_t start) -> void {
    if (cur.size() == k) {
      const int c = unions[k].count();
      if (c > best.covered_tiles) {
        best.covered_tiles = c;
        best.subset = cur;
      }
      return;
    }
    const std::size_t need = k - cur.size();
    for (std::size_t i = start; i + need <= n; ++i) {
      unions[cur.size() + 1] = unions[cur.size()];
      unions[cur.size() + 1].merge(model.tiles(i));
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  if (best.covered_tiles < 0) best.covered_tiles = 0;
  return best;
}

BruteForceResult brute_force_max_coverage(const Aoi& p, std::span<const Aoi> neighbors, std::size_t d,
                                          int resolution, double limit) {
  return brute_force_select(CoverageModel(p, neighbors, resolution), d, limit);
}

}  // namespace mmosim
