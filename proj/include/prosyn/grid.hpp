#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "prosyn/model.hpp"

namespace prosyn {

/// Uniform hyper-rectangular partition of a compact box with cell centers as
/// representatives. Cells are half-open [l, u) per dimension except the last
/// cell, which is closed, so every point of the domain lands in exactly one
/// cell. Flattening is row-major with dimension 0 most significant.
class Grid {
 public:
  Grid(Box domain, std::vector<std::int64_t> cells_per_dim)
      : domain_(std::move(domain)), cells_(std::move(cells_per_dim)) {
    if (int(cells_.size()) != domain_.dim())
      throw std::invalid_argument("grid: cells_per_dim dimension mismatch");
    n_cells_ = 1;
    for (int d = 0; d < dim(); ++d) {
      if (cells_[d] < 1) throw std::invalid_argument("grid: cells_per_dim must be >= 1");
      if (!(domain_.upper[d] > domain_.lower[d]))
        throw std::invalid_argument("grid: degenerate domain in dimension " +
                                    std::to_string(d));
      n_cells_ *= cells_[d];
    }
  }

  const Box& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  std::int64_t n_cells() const { return n_cells_; }
  std::int64_t cells(int d) const { return cells_[d]; }

  double width(int d) const {
    return (domain_.upper[d] - domain_.lower[d]) / double(cells_[d]);
  }

  /// Discretization parameter: the cell diameter in the infinity norm,
  /// i.e. the maximum per-dimension width.
  double delta() const {
    double w = 0.0;
    for (int d = 0; d < dim(); ++d) w = std::max(w, width(d));
    return w;
  }

  /// Cell edge i in dimension d, computed as l + (u-l)*i/cells so decimal
  /// domain boundaries land exactly on edges.
  double edge(int d, std::int64_t i) const {
    return domain_.lower[d] +
           (domain_.upper[d] - domain_.lower[d]) * (double(i) / double(cells_[d]));
  }

  double center(int d, std::int64_t i) const {
    return domain_.lower[d] + (domain_.upper[d] - domain_.lower[d]) *
                                  ((double(i) + 0.5) / double(cells_[d]));
  }

  /// Per-dimension cell index of a scalar coordinate, or -1 when outside.
  std::int64_t cell_coord(int d, double x) const {
    const double lo = domain_.lower[d], hi = domain_.upper[d];
    if (x < lo || x > hi) return -1;
    const double t = (x - lo) / (hi - lo) * double(cells_[d]);
    auto i = std::int64_t(std::floor(t));
    if (i >= cells_[d]) i = cells_[d] - 1;  // upper boundary joins the last cell
    if (i < 0) i = 0;
    return i;
  }

  std::int64_t flatten(const std::vector<std::int64_t>& coords) const {
    std::int64_t idx = 0;
    for (int d = 0; d < dim(); ++d) idx = idx * cells_[d] + coords[d];
    return idx;
  }

  std::vector<std::int64_t> unflatten(std::int64_t idx) const {
    std::vector<std::int64_t> coords(dim());
    for (int d = dim() - 1; d >= 0; --d) {
      coords[d] = idx % cells_[d];
      idx /= cells_[d];
    }
    return coords;
  }

  VectorXd representative(std::int64_t idx) const {
    const auto coords = unflatten(idx);
    VectorXd r(dim());
    for (int d = 0; d < dim(); ++d) r[d] = center(d, coords[d]);
    return r;
  }

  Box cell_bounds(std::int64_t idx) const {
    const auto coords = unflatten(idx);
    VectorXd lo(dim()), hi(dim());
    for (int d = 0; d < dim(); ++d) {
      lo[d] = edge(d, coords[d]);
      hi[d] = edge(d, coords[d] + 1);
    }
    return Box(lo, hi);
  }

  struct QuantizeResult {
    std::int64_t index;       ///< cell index, or n_cells() when outside
    bool inside;              ///< false means the reserved absorbing index
    VectorXd representative;  ///< empty when outside
  };

  /// Map a point to its cell and representative. Points outside the domain
  /// get the reserved absorbing index n_cells().
  QuantizeResult quantize(const VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("grid: point dimension mismatch");
    std::vector<std::int64_t> coords(dim());
    for (int d = 0; d < dim(); ++d) {
      coords[d] = cell_coord(d, x[d]);
      if (coords[d] < 0) return {n_cells_, false, VectorXd()};
    }
    const std::int64_t idx = flatten(coords);
    return {idx, true, representative(idx)};
  }

  /// Order-independent content hash for provenance records.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double v) {
      std::uint64_t bits;
      static_assert(sizeof bits == sizeof v);
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    for (int d = 0; d < dim(); ++d) {
      mix(domain_.lower[d]);
      mix(domain_.upper[d]);
      mix(double(cells_[d]));
    }
    return h;
  }

 private:
  Box domain_;
  std::vector<std::int64_t> cells_;
  std::int64_t n_cells_;
};

inline Grid build_grid(const Box& domain, std::vector<std::int64_t> cells_per_dim) {
  return Grid(domain, std::move(cells_per_dim));
}

inline double grid_delta(const Grid& g) { return g.delta(); }

/// Finite input set: either an explicit list of input vectors or the cell
/// centers of an input grid.
class InputSet {
 public:
  static InputSet from_list(std::vector<VectorXd> points) {
    if (points.empty()) throw std::invalid_argument("input set: empty list");
    const auto d = points.front().size();
    for (const auto& p : points)
      if (p.size() != d) throw std::invalid_argument("input set: mixed dimensions");
    InputSet s;
    s.points_ = std::move(points);
    return s;
  }

  static InputSet from_grid(const Grid& g) {
    std::vector<VectorXd> pts;
    pts.reserve(std::size_t(g.n_cells()));
    for (std::int64_t i = 0; i < g.n_cells(); ++i) pts.push_back(g.representative(i));
    return from_list(std::move(pts));
  }

  int size() const { return int(points_.size()); }
  int dim() const { return int(points_.front().size()); }
  const VectorXd& at(int i) const { return points_.at(std::size_t(i)); }
  const std::vector<VectorXd>& points() const { return points_; }

 private:
  InputSet() = default;
  std::vector<VectorXd> points_;
};

}  // namespace prosyn
