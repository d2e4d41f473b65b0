#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosyn/grid.hpp"
#include "prosyn/model.hpp"
#include "prosyn/parallel.hpp"
#include "prosyn/stats.hpp"

namespace prosyn {

/// Entries below gamma are dropped; the dropped mass joins the out-of-domain
/// mass in the absorbing state, which keeps safety values on the
/// conservative side (and is pessimistic for reachability-to-target).
struct TruncationPolicy {
  double gamma = 0.0;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw std::invalid_argument("truncation: gamma must be in [0,1)");
  }
};

struct SparseRow {
  std::vector<std::int64_t> dst;
  std::vector<double> prob;
  double absorbing = 0.0;

  double kept_mass() const {
    return std::accumulate(prob.begin(), prob.end(), 0.0);
  }
};

/// Sparse finite MDP over grid cells plus one absorbing out-of-domain state
/// (index n_grid_states). The absorbing state self-loops with probability one
/// under every input; its row is implicit.
class FiniteMdp {
 public:
  struct Provenance {
    std::uint64_t grid_hash = 0;
    double trunc_gamma = 0.0;
  };

  FiniteMdp(std::vector<VectorXd> state_repr, std::vector<VectorXd> input_repr,
            std::vector<SparseRow> rows, Provenance prov = {})
      : state_repr_(std::move(state_repr)),
        input_repr_(std::move(input_repr)),
        prov_(prov) {
    n_grid_ = std::int64_t(state_repr_.size());
    n_inputs_ = int(input_repr_.size());
    if (std::int64_t(rows.size()) != n_grid_ * n_inputs_)
      throw std::invalid_argument("mdp: row count != states * inputs");
    offsets_.reserve(rows.size() + 1);
    offsets_.push_back(0);
    std::size_t nnz = 0;
    for (const auto& r : rows) nnz += r.dst.size();
    cols_.reserve(nnz);
    probs_.reserve(nnz);
    absorbing_.reserve(rows.size());
    for (auto& r : rows) {
      cols_.insert(cols_.end(), r.dst.begin(), r.dst.end());
      probs_.insert(probs_.end(), r.prob.begin(), r.prob.end());
      absorbing_.push_back(r.absorbing);
      offsets_.push_back(std::int64_t(cols_.size()));
    }
  }

  std::int64_t n_grid_states() const { return n_grid_; }
  std::int64_t n_states() const { return n_grid_ + 1; }
  std::int64_t absorbing_index() const { return n_grid_; }
  int n_inputs() const { return n_inputs_; }
  const VectorXd& state_representative(std::int64_t s) const {
    return state_repr_.at(std::size_t(s));
  }
  const VectorXd& input_representative(int u) const {
    return input_repr_.at(std::size_t(u));
  }
  const Provenance& provenance() const { return prov_; }

  struct RowView {
    const std::int64_t* dst;
    const double* prob;
    std::int64_t nnz;
    double absorbing;
  };

  RowView row(std::int64_t state, int input) const {
    if (state < 0 || state >= n_grid_ || input < 0 || input >= n_inputs_)
      throw std::out_of_range("mdp: row index out of range");
    const std::int64_t r = state * n_inputs_ + input;
    const std::int64_t b = offsets_[std::size_t(r)], e = offsets_[std::size_t(r) + 1];
    return {cols_.data() + b, probs_.data() + b, e - b, absorbing_[std::size_t(r)]};
  }

  std::size_t stored_entries() const { return cols_.size(); }

 private:
  std::int64_t n_grid_ = 0;
  int n_inputs_ = 0;
  std::vector<VectorXd> state_repr_;
  std::vector<VectorXd> input_repr_;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int64_t> cols_;
  std::vector<double> probs_;
  std::vector<double> absorbing_;
  Provenance prov_;
};

namespace detail {

/// Per-dimension cell masses of a Gaussian marginal over the grid's slabs.
/// Evaluated by CDF differences at cell edges, so the masses telescope
/// exactly to Phi(last)-Phi(first). A zero std degenerates to an indicator.
struct DimMasses {
  std::int64_t first = 0;      // first cell index with recorded mass
  std::vector<double> mass;    // mass per cell, empty if everything is outside
};

inline DimMasses gaussian_dim_masses(const Grid& grid, int d, double mu,
                                     double sigma, double tail_z = 8.6) {
  DimMasses out;
  const std::int64_t cells = grid.cells(d);
  if (sigma == 0.0) {
    const std::int64_t i = grid.cell_coord(d, mu);
    if (i < 0) return out;
    out.first = i;
    out.mass = {1.0};
    return out;
  }
  const double lo = mu - tail_z * sigma, hi = mu + tail_z * sigma;
  std::int64_t i0 = grid.cell_coord(d, lo);
  std::int64_t i1 = grid.cell_coord(d, hi);
  if (i0 < 0) i0 = (lo > grid.domain().upper[d]) ? cells : 0;
  if (i1 < 0) i1 = (hi < grid.domain().lower[d]) ? -1 : cells - 1;
  if (i0 > i1) return out;
  out.first = i0;
  out.mass.resize(std::size_t(i1 - i0 + 1));
  double prev = normal_cdf(grid.edge(d, i0), mu, sigma);
  for (std::int64_t i = i0; i <= i1; ++i) {
    const double next = normal_cdf(grid.edge(d, i + 1), mu, sigma);
    out.mass[std::size_t(i - i0)] = next - prev;
    prev = next;
  }
  return out;
}

}  // namespace detail

/// One row of the abstract transition matrix: the kernel from (x_bar, u_bar)
/// integrated over every grid cell, computed as a product of per-dimension
/// Gaussian CDF differences. Entries below the truncation threshold are
/// dropped; the remainder (dropped + out-of-domain) goes to absorbing.
inline SparseRow transition_row(const LinearDtScs& model, const VectorXd& x_bar,
                                const VectorXd& u_bar, const Grid& grid,
                                const TruncationPolicy& trunc = {}) {
  trunc.validate();
  if (grid.dim() != model.state_dim())
    throw std::invalid_argument("transition_row: grid/model dimension mismatch");
  const auto mom = model.kernel_mean_std(x_bar, u_bar);

  const int n = grid.dim();
  std::vector<detail::DimMasses> dm(std::size_t(n));
  for (int d = 0; d < n; ++d) {
    dm[std::size_t(d)] = detail::gaussian_dim_masses(grid, d, mom.mean[d], mom.std[d]);
    if (dm[std::size_t(d)].mass.empty()) return SparseRow{{}, {}, 1.0};
  }

  SparseRow row;
  std::vector<std::size_t> it(std::size_t(n), 0);
  std::vector<std::int64_t> coords(std::size_t(n));
  double kept = 0.0;
  for (;;) {
    double p = 1.0;
    for (int d = 0; d < n; ++d) {
      p *= dm[std::size_t(d)].mass[it[std::size_t(d)]];
      coords[std::size_t(d)] = dm[std::size_t(d)].first + std::int64_t(it[std::size_t(d)]);
    }
    if (p > 0.0 && p >= trunc.gamma) {
      row.dst.push_back(grid.flatten(coords));
      row.prob.push_back(p);
      kept += p;
    }
    // odometer over the per-dimension windows, last dimension fastest,
    // so destinations come out already sorted ascending
    int d = n - 1;
    for (; d >= 0; --d) {
      if (++it[std::size_t(d)] < dm[std::size_t(d)].mass.size()) break;
      it[std::size_t(d)] = 0;
    }
    if (d < 0) break;
  }
  row.absorbing = std::max(0.0, 1.0 - kept);
  return row;
}

struct AbstractionOptions {
  std::size_t memory_cap_bytes = std::size_t(2) << 30;  // refuse beyond 2 GiB
  int threads = 0;
};

/// Thrown when the projected abstraction size exceeds the configured cap.
/// Carries a sizing report so the caller can see what was attempted.
struct SizingError : std::runtime_error {
  explicit SizingError(const std::string& what) : std::runtime_error(what) {}
};

/// Estimated stored entries per row from the noise-to-cell-width ratio.
inline double estimate_row_entries(const LinearDtScs& model, const Grid& grid,
                                   double tail_z = 8.6) {
  double per_row = 1.0;
  for (int d = 0; d < grid.dim(); ++d) {
    const double sigma = model.R[d];
    const double cells = sigma == 0.0
                             ? 1.0
                             : std::min(double(grid.cells(d)),
                                        2.0 * tail_z * sigma / grid.width(d) + 2.0);
    per_row *= cells;
  }
  return per_row;
}

/// Algorithm: partition the domain, take cell centers as abstract states,
/// evaluate the kernel at representatives, and integrate it over cells.
/// Rows are independent and are computed in parallel; assembly order is
/// fixed, so the result is identical for any worker count.
inline FiniteMdp abstract(const LinearDtScs& model, const Grid& state_grid,
                          const InputSet& inputs,
                          const TruncationPolicy& trunc = {},
                          const AbstractionOptions& opts = {}) {
  model.validate();
  trunc.validate();
  if (state_grid.dim() != model.state_dim())
    throw std::invalid_argument("abstract: grid/model dimension mismatch");
  if (inputs.dim() != model.input_dim())
    throw std::invalid_argument("abstract: input set/model dimension mismatch");

  const std::int64_t n_rows = state_grid.n_cells() * inputs.size();
  const double est_entries = double(n_rows) * estimate_row_entries(model, state_grid);
  const double est_bytes = est_entries * (sizeof(std::int64_t) + sizeof(double)) +
                           double(n_rows) * 24.0;
  if (est_bytes > double(opts.memory_cap_bytes)) {
    throw SizingError(
        "abstraction size estimate exceeds cap: rows=" + std::to_string(n_rows) +
        " est_entries=" + std::to_string(std::int64_t(est_entries)) +
        " est_bytes=" + std::to_string(std::int64_t(est_bytes)) +
        " cap_bytes=" + std::to_string(opts.memory_cap_bytes) +
        " (raise abstraction.memory_cap_mb or coarsen the grid)");
  }

  std::vector<SparseRow> rows(std::size_t(n_rows));
  const int n_inputs = inputs.size();
  parallel_for(
      n_rows,
      [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t r = begin; r < end; ++r) {
          const std::int64_t s = r / n_inputs;
          const int u = int(r % n_inputs);
          rows[std::size_t(r)] = transition_row(
              model, state_grid.representative(s), inputs.at(u), state_grid, trunc);
        }
      },
      opts.threads);

  std::vector<VectorXd> state_repr;
  state_repr.reserve(std::size_t(state_grid.n_cells()));
  for (std::int64_t s = 0; s < state_grid.n_cells(); ++s)
    state_repr.push_back(state_grid.representative(s));

  FiniteMdp::Provenance prov{state_grid.hash(), trunc.gamma};
  return FiniteMdp(std::move(state_repr), inputs.points(), std::move(rows), prov);
}

struct MdpValidationReport {
  double max_row_deviation = 0.0;  ///< worst |kept + absorbing - 1|
  std::int64_t negative_entries = 0;
  std::int64_t out_of_range_entries = 0;

  bool ok(double tol = 1e-9) const {
    return max_row_deviation <= tol && negative_entries == 0 &&
           out_of_range_entries == 0;
  }
};

inline MdpValidationReport validate_mdp(const FiniteMdp& mdp) {
  MdpValidationReport rep;
  for (std::int64_t s = 0; s < mdp.n_grid_states(); ++s) {
    for (int u = 0; u < mdp.n_inputs(); ++u) {
      const auto row = mdp.row(s, u);
      double sum = row.absorbing;
      if (row.absorbing < 0.0) ++rep.negative_entries;
      for (std::int64_t i = 0; i < row.nnz; ++i) {
        if (row.prob[i] < 0.0) ++rep.negative_entries;
        if (row.dst[i] < 0 || row.dst[i] >= mdp.n_grid_states())
          ++rep.out_of_range_entries;
        sum += row.prob[i];
      }
      rep.max_row_deviation = std::max(rep.max_row_deviation, std::abs(sum - 1.0));
    }
  }
  return rep;
}

}  // namespace prosyn
