#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosyn/abstraction.hpp"
#include "prosyn/bounds.hpp"
#include "prosyn/grid.hpp"
#include "prosyn/parallel.hpp"
#include "prosyn/spec.hpp"

namespace prosyn {

/// Satisfaction probabilities over (state, automaton location) pairs for
/// every time step. Convention: v[k] holds values after the location has
/// consumed the labels of y(0..k); the initial readout therefore feeds the
/// initial state's own label through the automaton first.
struct ValueFunction {
  int horizon = 0;
  std::int64_t n_states = 0;  // includes the absorbing state (last index)
  int n_locations = 0;
  std::vector<std::vector<double>> v;  // v[k][s * n_locations + q]
  std::string descriptor;

  double at(int k, std::int64_t s, int q) const {
    return v.at(std::size_t(k)).at(std::size_t(s * n_locations + q));
  }
};

/// Time-indexed argmax policy over the product space. Terminal pairs (the
/// absorbing state, or locations whose value no input can change) keep the
/// lowest-index input by the tie-break rule.
struct ProductPolicy {
  int horizon = 0;
  std::int64_t n_states = 0;
  int n_locations = 0;
  std::vector<std::vector<std::int32_t>> input;  // input[k][s * n_locations + q]

  std::int32_t at(int k, std::int64_t s, int q) const {
    return input.at(std::size_t(k)).at(std::size_t(s * n_locations + q));
  }
};

struct SynthesisResult {
  ValueFunction value;
  ProductPolicy policy;
  Dfa dfa;
  LabelMap labels;
  std::vector<std::string> warnings;

  /// Satisfaction probability starting at grid state s: the automaton first
  /// consumes the label of s itself.
  double initial_value(const FiniteMdp& mdp, std::int64_t s) const {
    const int a = dfa.letter_index(labels.label(mdp.state_representative(s)));
    const int q = dfa.step(dfa.initial(), a);
    return value.at(0, s, q);
  }
};

namespace detail {

struct ProductSpec {
  Dfa dfa;
  LabelMap labels;
};

/// Internal letters for the built-in kinds. Target is listed before safe so
/// that target claims shared boundaries, matching the set-difference reading
/// of reach-avoid labels.
inline ProductSpec product_spec(const HorizonSpec& spec) {
  switch (spec.kind) {
    case SpecKind::Safety:
      return {safety_monitor_dfa("safe", "out"),
              LabelMap({{"safe", spec.safe}}, "out")};
    case SpecKind::Reachability:
      return {reachability_dfa("target", "rest"),
              LabelMap({{"target", spec.target}}, "rest")};
    case SpecKind::ReachAvoid:
      return {reach_avoid_dfa("safe", "target", "out"),
              LabelMap({{"target", spec.target}, {"safe", spec.safe}}, "out")};
    case SpecKind::DfaSpec:
      return {spec.dfa->sticky_accepting(), *spec.labels};
  }
  throw std::logic_error("unreachable");
}

/// Cell-alignment warnings: region faces that cut through grid cells mean the
/// representative-membership test redraws the region along cell boundaries.
inline void check_region_alignment(const Grid& grid, const std::vector<Box>& regions,
                                   const std::string& what, bool strict,
                                   std::vector<std::string>& warnings) {
  for (const auto& r : regions) {
    if (r.dim() != grid.dim()) throw std::invalid_argument(what + ": region dimension mismatch");
    for (int d = 0; d < grid.dim(); ++d) {
      for (double bound : {r.lower[d], r.upper[d]}) {
        if (bound <= grid.domain().lower[d] || bound >= grid.domain().upper[d]) continue;
        const double t = (bound - grid.domain().lower[d]) /
                         (grid.domain().upper[d] - grid.domain().lower[d]) *
                         double(grid.cells(d));
        if (std::abs(t - std::round(t)) > 1e-9 * (1.0 + std::abs(t))) {
          const std::string msg = what + ": region boundary " + std::to_string(bound) +
                                  " in dimension " + std::to_string(d) +
                                  " is not aligned with cell edges; using "
                                  "representative membership";
          if (strict) throw std::invalid_argument(msg);
          warnings.push_back(msg);
        }
      }
    }
  }
}

}  // namespace detail

struct SynthesisOptions {
  int threads = 0;
  bool strict_regions = false;
  const Grid* grid = nullptr;  ///< enables region-alignment warnings
};

/// Backward induction over the product of the finite MDP with the
/// specification automaton:
///
///   V_T(s, q)  = accepting(q)
///   V_k(s, q)  = max_u  sum_{s'} T(s'|s,u) V_{k+1}(s', step(q, letter(s')))
///
/// The absorbing state carries the label map's default letter and self-loops,
/// which values it at zero for safety and pre-acceptance reach-avoid runs
/// while keeping already-accepted runs accepted. Ties pick the lowest input
/// index. Values are deterministic for any worker count.
inline SynthesisResult value_iterate(const FiniteMdp& mdp, const HorizonSpec& spec,
                                     const SynthesisOptions& opts = {}) {
  spec.validate();
  auto ps = detail::product_spec(spec);
  const Dfa& dfa = ps.dfa;
  const LabelMap& labels = ps.labels;

  SynthesisResult res{ValueFunction{}, ProductPolicy{}, dfa, labels, {}};
  if (opts.grid) {
    detail::check_region_alignment(*opts.grid, spec.safe, "safe set",
                                   opts.strict_regions, res.warnings);
    detail::check_region_alignment(*opts.grid, spec.target, "target set",
                                   opts.strict_regions, res.warnings);
  }

  const std::int64_t n_grid = mdp.n_grid_states();
  const std::int64_t n_states = mdp.n_states();
  const int n_locs = dfa.n_locations();
  const int T = spec.horizon;

  // letter index per state; the absorbing state reads the default letter
  std::vector<int> letter(std::size_t(n_states));
  for (std::int64_t s = 0; s < n_grid; ++s)
    letter[std::size_t(s)] = dfa.letter_index(labels.label(mdp.state_representative(s)));
  letter[std::size_t(n_grid)] = dfa.letter_index(labels.default_letter());

  // successor location per (state, location): q' = step(q, letter(state))
  std::vector<int> succ_loc(std::size_t(n_states) * n_locs);
  for (std::int64_t s = 0; s < n_states; ++s)
    for (int q = 0; q < n_locs; ++q)
      succ_loc[std::size_t(s * n_locs + q)] = dfa.step(q, letter[std::size_t(s)]);

  auto& vf = res.value;
  auto& pol = res.policy;
  vf.horizon = T;
  vf.n_states = n_states;
  vf.n_locations = n_locs;
  vf.descriptor = to_string(spec.kind) + " T_d=" + std::to_string(T);
  vf.v.assign(std::size_t(T) + 1, std::vector<double>(std::size_t(n_states * n_locs)));
  pol.horizon = T;
  pol.n_states = n_states;
  pol.n_locations = n_locs;
  pol.input.assign(std::size_t(T) + 1,
                   std::vector<std::int32_t>(std::size_t(n_states * n_locs), 0));

  auto& terminal = vf.v[std::size_t(T)];
  for (std::int64_t s = 0; s < n_states; ++s)
    for (int q = 0; q < n_locs; ++q)
      terminal[std::size_t(s * n_locs + q)] = dfa.is_accepting(q) ? 1.0 : 0.0;

  for (int k = T - 1; k >= 0; --k) {
    const auto& next = vf.v[std::size_t(k) + 1];
    auto& cur = vf.v[std::size_t(k)];
    auto& cur_pol = pol.input[std::size_t(k)];

    // absorbing state: probability-one self-loop through its default letter
    for (int q = 0; q < n_locs; ++q) {
      const int q2 = succ_loc[std::size_t(n_grid * n_locs + q)];
      cur[std::size_t(n_grid * n_locs + q)] = next[std::size_t(n_grid * n_locs + q2)];
    }

    parallel_for(
        n_grid,
        [&](std::int64_t begin, std::int64_t end) {
          for (std::int64_t s = begin; s < end; ++s) {
            for (int q = 0; q < n_locs; ++q) {
              double best = -1.0;
              std::int32_t best_u = 0;
              for (int u = 0; u < mdp.n_inputs(); ++u) {
                const auto row = mdp.row(s, u);
                double acc = 0.0;
                for (std::int64_t i = 0; i < row.nnz; ++i) {
                  const std::int64_t sp = row.dst[i];
                  const int qp = succ_loc[std::size_t(sp * n_locs + q)];
                  acc += row.prob[i] * next[std::size_t(sp * n_locs + qp)];
                }
                if (row.absorbing > 0.0) {
                  const int qp = succ_loc[std::size_t(n_grid * n_locs + q)];
                  acc += row.absorbing * next[std::size_t(n_grid * n_locs + qp)];
                }
                if (acc > best) {
                  best = acc;
                  best_u = std::int32_t(u);
                }
              }
              cur[std::size_t(s * n_locs + q)] = std::min(1.0, std::max(0.0, best));
              cur_pol[std::size_t(s * n_locs + q)] = best_u;
            }
          }
        },
        opts.threads);
  }

  // sanity: values live in [0,1]; safety values shrink as horizon grows
  for (const auto& layer : vf.v)
    for (double x : layer)
      if (!(x >= 0.0 && x <= 1.0))
        throw std::logic_error("value iteration produced a value outside [0,1]");
  if (spec.kind == SpecKind::Safety) {
    for (int k = 0; k < T; ++k)
      for (std::size_t i = 0; i < vf.v[std::size_t(k)].size(); ++i)
        if (vf.v[std::size_t(k)][i] > vf.v[std::size_t(k) + 1][i] + 1e-12)
          throw std::logic_error("safety values must be nonincreasing in remaining horizon");
  }
  return res;
}

/// Exact oracle for tiny instances: dense memoized recursion over the product
/// tree with its own label handling. Independent of the sparse backward pass
/// above; refuses anything that is not tiny.
inline SynthesisResult brute_force_value(const FiniteMdp& mdp, const HorizonSpec& spec,
                                         int max_horizon = 6,
                                         std::int64_t max_states = 8) {
  spec.validate();
  if (spec.horizon > max_horizon || mdp.n_grid_states() > max_states)
    throw std::invalid_argument("brute_force_value: instance too large for the oracle");

  auto ps = detail::product_spec(spec);
  const Dfa& dfa = ps.dfa;
  const LabelMap& labels = ps.labels;
  const std::int64_t n_states = mdp.n_states();
  const std::int64_t n_grid = mdp.n_grid_states();
  const int n_locs = dfa.n_locations();
  const int T = spec.horizon;

  // dense transition tensor including the absorbing row
  std::vector<std::vector<std::vector<double>>> dense(
      std::size_t(mdp.n_inputs()),
      std::vector<std::vector<double>>(std::size_t(n_states),
                                       std::vector<double>(std::size_t(n_states), 0.0)));
  for (int u = 0; u < mdp.n_inputs(); ++u) {
    for (std::int64_t s = 0; s < n_grid; ++s) {
      const auto row = mdp.row(s, u);
      for (std::int64_t i = 0; i < row.nnz; ++i)
        dense[std::size_t(u)][std::size_t(s)][std::size_t(row.dst[i])] += row.prob[i];
      dense[std::size_t(u)][std::size_t(s)][std::size_t(n_grid)] += row.absorbing;
    }
    dense[std::size_t(u)][std::size_t(n_grid)][std::size_t(n_grid)] = 1.0;
  }

  auto letter_of = [&](std::int64_t s) {
    return s == n_grid ? dfa.letter_index(labels.default_letter())
                       : dfa.letter_index(labels.label(mdp.state_representative(s)));
  };

  constexpr double kUnset = -1.0;
  std::vector<std::vector<double>> memo(
      std::size_t(T) + 1, std::vector<double>(std::size_t(n_states * n_locs), kUnset));

  // value(k, s, q): q has consumed labels of y(0..k) already
  auto value = [&](auto&& self, int k, std::int64_t s, int q) -> double {
    double& slot = memo[std::size_t(k)][std::size_t(s * n_locs + q)];
    if (slot != kUnset) return slot;
    if (k == T) return slot = dfa.is_accepting(q) ? 1.0 : 0.0;
    double best = 0.0;
    for (int u = 0; u < mdp.n_inputs(); ++u) {
      double acc = 0.0;
      for (std::int64_t sp = 0; sp < n_states; ++sp) {
        const double p = dense[std::size_t(u)][std::size_t(s)][std::size_t(sp)];
        if (p == 0.0) continue;
        acc += p * self(self, k + 1, sp, dfa.step(q, letter_of(sp)));
      }
      best = std::max(best, acc);
    }
    return slot = best;
  };

  SynthesisResult res{ValueFunction{}, ProductPolicy{}, dfa, labels, {}};
  res.value.horizon = T;
  res.value.n_states = n_states;
  res.value.n_locations = n_locs;
  res.value.descriptor = "oracle " + to_string(spec.kind);
  res.value.v.assign(std::size_t(T) + 1,
                     std::vector<double>(std::size_t(n_states * n_locs), 0.0));
  for (int k = T; k >= 0; --k)
    for (std::int64_t s = 0; s < n_states; ++s)
      for (int q = 0; q < n_locs; ++q)
        res.value.v[std::size_t(k)][std::size_t(s * n_locs + q)] =
            value(value, k, s, q);
  res.policy.horizon = T;
  res.policy.n_states = n_states;
  res.policy.n_locations = n_locs;
  res.policy.input.assign(std::size_t(T) + 1,
                          std::vector<std::int32_t>(std::size_t(n_states * n_locs), 0));
  return res;
}

/// Concrete state-feedback controller: quantize the state, track the
/// specification automaton from observed output labels, look up the abstract
/// input, and refine it through the interface function. Outside the gridded
/// domain (or after acceptance) the designated fallback input is held.
class ConcreteController {
 public:
  ConcreteController(Grid grid, InputSet inputs, ProductPolicy policy, Dfa dfa,
                     LabelMap labels, MatrixXd output_map, VectorXd fallback,
                     InterfaceMode mode = InterfaceMode::Identity,
                     std::optional<QuadraticSsf> ssf = std::nullopt)
      : grid_(std::move(grid)),
        inputs_(std::move(inputs)),
        policy_(std::move(policy)),
        dfa_(std::move(dfa)),
        labels_(std::move(labels)),
        output_map_(std::move(output_map)),
        fallback_(std::move(fallback)),
        mode_(mode),
        ssf_(std::move(ssf)) {
    if (policy_.n_states != grid_.n_cells() + 1)
      throw std::invalid_argument("controller: policy does not match the grid");
    if (policy_.n_locations != dfa_.n_locations())
      throw std::invalid_argument("controller: policy does not match the automaton");
  }

  struct State {
    int location = 0;
    bool left_domain = false;
    bool accepted = false;
  };

  State initial_state() const { return State{dfa_.initial(), false, false}; }

  const VectorXd& fallback() const { return fallback_; }
  const Grid& grid() const { return grid_; }

  /// Input for time step k given the current concrete state. Consumes the
  /// label of the current output first, mirroring the value recursion.
  VectorXd input(int k, const VectorXd& x, State& st) const {
    const VectorXd y = output_map_ * x;
    st.location = dfa_.step(st.location, dfa_.letter_index(labels_.label(y)));
    if (dfa_.is_accepting(st.location)) st.accepted = true;
    if (st.accepted) return fallback_;  // accepting-absorbing mode

    const auto cell = grid_.quantize(x);
    if (!cell.inside) {
      st.left_domain = true;
      return fallback_;
    }
    const int kk = std::min(k, policy_.horizon);
    const std::int32_t u_idx = policy_.at(kk, cell.index, st.location);
    const VectorXd& u_hat = inputs_.at(u_idx);
    if (mode_ == InterfaceMode::Identity) return u_hat;
    return interface(x, cell.representative, u_hat, mode_,
                     ssf_ ? &*ssf_ : nullptr);
  }

 private:
  Grid grid_;
  InputSet inputs_;
  ProductPolicy policy_;
  Dfa dfa_;
  LabelMap labels_;
  MatrixXd output_map_;
  VectorXd fallback_;
  InterfaceMode mode_;
  std::optional<QuadraticSsf> ssf_;
};

/// Bind a synthesized product policy to the concrete model.
inline ConcreteController refine_policy(const SynthesisResult& syn, const Grid& grid,
                                        const InputSet& inputs,
                                        const MatrixXd& output_map,
                                        const VectorXd& fallback,
                                        InterfaceMode mode = InterfaceMode::Identity,
                                        std::optional<QuadraticSsf> ssf = std::nullopt) {
  return ConcreteController(grid, inputs, syn.policy, syn.dfa, syn.labels,
                            output_map, fallback, mode, std::move(ssf));
}

}  // namespace prosyn
