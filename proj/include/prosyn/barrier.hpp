#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosyn/model.hpp"
#include "prosyn/parallel.hpp"
#include "prosyn/stats.hpp"

namespace prosyn {

/// Multivariate polynomial as a list of monomials (exponent vector +
/// coefficient). Total degree is capped at 6 so expected values stay in the
/// closed-form Gaussian moment range.
struct Polynomial {
  struct Monomial {
    std::vector<int> powers;
    double coeff = 0.0;
  };

  int n_vars = 1;
  std::vector<Monomial> terms;

  static Polynomial quadratic_1d(double a2, double a1, double a0) {
    Polynomial p;
    p.n_vars = 1;
    p.terms = {{{2}, a2}, {{1}, a1}, {{0}, a0}};
    return p;
  }

  /// k * sum_d (x_d - v_d)^2, the vertex form used by the certificate sweep.
  static Polynomial vertex_quadratic(const VectorXd& vertex, double k) {
    Polynomial p;
    p.n_vars = int(vertex.size());
    for (int d = 0; d < p.n_vars; ++d) {
      std::vector<int> sq(std::size_t(p.n_vars), 0), lin(std::size_t(p.n_vars), 0);
      sq[std::size_t(d)] = 2;
      lin[std::size_t(d)] = 1;
      p.terms.push_back({sq, k});
      p.terms.push_back({lin, -2.0 * k * vertex[d]});
      p.terms.push_back({std::vector<int>(std::size_t(p.n_vars), 0),
                         k * vertex[d] * vertex[d]});
    }
    return p;
  }

  int total_degree() const {
    int deg = 0;
    for (const auto& t : terms) {
      int d = 0;
      for (int e : t.powers) d += e;
      deg = std::max(deg, d);
    }
    return deg;
  }

  void validate() const {
    for (const auto& t : terms) {
      if (int(t.powers.size()) != n_vars)
        throw std::invalid_argument("polynomial: exponent vector dimension mismatch");
      for (int e : t.powers)
        if (e < 0) throw std::invalid_argument("polynomial: negative exponent");
      if (!std::isfinite(t.coeff))
        throw std::invalid_argument("polynomial: non-finite coefficient");
    }
  }

  double eval(const VectorXd& x) const {
    double sum = 0.0;
    for (const auto& t : terms) {
      double m = t.coeff;
      for (int d = 0; d < n_vars; ++d)
        for (int e = 0; e < t.powers[std::size_t(d)]; ++e) m *= x[d];
      sum += m;
    }
    return sum;
  }
};

/// Affine state-feedback controller u(x) = K1 x + k0, optionally clamped to
/// an input box.
struct AffineController {
  MatrixXd K1;
  VectorXd k0;
  std::optional<Box> input_box;

  VectorXd eval(const VectorXd& x) const {
    VectorXd u = K1 * x + k0;
    if (input_box) {
      for (Eigen::Index i = 0; i < u.size(); ++i)
        u[i] = std::clamp(u[i], input_box->lower[i], input_box->upper[i]);
    }
    return u;
  }

  static AffineController scalar(double k1, double k0v,
                                 std::optional<Box> ubox = std::nullopt) {
    AffineController c;
    c.K1 = MatrixXd::Constant(1, 1, k1);
    c.k0 = VectorXd::Constant(1, k0v);
    c.input_box = std::move(ubox);
    return c;
  }
};

/// Barrier certificate candidate: B <= eta on the initial set, B >= beta on
/// the unsafe set, and E[B(x+)] <= max(kappa B(x), c) on the whole domain.
struct BarrierCertificate {
  Polynomial B;
  std::optional<AffineController> controller;
  double eta = 0.0;
  double beta = 1.0;
  double kappa = 1.0;
  double c = 0.0;

  void validate() const {
    B.validate();
    if (!(beta > eta)) throw std::invalid_argument("certificate: requires beta > eta");
    if (!(eta >= 0.0)) throw std::invalid_argument("certificate: eta must be >= 0");
    if (!(kappa > 0.0 && kappa <= 1.0))
      throw std::invalid_argument("certificate: kappa must be in (0,1]");
    if (!(c >= 0.0)) throw std::invalid_argument("certificate: c must be >= 0");
  }
};

/// Exact E[B(f(x,u,noise))] for a polynomial B under the diagonal-Gaussian
/// one-step kernel: per-coordinate raw moments of N(mean_d, std_d) multiply
/// across dimensions by independence.
inline double expected_barrier(const Polynomial& B, const LinearDtScs& model,
                               const VectorXd& x, const VectorXd& u) {
  B.validate();
  if (B.n_vars != model.state_dim())
    throw std::invalid_argument("expected_barrier: polynomial/model dimension mismatch");
  if (B.total_degree() > 6)
    throw std::invalid_argument("expected_barrier: degree > 6 unsupported");
  const auto mom = model.kernel_mean_std(x, u);
  double sum = 0.0;
  for (const auto& t : B.terms) {
    double m = t.coeff;
    for (int d = 0; d < B.n_vars; ++d) {
      const int p = t.powers[std::size_t(d)];
      if (p > 0) m *= normal_raw_moment(p, mom.mean[d], mom.std[d]);
    }
    sum += m;
  }
  return sum;
}

/// Lipschitz constants of the three certificate conditions, used to tighten
/// pointwise grid checks into continuum statements: thresholds shrink by
/// L * h / 2 with h the check-grid spacing.
struct LipschitzMargins {
  double init = 0.0;      // Lipschitz constant of B on the initial set
  double unsafe = 0.0;    // of B on the unsafe set
  double decrease = 0.0;  // of E[B(f(x,u(x),.))] - max(kappa B(x), c) on the domain
};

struct CbcCondition {
  bool pass = false;
  double worst_margin = 0.0;  ///< smallest slack seen; negative = violated
  VectorXd worst_point;
  std::int64_t points_checked = 0;
};

struct CbcReport {
  CbcCondition init;
  CbcCondition unsafe;
  CbcCondition decrease;
  double resolution = 0.0;
  bool continuum_certified = false;  ///< margins included, all conditions pass
  std::string notes;

  bool all_pass() const { return init.pass && unsafe.pass && decrease.pass; }
};

namespace detail {

/// Evaluation points of a box at the given spacing, endpoints included,
/// at least two points per dimension.
inline std::vector<VectorXd> grid_points(const Box& box, double resolution) {
  const int n = box.dim();
  std::vector<std::int64_t> counts(std::size_t(n));
  std::int64_t total = 1;
  for (int d = 0; d < n; ++d) {
    const double len = box.upper[d] - box.lower[d];
    counts[std::size_t(d)] =
        std::max<std::int64_t>(2, std::int64_t(std::ceil(len / resolution)) + 1);
    total *= counts[std::size_t(d)];
  }
  std::vector<VectorXd> pts;
  pts.reserve(std::size_t(total));
  std::vector<std::int64_t> it(std::size_t(n), 0);
  for (;;) {
    VectorXd x(n);
    for (int d = 0; d < n; ++d) {
      const auto c = counts[std::size_t(d)];
      x[d] = box.lower[d] +
             (box.upper[d] - box.lower[d]) * double(it[std::size_t(d)]) / double(c - 1);
    }
    pts.push_back(std::move(x));
    int d = n - 1;
    for (; d >= 0; --d) {
      if (++it[std::size_t(d)] < counts[std::size_t(d)]) break;
      it[std::size_t(d)] = 0;
    }
    if (d < 0) break;
  }
  return pts;
}

/// Worst (smallest) margin of `fn` over the union of boxes; deterministic
/// reduction order regardless of parallelism.
template <class Fn>
CbcCondition worst_margin(const std::vector<Box>& boxes, double resolution, Fn&& fn,
                          int threads) {
  CbcCondition cond;
  cond.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& box : boxes) {
    const auto pts = grid_points(box, resolution);
    std::vector<double> margins(pts.size());
    parallel_for(
        std::int64_t(pts.size()),
        [&](std::int64_t b, std::int64_t e) {
          for (std::int64_t i = b; i < e; ++i)
            margins[std::size_t(i)] = fn(pts[std::size_t(i)]);
        },
        threads);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (margins[i] < cond.worst_margin) {
        cond.worst_margin = margins[i];
        cond.worst_point = pts[i];
      }
    }
    cond.points_checked += std::int64_t(pts.size());
  }
  cond.pass = cond.worst_margin >= 0.0;
  return cond;
}

}  // namespace detail

/// Pointwise certificate check on grids over the initial, unsafe and domain
/// sets. With Lipschitz margins the thresholds are tightened by L*h/2 and a
/// passing report certifies the continuum; without them it certifies the
/// grid only (stated in the report).
inline CbcReport check_cbc(const BarrierCertificate& cand, const LinearDtScs& model,
                           const std::vector<Box>& X0, const std::vector<Box>& Xu,
                           const std::vector<Box>& X, double resolution,
                           std::optional<LipschitzMargins> lipschitz = std::nullopt,
                           int threads = 0) {
  cand.validate();
  if (!(resolution > 0.0)) throw std::invalid_argument("check_cbc: resolution must be > 0");

  const double h2 = resolution / 2.0;
  const double m_init = lipschitz ? lipschitz->init * h2 : 0.0;
  const double m_unsafe = lipschitz ? lipschitz->unsafe * h2 : 0.0;
  const double m_dec = lipschitz ? lipschitz->decrease * h2 : 0.0;

  CbcReport rep;
  rep.resolution = resolution;

  rep.init = detail::worst_margin(
      X0, resolution,
      [&](const VectorXd& x) { return cand.eta - cand.B.eval(x) - m_init; }, threads);
  rep.unsafe = detail::worst_margin(
      Xu, resolution,
      [&](const VectorXd& x) { return cand.B.eval(x) - cand.beta - m_unsafe; }, threads);

  const VectorXd zero_u = VectorXd::Zero(model.input_dim());
  rep.decrease = detail::worst_margin(
      X, resolution,
      [&](const VectorXd& x) {
        const VectorXd u = cand.controller ? cand.controller->eval(x) : zero_u;
        const double eb = expected_barrier(cand.B, model, x, u);
        const double bound = std::max(cand.kappa * cand.B.eval(x), cand.c);
        return bound - eb - m_dec;
      },
      threads);

  rep.continuum_certified = lipschitz.has_value() && rep.all_pass();
  rep.notes = lipschitz ? "thresholds tightened by L*h/2; a pass certifies the continuum"
                        : "pointwise grid check only; no continuum claim";
  return rep;
}

struct KushnerResult {
  double delta_bar = 1.0;
  std::string branch;
};

/// Upper bound on the probability of reaching the unsafe set within the
/// horizon, from certificate constants. For kappa < 1 both the martingale
/// product form and the additive form apply and the smaller one is returned;
/// kappa = 1 only admits the additive form. An infinite horizon requires
/// c = 0 and gives eta/beta.
inline KushnerResult kushner_bound(double eta, double beta, double kappa, double c,
                                   std::optional<double> horizon) {
  if (!(beta > eta) || !(eta >= 0.0))
    throw std::invalid_argument("kushner_bound: requires beta > eta >= 0");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw std::invalid_argument("kushner_bound: kappa must be in (0,1]");
  if (!(c >= 0.0)) throw std::invalid_argument("kushner_bound: c must be >= 0");

  KushnerResult out;
  if (!horizon) {
    if (c != 0.0)
      throw std::invalid_argument("kushner_bound: infinite horizon requires c = 0");
    out.delta_bar = std::clamp(eta / beta, 0.0, 1.0);
    out.branch = "supermartingale ratio (infinite horizon)";
    return out;
  }
  const double T = *horizon;
  if (!(T >= 0.0)) throw std::invalid_argument("kushner_bound: horizon must be >= 0");

  const double additive = (eta + c * T) / beta;
  double best = additive;
  std::string branch = "additive (0 < kappa <= 1)";
  if (kappa < 1.0) {
    // case split at beta >= c/(kappa-1): the right side is nonpositive for
    // kappa < 1, so the product branch fires for every valid input and the
    // other branch is recorded as never firing rather than reinterpreted
    double product;
    if (beta >= c / (kappa - 1.0)) {
      product = 1.0 - (1.0 - eta / beta) * std::pow(1.0 - c / beta, T);
    } else {
      product = (eta / beta) * std::pow(kappa, T) +
                (c / ((1.0 - kappa) * beta)) * (1.0 - std::pow(kappa, T));
    }
    if (product < best) {
      best = product;
      branch = "martingale product (kappa < 1)";
    }
  }
  out.delta_bar = std::clamp(best, 0.0, 1.0);
  out.branch = branch;
  return out;
}

struct CbcSearchSpace {
  std::vector<VectorXd> vertices;   ///< vertex positions of the quadratic
  std::vector<double> coefficients; ///< leading coefficients
  std::vector<double> gains_k1;     ///< affine controller slope (scalar input)
  std::vector<double> offsets_k0;   ///< affine controller offset
  std::vector<double> kappas;       ///< decrease factors to try
  double resolution = 0.05;         ///< decrease-check grid spacing
  double horizon = 10.0;            ///< scoring horizon for the escape bound
  std::optional<Box> input_box;     ///< clamp for the affine controller
};

struct CbcSearchResult {
  BarrierCertificate certificate;
  double delta_bar = 1.0;
};

/// Grid sweep over vertex-form quadratics and affine controllers. For every
/// candidate, eta and beta are the tightest values on the initial/unsafe
/// grids, c is the smallest constant making the decrease condition hold on
/// the domain grid, and candidates are scored by the escape bound. Scalar
/// and planar state spaces only (sweep cost guard).
inline std::optional<CbcSearchResult> search_quadratic_cbc(
    const LinearDtScs& model, const std::vector<Box>& X0, const std::vector<Box>& Xu,
    const std::vector<Box>& X, const CbcSearchSpace& space, int threads = 0) {
  if (model.state_dim() > 2)
    throw std::invalid_argument("search_quadratic_cbc: state dimension > 2");
  if (model.input_dim() > 1)
    throw std::invalid_argument("search_quadratic_cbc: expects a scalar input channel");

  std::vector<std::vector<VectorXd>> pts0, ptsu, ptsx;
  for (const auto& b : X0) pts0.push_back(detail::grid_points(b, space.resolution));
  for (const auto& b : Xu) ptsu.push_back(detail::grid_points(b, space.resolution));
  for (const auto& b : X) ptsx.push_back(detail::grid_points(b, space.resolution));

  std::optional<CbcSearchResult> best;
  for (const auto& v : space.vertices) {
    for (double k : space.coefficients) {
      const Polynomial B = Polynomial::vertex_quadratic(v, k);
      double eta = 0.0;
      for (const auto& grp : pts0)
        for (const auto& x : grp) eta = std::max(eta, B.eval(x));
      double beta = std::numeric_limits<double>::infinity();
      for (const auto& grp : ptsu)
        for (const auto& x : grp) beta = std::min(beta, B.eval(x));
      if (!(beta > eta)) continue;

      for (double k1 : space.gains_k1) {
        for (double k0 : space.offsets_k0) {
          AffineController ctrl;
          ctrl.K1 = MatrixXd::Constant(1, model.state_dim(), k1);
          ctrl.k0 = VectorXd::Constant(1, k0);
          ctrl.input_box = space.input_box;
          for (double kappa : space.kappas) {
            // smallest c that closes the decrease condition on the grid
            double c_req = 0.0;
            bool feasible = true;
            for (const auto& grp : ptsx) {
              for (const auto& x : grp) {
                const double eb = expected_barrier(B, model, x, ctrl.eval(x));
                if (eb > kappa * B.eval(x)) c_req = std::max(c_req, eb);
                if (!std::isfinite(eb)) feasible = false;
              }
            }
            if (!feasible) continue;
            const auto score = kushner_bound(eta, beta, kappa, c_req, space.horizon);
            if (!best || score.delta_bar < best->delta_bar) {
              BarrierCertificate cert;
              cert.B = B;
              cert.controller = ctrl;
              cert.eta = eta;
              cert.beta = beta;
              cert.kappa = kappa;
              cert.c = c_req;
              best = CbcSearchResult{cert, score.delta_bar};
            }
          }
        }
      }
    }
  }
  (void)threads;
  return best;
}

}  // namespace prosyn
