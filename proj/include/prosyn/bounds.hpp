#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prosyn/grid.hpp"
#include "prosyn/model.hpp"

namespace prosyn {

// ---------------------------------------------------------------------------
// Kernel Lipschitz constants and the probability-difference bound
// ---------------------------------------------------------------------------

struct LipschitzData {
  double H = 0.0;     ///< policy-fixed kernel constant
  double Hbar = 0.0;  ///< state-and-input kernel constant
  double Lb = 1.0;    ///< Lebesgue-measure factor, caller-supplied
};

/// Kernel density Lipschitz constants for a linear-Gaussian model:
/// H = sum_ij 2|a_ij| / (sigma_i sqrt(2 pi)), Hbar adds the same sum over B.
/// The effective A is evaluated at u_ref when the model carries an
/// input-dependent gain. Diverges for deterministic coordinates.
inline LipschitzData lipschitz_constants(const LinearDtScs& model,
                                         const VectorXd& u_ref) {
  for (Eigen::Index i = 0; i < model.R.size(); ++i)
    if (model.R[i] <= 0.0)
      throw std::invalid_argument(
          "lipschitz_constants: unsupported for zero noise std (constants diverge)");
  const MatrixXd A = model.effective_A(u_ref);
  const double inv_sqrt2pi = 0.3989422804014326779;
  LipschitzData out;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double scale = 2.0 * inv_sqrt2pi / model.R[i];
    for (Eigen::Index j = 0; j < A.cols(); ++j) out.H += scale * std::abs(A(i, j));
    for (Eigen::Index j = 0; j < model.B.cols(); ++j)
      out.Hbar += scale * std::abs(model.B(i, j));
  }
  out.Hbar += out.H;
  return out;
}

inline LipschitzData lipschitz_constants(const LinearDtScs& model) {
  return lipschitz_constants(model, VectorXd::Zero(model.input_dim()));
}

enum class BoundKind { Lambda1, Lambda1Bar, Lambda1Bar2, Lambda2 };

inline std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::Lambda1: return "lambda1";
    case BoundKind::Lambda1Bar: return "lambda1_bar";
    case BoundKind::Lambda1Bar2: return "2lambda1_bar";
    case BoundKind::Lambda2: return "lambda2";
  }
  return "?";
}

struct ClosenessReport {
  BoundKind kind = BoundKind::Lambda1;
  double value = 0.0;
  std::map<std::string, double> constants;
  std::optional<double> epsilon;
  std::optional<double> horizon;
  std::string note;
};

/// Probability-difference bound: horizon * delta * (kernel constant) * Lb.
/// Pass H for the policy-fixed bound, Hbar for the optimal-value bound; the
/// doubled variant covers running the abstract-optimal policy on the
/// concrete system.
inline ClosenessReport lambda1(double kernel_constant, double delta, double horizon,
                               double Lb, BoundKind kind = BoundKind::Lambda1) {
  if (kernel_constant < 0 || delta < 0 || horizon < 0 || Lb < 0)
    throw std::invalid_argument("lambda1: arguments must be nonnegative");
  ClosenessReport rep;
  rep.kind = kind;
  const double base = horizon * delta * kernel_constant * Lb;
  rep.value = (kind == BoundKind::Lambda1Bar2) ? 2.0 * base : base;
  rep.constants = {{"kernel_constant", kernel_constant},
                   {"delta", delta},
                   {"T_d", horizon},
                   {"L_b", Lb}};
  rep.horizon = horizon;
  return rep;
}

// ---------------------------------------------------------------------------
// Stochastic simulation functions and the trajectory-deviation bound
// ---------------------------------------------------------------------------

/// Class-K function restricted to the power family k * s^p.
struct PowerForm {
  double k = 0.0;
  double p = 1.0;

  double operator()(double s) const { return k == 0.0 ? 0.0 : k * std::pow(s, p); }
  bool is_zero() const { return k == 0.0; }

  static PowerForm zero() { return {0.0, 1.0}; }
  static PowerForm quadratic(double k) { return {k, 2.0}; }
};

/// Simulation-function data: V decays as E[V+] <= kappa V + rho_ext(|u_hat|) + psi,
/// with alpha lower-bounding V against the output distance.
struct SsfParams {
  PowerForm alpha = PowerForm::quadratic(1.0);
  double kappa = 0.5;
  PowerForm rho_ext = PowerForm::zero();
  double psi = 0.0;

  void validate() const {
    if (!(alpha.k > 0.0)) throw std::invalid_argument("ssf: alpha coefficient must be > 0");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("ssf: kappa must be in (0,1)");
    if (!(psi >= 0.0)) throw std::invalid_argument("ssf: psi must be >= 0");
    if (rho_ext.k < 0.0) throw std::invalid_argument("ssf: rho_ext coefficient must be >= 0");
  }
};

/// Probability that the coupled outputs drift at least eps apart within T
/// steps, from simulation-function data. Case split on whether the level
/// alpha(eps) dominates the steady disturbance psi_hat/(1-kappa); the result
/// is clamped to [0,1].
inline ClosenessReport lambda2(const SsfParams& ssf, double V0, double u_hat_sup,
                               double eps, double T) {
  ssf.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("lambda2: eps must be > 0");
  if (!(V0 >= 0.0) || !std::isfinite(V0) || !std::isfinite(u_hat_sup) || T < 0)
    throw std::invalid_argument("lambda2: bad arguments");
  const double a_eps = ssf.alpha(eps);
  if (!(a_eps > 0.0)) throw std::invalid_argument("lambda2: alpha(eps) must be > 0");
  const double psi_hat = ssf.rho_ext(u_hat_sup) + ssf.psi;

  ClosenessReport rep;
  rep.kind = BoundKind::Lambda2;
  rep.epsilon = eps;
  rep.horizon = T;
  double v;
  if (a_eps >= psi_hat / (1.0 - ssf.kappa)) {
    v = 1.0 - (1.0 - V0 / a_eps) * std::pow(1.0 - psi_hat / a_eps, T);
    rep.note = "level branch";
  } else {
    v = (V0 / a_eps) * std::pow(ssf.kappa, T) +
        (psi_hat / ((1.0 - ssf.kappa) * a_eps)) * (1.0 - std::pow(ssf.kappa, T));
    rep.note = "contraction branch";
  }
  rep.value = std::clamp(v, 0.0, 1.0);
  rep.constants = {{"V0", V0},
                   {"psi_hat", psi_hat},
                   {"alpha_eps", a_eps},
                   {"kappa", ssf.kappa},
                   {"T", T}};
  return rep;
}

// ---------------------------------------------------------------------------
// Quadratic simulation functions for linear systems
// ---------------------------------------------------------------------------

/// Candidate quadratic simulation function V(x, x_hat) = (x - P x_hat)^T M (x - P x_hat)
/// together with the interface data (K, Q, optional input lift S) and the
/// decrease constants (pi, kappa_hat).
struct QuadraticSsf {
  MatrixXd M;  // n x n, symmetric positive definite
  MatrixXd P;  // n x n_hat
  MatrixXd K;  // m x n
  MatrixXd Q;  // m x n_hat
  std::optional<MatrixXd> S;  // m x m_hat input lift; identity when dims agree
  double pi = 1.0;
  double kappa_hat = 0.5;
};

struct ConditionResult {
  std::string name;
  bool pass = false;
  double margin = 0.0;  ///< smallest eigenvalue or tolerance minus residual
};

struct SsfCheckReport {
  bool ok = false;
  std::vector<ConditionResult> conditions;
  std::optional<SsfParams> derived;
  std::string notes;

  const ConditionResult& condition(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw std::out_of_range("no such condition: " + name);
  }
};

namespace detail {

inline void require_symmetric(const MatrixXd& M, const std::string& what) {
  if (M.rows() != M.cols() ||
      (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + M.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(what + " must be symmetric");
}

inline double min_eigenvalue(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sym + sym.transpose()));
  return es.eigenvalues().minCoeff();
}

inline double max_generalized_eigenvalue(const MatrixXd& lhs, const MatrixXd& rhs) {
  // largest lambda with lhs v = lambda rhs v, rhs positive definite
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(
      0.5 * (lhs + lhs.transpose()), 0.5 * (rhs + rhs.transpose()));
  return es.eigenvalues().maxCoeff();
}

}  // namespace detail

/// Verify a candidate quadratic simulation function between a concrete
/// linear model and a (possibly reduced-order) abstract linear model:
///   (metric)      C^T C <= M
///   (decrease)    (1+pi)(A+BK)^T M (A+BK) - M <= -kappa_hat M
///   (embedding)   A P = P A_hat - B Q
///   (output)      C P = C_hat
/// Positive semidefiniteness is decided with pivot tolerance 1e-10 scaled by
/// the operand size; matrix equalities with tol = 1e-9 (1 + |operands|).
/// On success the report carries derived SsfParams.
inline SsfCheckReport verify_quadratic_ssf(const LinearDtScs& model,
                                           const LinearDtScs& abstract_model,
                                           const QuadraticSsf& cand) {
  detail::require_symmetric(cand.M, "quadratic ssf: M");
  const MatrixXd& A = model.A;
  const MatrixXd& B = model.B;
  const MatrixXd& C = model.C;
  const MatrixXd& Ahat = abstract_model.A;
  const MatrixXd& Chat = abstract_model.C;
  const auto n = A.rows();
  const auto nhat = Ahat.rows();
  if (cand.M.rows() != n || cand.P.rows() != n || cand.P.cols() != nhat ||
      cand.K.rows() != B.cols() || cand.K.cols() != n || cand.Q.rows() != B.cols() ||
      cand.Q.cols() != nhat || Chat.rows() != C.rows())
    throw std::invalid_argument("quadratic ssf: dimension mismatch");
  if (!(cand.pi > 0.0) || !(cand.kappa_hat > 0.0 && cand.kappa_hat < 1.0))
    throw std::invalid_argument("quadratic ssf: need pi > 0 and kappa_hat in (0,1)");

  SsfCheckReport rep;
  const double psd_tol = 1e-10;

  {
    const MatrixXd G = cand.M - C.transpose() * C;
    const double m = detail::min_eigenvalue(G);
    rep.conditions.push_back(
        {"metric", m >= -psd_tol * (1.0 + cand.M.norm()), m});
  }
  {
    const MatrixXd Acl = A + B * cand.K;
    const MatrixXd G = -cand.kappa_hat * cand.M -
                       ((1.0 + cand.pi) * Acl.transpose() * cand.M * Acl - cand.M);
    const double m = detail::min_eigenvalue(G);
    rep.conditions.push_back(
        {"decrease", m >= -psd_tol * (1.0 + cand.M.norm()), m});
  }
  {
    const MatrixXd Rres = A * cand.P - cand.P * Ahat + B * cand.Q;
    const double tol = 1e-9 * (1.0 + A.norm() + cand.P.norm() + Ahat.norm() +
                               B.norm() + cand.Q.norm());
    const double resid = Rres.cwiseAbs().maxCoeff();
    rep.conditions.push_back({"embedding", resid <= tol, tol - resid});
  }
  {
    const MatrixXd Rres = C * cand.P - Chat;
    const double tol = 1e-9 * (1.0 + C.norm() + cand.P.norm() + Chat.norm());
    const double resid = Rres.cwiseAbs().maxCoeff();
    rep.conditions.push_back({"output", resid <= tol, tol - resid});
  }

  rep.ok = true;
  for (const auto& c : rep.conditions) rep.ok = rep.ok && c.pass;

  if (rep.ok) {
    SsfParams derived;
    // alpha: largest k with k |Cx - Chat xhat|^2 <= V, via the largest
    // generalized eigenvalue of C^T C against M (conservative).
    const double lam = detail::max_generalized_eigenvalue(C.transpose() * C, cand.M);
    derived.alpha = PowerForm::quadratic(lam > 0.0 ? 1.0 / lam : 1.0);
    derived.kappa = (1.0 - cand.kappa_hat) / (1.0 + cand.pi);
    derived.rho_ext = PowerForm::zero();
    // noise floor: trace(R^T M R) + trace(Rhat^T P^T M P Rhat) with diagonal R
    const MatrixXd Rm = model.R.asDiagonal();
    const MatrixXd Rh = abstract_model.R.asDiagonal();
    derived.psi = (Rm.transpose() * cand.M * Rm).trace() +
                  (Rh.transpose() * cand.P.transpose() * cand.M * cand.P * Rh).trace();
    derived.validate();
    rep.derived = derived;
    rep.notes =
        "rho_ext set to zero: valid when the input lift satisfies B S = P B_hat "
        "or the abstract input is held at zero";
  }
  return rep;
}

/// Largest kappa_bar in (0,1] with A^T M A <= (1 - kappa_bar) M, i.e. the
/// expected quadratic contraction rate between any two solution processes
/// driven by shared noise. Input-dependent gains make A input-coupled and
/// are not supported here.
inline std::pair<bool, double> check_delta_iss_quadratic(const LinearDtScs& model,
                                                         const MatrixXd& M) {
  if (model.gain || !model.diag_gains.empty())
    throw std::invalid_argument(
        "delta-iss check: unsupported with input-dependent gain (A depends on u)");
  detail::require_symmetric(M, "delta-iss check: M");
  if (detail::min_eigenvalue(M) <= 0.0)
    throw std::invalid_argument("delta-iss check: M must be positive definite");
  const double lam =
      detail::max_generalized_eigenvalue(model.A.transpose() * M * model.A, M);
  const double kappa_bar = 1.0 - lam;
  return {kappa_bar > 0.0, kappa_bar};
}

enum class InterfaceMode { Identity, Affine };

/// Refine an abstract input to a concrete one. Identity mode passes the
/// abstract input through (grid abstractions of the same dimension); affine
/// mode applies u = K (x - P x_hat) + Q x_hat + S u_hat.
inline VectorXd interface(const VectorXd& x, const VectorXd& x_hat,
                          const VectorXd& u_hat, InterfaceMode mode,
                          const QuadraticSsf* ssf = nullptr) {
  if (mode == InterfaceMode::Identity) {
    if (x.size() != x_hat.size())
      throw std::invalid_argument("interface: identity mode needs equal state dims");
    return u_hat;
  }
  if (!ssf) throw std::invalid_argument("interface: affine mode needs ssf data");
  if (ssf->P.rows() != x.size() || ssf->P.cols() != x_hat.size() ||
      ssf->K.cols() != x.size())
    throw std::invalid_argument("interface: dimension mismatch");
  VectorXd u = ssf->K * (x - ssf->P * x_hat) + ssf->Q * x_hat;
  if (ssf->S) {
    if (ssf->S->cols() != u_hat.size() || ssf->S->rows() != u.size())
      throw std::invalid_argument("interface: input lift dimension mismatch");
    u += *ssf->S * u_hat;
  } else {
    if (u_hat.size() != u.size())
      throw std::invalid_argument("interface: abstract input dimension mismatch (provide S)");
    u += u_hat;
  }
  return u;
}

/// Simulation-function data for a grid (quantization) abstraction of a
/// contractive linear model, with V(x, x_hat) = (x - x_hat)^T M (x - x_hat).
/// The quantization error enters through the Young-inequality split:
/// kappa = (1+pi) lambda_max(A^T M A, M), psi = (1+1/pi) lambda_max(M) n delta^2.
inline SsfParams quantization_ssf_params(const LinearDtScs& model, const Grid& grid,
                                         const MatrixXd& M, double pi) {
  if (!(pi > 0.0)) throw std::invalid_argument("quantization ssf: pi must be > 0");
  auto [holds, kappa_bar] = check_delta_iss_quadratic(model, M);
  const double contraction = 1.0 - kappa_bar;  // lambda_max(A^T M A, M)
  SsfParams p;
  p.kappa = (1.0 + pi) * contraction;
  if (!holds || p.kappa >= 1.0)
    throw std::invalid_argument(
        "quantization ssf: model not contractive enough for the chosen pi");
  const double lam_max_M = -detail::min_eigenvalue(-M);
  const double delta = grid.delta();
  p.psi = (1.0 + 1.0 / pi) * lam_max_M * double(model.state_dim()) * delta * delta;
  // alpha: k |y - y_hat|_inf^2 <= V for the identity-grid case (C = I):
  // use the smallest eigenvalue of M.
  p.alpha = PowerForm::quadratic(detail::min_eigenvalue(M));
  p.rho_ext = PowerForm::zero();
  p.validate();
  return p;
}

}  // namespace prosyn
