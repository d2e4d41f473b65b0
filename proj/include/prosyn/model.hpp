#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prosyn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Axis-aligned hyper-rectangle, closed on both sides.
struct Box {
  VectorXd lower;
  VectorXd upper;

  Box() = default;
  Box(VectorXd lo, VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    validate();
  }
  static Box scalar(double lo, double hi) {
    return Box(VectorXd::Constant(1, lo), VectorXd::Constant(1, hi));
  }

  void validate() const {
    if (lower.size() != upper.size())
      throw std::invalid_argument("Box: lower/upper dimension mismatch");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]))
        throw std::invalid_argument("Box: lower > upper in dimension " +
                                    std::to_string(i));
  }

  int dim() const { return int(lower.size()); }

  bool contains(const VectorXd& x) const {
    if (x.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
    return v;
  }

  /// True when the interiors of two boxes meet (touching faces do not count).
  bool interior_intersects(const Box& other) const {
    if (other.dim() != dim()) return false;
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (std::min(upper[i], other.upper[i]) <= std::max(lower[i], other.lower[i]))
        return false;
    return true;
  }
};

inline bool contains_any(const std::vector<Box>& boxes, const VectorXd& x) {
  for (const auto& b : boxes)
    if (b.contains(x)) return true;
  return false;
}

/// Multiplicative input gain a(u) = 1 - theta - gamma*u applied to the whole
/// state matrix: A_eff(u) = a(u[0]) * A. Covers heater-style models where the
/// contraction rate depends on the actuation level.
struct InputDependentGain {
  double theta = 0.0;
  double gamma = 0.0;

  double a(double u) const { return 1.0 - theta - gamma * u; }

  void validate() const {
    if (!std::isfinite(theta) || !std::isfinite(gamma))
      throw std::invalid_argument("InputDependentGain: non-finite parameter");
  }
};

/// Input-dependent additive term on one diagonal entry of A:
/// A_eff(coord, coord) += 1 - theta - gamma*u[input]. Produced when 1-D
/// gained subsystems are interconnected; a scalar gain cannot express the
/// composed coupling structure.
struct DiagGainEntry {
  int coord = 0;
  int input = 0;
  double theta = 0.0;
  double gamma = 0.0;
};

/// Discrete-time linear/affine stochastic control system with diagonal
/// Gaussian noise:
///
///   x(k+1) = A_eff(u) x(k) + B u(k) + c0 + diag(R) w(k),   y = C x
///
/// where w is a standard-normal vector and R holds per-dimension standard
/// deviations. A zero R entry marks a deterministic coordinate.
class LinearDtScs {
 public:
  MatrixXd A;
  MatrixXd B;
  VectorXd c0;
  MatrixXd C;
  VectorXd R;
  std::optional<InputDependentGain> gain;
  std::vector<DiagGainEntry> diag_gains;

  LinearDtScs() = default;
  LinearDtScs(MatrixXd A_, MatrixXd B_, VectorXd c0_, MatrixXd C_, VectorXd R_,
              std::optional<InputDependentGain> gain_ = std::nullopt)
      : A(std::move(A_)),
        B(std::move(B_)),
        c0(std::move(c0_)),
        C(std::move(C_)),
        R(std::move(R_)),
        gain(gain_) {
    validate();
  }

  static LinearDtScs scalar(double a, double b, double c0v, double r,
                            std::optional<InputDependentGain> g = std::nullopt) {
    return LinearDtScs(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b),
                       VectorXd::Constant(1, c0v), MatrixXd::Identity(1, 1),
                       VectorXd::Constant(1, r), g);
  }

  int state_dim() const { return int(A.rows()); }
  int input_dim() const { return int(B.cols()); }
  int output_dim() const { return int(C.rows()); }

  void validate() const {
    const auto n = A.rows();
    if (A.cols() != n) throw std::invalid_argument("model: A must be square");
    if (B.rows() != n) throw std::invalid_argument("model: B row count != n");
    if (c0.size() != n) throw std::invalid_argument("model: c0 size != n");
    if (C.cols() != n) throw std::invalid_argument("model: C column count != n");
    if (R.size() != n) throw std::invalid_argument("model: R size != n");
    for (Eigen::Index i = 0; i < R.size(); ++i)
      if (!(R[i] >= 0.0))
        throw std::invalid_argument("model: noise std must be >= 0");
    if (gain) gain->validate();
    if (gain && !diag_gains.empty())
      throw std::invalid_argument("model: scalar and diagonal gains are exclusive");
    for (const auto& e : diag_gains) {
      if (e.coord < 0 || e.coord >= n || e.input < 0 || e.input >= B.cols())
        throw std::invalid_argument("model: diagonal gain index out of range");
    }
  }

  /// State matrix once the input-dependent gain (if any) is applied.
  MatrixXd effective_A(const VectorXd& u) const {
    check_input(u);
    if (gain) return gain->a(u.size() > 0 ? u[0] : 0.0) * A;
    if (diag_gains.empty()) return A;
    MatrixXd eff = A;
    for (const auto& e : diag_gains)
      eff(e.coord, e.coord) += 1.0 - e.theta - e.gamma * u[e.input];
    return eff;
  }

  /// One-step map x+ = A_eff(u) x + B u + c0 + diag(R) w.
  VectorXd step(const VectorXd& x, const VectorXd& u, const VectorXd& w) const {
    check_state(x);
    if (w.size() != A.rows())
      throw std::invalid_argument("model: noise vector dimension mismatch");
    return effective_A(u) * x + B * u + c0 + R.cwiseProduct(w);
  }

  /// Mean and per-dimension std of the one-step transition kernel.
  struct KernelMoments {
    VectorXd mean;
    VectorXd std;
  };
  KernelMoments kernel_mean_std(const VectorXd& x, const VectorXd& u) const {
    check_state(x);
    return {effective_A(u) * x + B * u + c0, R};
  }

  VectorXd output(const VectorXd& x) const { return C * x; }

 private:
  void check_state(const VectorXd& x) const {
    if (x.size() != A.rows())
      throw std::invalid_argument("model: state dimension mismatch");
  }
  void check_input(const VectorXd& u) const {
    if (u.size() != B.cols())
      throw std::invalid_argument("model: input dimension mismatch");
  }
};

}  // namespace prosyn
