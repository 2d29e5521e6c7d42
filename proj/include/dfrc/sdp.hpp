/**
 * @file dfrc/sdp.hpp
 * @brief Small dense primal barrier (interior-point) solver for convex
 *        quadratic programs over Hermitian matrix blocks.
 *
 * Problem form, with every Hermitian block X_b given by a real
 * parameterization x_b:
 *
 *     minimize    0.5 x^T Q x + q^T x + c
 *     subject to  C_j + sum_b s_jb X_b(x)  >= 0     (linear matrix inequalities)
 *                 a_i^T x + c_i            >  0     (affine inequalities)
 *
 * The start must satisfy every LMI strictly. Affine inequalities may be
 * violated at the start; a phase-I problem with one slack variable then
 * either finds a strictly feasible point or proves infeasibility.
 *
 * Each centering step is a Newton method on t f(x) - sum log det(.) -
 * sum log(.), which is self-concordant, so full steps are taken once the
 * Newton decrement drops below 1/4.
 */
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dfrc/errors.hpp"
#include "dfrc/numerics.hpp"

namespace dfrc::sdp {

struct BasisEntry {
  int row = 0;
  int col = 0;
  Complex coef;
};

/// Real coordinates for an n x n Hermitian matrix.
///
/// Parameter order: the n diagonal entries (unless pinned), then for every
/// pair a < b the real and imaginary parts of X(a, b).
class HermitianParameterization {
 public:
  static HermitianParameterization free(int n) {
    HermitianParameterization p;
    p.n_ = n;
    p.offset_ = ComplexMatrix::Zero(n, n);
    for (int a = 0; a < n; ++a) p.basis_.push_back({1, {{{a, a, 1.0}, {}}}});
    p.add_off_diagonal();
    return p;
  }

  /// Diagonal fixed to `diag`; only off-diagonal entries are free.
  static HermitianParameterization pinned_diagonal(const RealVector& diag) {
    HermitianParameterization p;
    p.n_ = static_cast<int>(diag.size());
    p.offset_ = ComplexMatrix::Zero(p.n_, p.n_);
    p.offset_.diagonal() = diag.cast<Complex>();
    p.add_off_diagonal();
    return p;
  }

  int dim() const { return n_; }
  int size() const { return static_cast<int>(basis_.size()); }
  const ComplexMatrix& offset() const { return offset_; }

  int entry_count(int i) const { return basis_[i].count; }
  const BasisEntry& entry(int i, int e) const { return basis_[i].entries[e]; }

  template <typename Vec>
  ComplexMatrix assemble(const Vec& x) const {
    ComplexMatrix m = offset_;
    for (int i = 0; i < size(); ++i) {
      for (int e = 0; e < basis_[i].count; ++e) {
        const auto& be = basis_[i].entries[e];
        m(be.row, be.col) += x[i] * be.coef;
      }
    }
    return m;
  }

  /// Inverse of assemble for a Hermitian input (pinned diagonal ignored).
  RealVector parameters_of(const ComplexMatrix& m) const {
    RealVector x(size());
    for (int i = 0; i < size(); ++i) {
      const auto& be = basis_[i].entries[0];
      const Complex v = m(be.row, be.col);
      x(i) = be.coef == Complex(1.0, 0.0) ? v.real() : v.imag();
    }
    return x;
  }

  /// c with Re tr(C X(x)) = c^T x + Re tr(C offset).
  RealVector functional(const ComplexMatrix& c) const {
    RealVector out(size());
    for (int i = 0; i < size(); ++i) {
      Complex acc = 0.0;
      for (int e = 0; e < basis_[i].count; ++e) {
        const auto& be = basis_[i].entries[e];
        acc += be.coef * c(be.col, be.row);
      }
      out(i) = acc.real();
    }
    return out;
  }

  double offset_functional(const ComplexMatrix& c) const {
    return (c * offset_).trace().real();
  }

 private:
  struct Basis {
    int count = 1;
    std::array<BasisEntry, 2> entries;
  };

  void add_off_diagonal() {
    const Complex j(0.0, 1.0);
    for (int a = 0; a < n_; ++a) {
      for (int b = a + 1; b < n_; ++b) {
        basis_.push_back({2, {{{a, b, 1.0}, {b, a, 1.0}}}});
        basis_.push_back({2, {{{a, b, j}, {b, a, -j}}}});
      }
    }
  }

  int n_ = 0;
  ComplexMatrix offset_;
  std::vector<Basis> basis_;
};

/// constant + sum_k sign_k X_{block_k} >= 0. An empty constant means zero.
struct Lmi {
  std::vector<std::pair<int, double>> terms;
  ComplexMatrix constant;
};

/// coefficients^T x + constant > 0, over the global parameter vector.
struct AffineInequality {
  RealVector coefficients;
  double constant = 0.0;
};

struct Problem {
  std::vector<HermitianParameterization> blocks;
  std::vector<Lmi> lmis;
  std::vector<AffineInequality> inequalities;
  RealMatrix quadratic;  ///< Q (may be empty for a linear objective)
  RealVector linear;     ///< q
  double constant = 0.0;

  int num_params() const {
    int n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
  }

  int block_offset(int b) const {
    int off = 0;
    for (int i = 0; i < b; ++i) off += blocks[static_cast<std::size_t>(i)].size();
    return off;
  }

  double objective(const RealVector& x) const {
    double f = constant + linear.dot(x);
    if (quadratic.size() > 0) f += 0.5 * x.dot(quadratic * x);
    return f;
  }

  ComplexMatrix block_value(int b, const RealVector& x) const {
    const auto& blk = blocks[static_cast<std::size_t>(b)];
    return blk.assemble(x.segment(block_offset(b), blk.size()));
  }
};

struct Options {
  double gap_tol = 1e-8;           ///< absolute duality-gap bound nu / t
  double barrier_growth = 50.0;
  int max_newton_steps = 600;
  double newton_tol = 1e-11;       ///< stop centering when lambda^2 / 2 below
  double infeasibility_tol = 1e-9;
};

enum class Status { kOptimal, kInfeasible, kFailed };

struct Result {
  Status status = Status::kFailed;
  RealVector x;
  double objective = 0.0;
  double gap = 0.0;
  int newton_steps = 0;
};

namespace detail {

/// Barrier machinery shared by phase I and phase II. In phase I one extra
/// variable tau is appended: inequalities become a^T x + c + tau > 0, the
/// objective is tau and tau is bounded below by -1.
class Barrier {
 public:
  Barrier(const Problem& p, bool phase1) : p_(p), phase1_(phase1) {
    nx_ = p.num_params();
    n_ = nx_ + (phase1 ? 1 : 0);
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
      offsets_.push_back(p.block_offset(static_cast<int>(b)));
      coords_.push_back(coords_of(p.blocks[b]));
    }
    nu_ = static_cast<double>(p.inequalities.size()) + (phase1 ? 1.0 : 0.0);
    for (const auto& l : p.lmis) {
      nu_ += p.blocks[static_cast<std::size_t>(l.terms.front().first)].dim();
    }
  }

  int size() const { return n_; }
  double nu() const { return nu_; }

  double objective(const RealVector& z) const {
    return phase1_ ? z(nx_) : p_.objective(z.head(nx_));
  }

  /// t f(z) + phi(z); nullopt outside the domain.
  std::optional<double> value(const RealVector& z, double t) const {
    double v = t * objective(z);
    for (const auto& l : p_.lmis) {
      Eigen::LLT<ComplexMatrix> llt(lmi_value(l, z));
      if (llt.info() != Eigen::Success) return std::nullopt;
      const auto d = llt.matrixLLT().diagonal().real();
      if ((d.array() <= 0.0).any()) return std::nullopt;
      v -= 2.0 * d.array().log().sum();
    }
    for (std::size_t i = 0; i < p_.inequalities.size(); ++i) {
      const double s = slack(i, z);
      if (!(s > 0.0)) return std::nullopt;
      v -= std::log(s);
    }
    if (phase1_) {
      const double s = z(nx_) + 1.0;
      if (!(s > 0.0)) return std::nullopt;
      v -= std::log(s);
    }
    return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
  }

  /// Gradient and Hessian of t f + phi; only the lower triangle of h is set.
  void derivatives(const RealVector& z, double t, RealVector& g,
                   RealMatrix& h) const {
    g.setZero(n_);
    h.setZero(n_, n_);
    if (phase1_) {
      g(nx_) += t;
    } else {
      const RealVector x = z.head(nx_);
      if (p_.quadratic.size() > 0) {
        g.head(nx_) += t * (p_.quadratic * x);
        h.topLeftCorner(nx_, nx_).triangularView<Eigen::Lower>() +=
            t * p_.quadratic;
      }
      g.head(nx_) += t * p_.linear;
    }

    for (const auto& l : p_.lmis) add_lmi(l, z, g, h);

    for (std::size_t i = 0; i < p_.inequalities.size(); ++i) {
      const double s = slack(i, z);
      RealVector a = RealVector::Zero(n_);
      a.head(nx_) = p_.inequalities[i].coefficients;
      if (phase1_) a(nx_) = 1.0;
      g -= a / s;
      h.selfadjointView<Eigen::Lower>().rankUpdate(a, 1.0 / (s * s));
    }
    if (phase1_) {
      const double s = z(nx_) + 1.0;
      g(nx_) -= 1.0 / s;
      h(nx_, nx_) += 1.0 / (s * s);
    }
  }

  double slack(std::size_t i, const RealVector& z) const {
    const auto& ineq = p_.inequalities[i];
    double s = ineq.coefficients.dot(z.head(nx_)) + ineq.constant;
    if (phase1_) s += z(nx_);
    return s;
  }

 private:
  ComplexMatrix lmi_value(const Lmi& l, const RealVector& z) const {
    const int dim = p_.blocks[static_cast<std::size_t>(l.terms.front().first)].dim();
    ComplexMatrix f = l.constant.size() > 0 ? l.constant
                                            : ComplexMatrix::Zero(dim, dim);
    for (const auto& [b, sign] : l.terms) {
      const auto& blk = p_.blocks[static_cast<std::size_t>(b)];
      f += sign * blk.assemble(z.segment(offsets_[static_cast<std::size_t>(b)], blk.size()));
    }
    return f;
  }

  // Every coordinate is w (E_ab + E_ba) ("real") or i (E_ab - E_ba)
  // ("imaginary"); a diagonal coordinate is real with a = b and w = 1/2.
  // With z1 = Y_da Y_bc and z2 = Y_ca Y_bd, tr(Y B_ab Y B_cd) is
  //   RR: 2 Re(z1 + z2)   RI: -2 Im(z1 - z2)
  //   IR: -2 Im(z1 + z2)  II: -2 Re(z1 - z2)
  // times the two weights.
  struct Coord {
    int a = 0;
    int b = 0;
    bool imag = false;
    double w = 1.0;
  };

  static std::vector<Coord> coords_of(const HermitianParameterization& blk) {
    std::vector<Coord> out;
    out.reserve(static_cast<std::size_t>(blk.size()));
    for (int i = 0; i < blk.size(); ++i) {
      const auto& e = blk.entry(i, 0);
      if (blk.entry_count(i) == 1) {
        out.push_back({e.row, e.row, false, 0.5});
      } else {
        out.push_back({e.row, e.col, e.coef.imag() != 0.0, 1.0});
      }
    }
    return out;
  }

  // Fills the lower triangle of h only.
  void add_lmi(const Lmi& l, const RealVector& z, RealVector& g,
               RealMatrix& h) const {
    const ComplexMatrix f = lmi_value(l, z);
    Eigen::LLT<ComplexMatrix> llt(f);
    const ComplexMatrix y =
        llt.solve(ComplexMatrix::Identity(f.rows(), f.cols()));
    const RealMatrix yr = y.real();
    const RealMatrix yi = y.imag();

    for (std::size_t t1 = 0; t1 < l.terms.size(); ++t1) {
      const auto [b1, s1] = l.terms[t1];
      const auto& c1 = coords_[static_cast<std::size_t>(b1)];
      const int off1 = offsets_[static_cast<std::size_t>(b1)];
      for (std::size_t i = 0; i < c1.size(); ++i) {
        const Coord& p = c1[i];
        const double v = p.imag ? 2.0 * yi(p.a, p.b) : 2.0 * p.w * yr(p.a, p.b);
        g(off1 + static_cast<int>(i)) -= s1 * v;
      }

      for (std::size_t t2 = t1; t2 < l.terms.size(); ++t2) {
        const auto [b2, s2] = l.terms[t2];
        const auto& c2 = coords_[static_cast<std::size_t>(b2)];
        const int off2 = offsets_[static_cast<std::size_t>(b2)];
        const double sign = s1 * s2;
        const bool same = t1 == t2;
        for (std::size_t i = 0; i < c1.size(); ++i) {
          const Coord& p = c1[i];
          const int a = p.a;
          const int b = p.b;
          const int gi = off1 + static_cast<int>(i);
          for (std::size_t j = same ? i : 0; j < c2.size(); ++j) {
            const Coord& q = c2[j];
            const int c = q.a;
            const int d = q.b;
            // z1 = Y_da Y_bc, z2 = Y_ca Y_bd
            const double r1 = yr(d, a) * yr(b, c) - yi(d, a) * yi(b, c);
            const double i1 = yr(d, a) * yi(b, c) + yi(d, a) * yr(b, c);
            const double r2 = yr(c, a) * yr(b, d) - yi(c, a) * yi(b, d);
            const double i2 = yr(c, a) * yi(b, d) + yi(c, a) * yr(b, d);
            double v;
            if (!p.imag) {
              v = q.imag ? -2.0 * (i1 - i2) : 2.0 * (r1 + r2);
            } else {
              v = q.imag ? -2.0 * (r1 - r2) : -2.0 * (i1 + i2);
            }
            v *= sign * p.w * q.w;
            const int gj = off2 + static_cast<int>(j);
            if (gj >= gi) {
              h(gj, gi) += v;
            } else {
              h(gi, gj) += v;
            }
          }
        }
      }
    }
  }

  const Problem& p_;
  bool phase1_;
  int nx_ = 0;
  int n_ = 0;
  double nu_ = 0.0;
  std::vector<int> offsets_;
  std::vector<std::vector<Coord>> coords_;
};

struct CenteringOutcome {
  bool ok = true;
  int steps = 0;
};

/// Newton's method on t f + phi from a strictly feasible z.
/// Stops early once `done(z)` holds.
inline CenteringOutcome center(
    const Barrier& barrier, RealVector& z, double t, const Options& opt,
    int step_budget,
    const std::function<bool(const RealVector&)>& done = nullptr) {
  CenteringOutcome out;
  int quadratic_steps = 0;
  RealVector g;
  RealMatrix h;
  for (; out.steps < step_budget; ++out.steps) {
    barrier.derivatives(z, t, g, h);
    Eigen::LLT<RealMatrix> llt(h);
    RealVector dz;
    if (llt.info() == Eigen::Success) {
      dz = -llt.solve(g);
    } else {
      dz = -h.ldlt().solve(g);
    }
    if (!dz.allFinite()) {
      out.ok = false;
      return out;
    }
    const double lambda_sq = -g.dot(dz);
    if (lambda_sq < 0.0 || lambda_sq / 2.0 <= opt.newton_tol) return out;

    const double lambda = std::sqrt(lambda_sq);
    double step = 1.0;
    if (lambda < 0.25) {
      if (++quadratic_steps > 8) return out;
      while (!barrier.value(z + step * dz, t) && step > 1e-12) step *= 0.5;
    } else {
      const auto v0 = barrier.value(z, t);
      if (!v0) {
        out.ok = false;
        return out;
      }
      for (;;) {
        const auto v = barrier.value(z + step * dz, t);
        if (v && *v <= *v0 - 0.01 * step * lambda_sq) break;
        step *= 0.5;
        if (step < 1e-12) break;
      }
    }
    if (step < 1e-12) return out;  // no further progress at this precision
    z += step * dz;
    if (done && done(z)) {
      ++out.steps;
      return out;
    }
  }
  return out;
}

}  // namespace detail

inline Result solve(const Problem& problem, const RealVector& start,
                    const Options& opt = {}) {
  const int nx = problem.num_params();
  if (start.size() != nx) throw ShapeError("sdp::solve: start has wrong size");
  for (const auto& l : problem.lmis) {
    if (l.terms.empty()) throw ShapeError("sdp::solve: LMI without terms");
  }

  Result result;
  RealVector x = start;
  int budget = opt.max_newton_steps;

  // Phase I when an affine inequality is not strictly satisfied.
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& ineq : problem.inequalities) {
    worst = std::min(worst, ineq.coefficients.dot(x) + ineq.constant);
  }
  if (!problem.inequalities.empty() && !(worst > 0.0)) {
    detail::Barrier barrier(problem, true);
    RealVector z(nx + 1);
    z.head(nx) = x;
    z(nx) = std::max(0.0, -worst) + 1.0;
    if (!barrier.value(z, 1.0)) {
      throw SolverError("sdp::solve: start violates a matrix inequality");
    }
    double t = barrier.nu() / (z(nx) + 1.0);
    bool found = false;
    for (;;) {
      const auto c = detail::center(
          barrier, z, t, opt, budget,
          [nx](const RealVector& v) { return v(nx) < 0.0; });
      budget -= c.steps;
      result.newton_steps += c.steps;
      if (!c.ok) throw SolverError("sdp::solve: phase I Newton step failed");
      if (z(nx) < 0.0) {
        found = true;
        break;
      }
      if (barrier.nu() / t < opt.infeasibility_tol) break;
      if (budget <= 0) throw SolverError("sdp::solve: phase I step budget exhausted");
      t *= opt.barrier_growth;
    }
    if (!found) {
      result.status = Status::kInfeasible;
      result.x = z.head(nx);
      return result;
    }
    x = z.head(nx);
  }

  detail::Barrier barrier(problem, false);
  if (!barrier.value(x, 1.0)) {
    throw SolverError("sdp::solve: start is not strictly feasible");
  }
  double t = barrier.nu() / std::max(std::abs(problem.objective(x)), 1e-3);
  for (;;) {
    const auto c = detail::center(barrier, x, t, opt, budget);
    budget -= c.steps;
    result.newton_steps += c.steps;
    if (!c.ok) throw SolverError("sdp::solve: Newton step failed");
    if (barrier.nu() / t <= opt.gap_tol) break;
    if (budget <= 0) {
      result.status = Status::kFailed;
      result.x = x;
      result.objective = problem.objective(x);
      result.gap = barrier.nu() / t;
      return result;
    }
    t *= opt.barrier_growth;
  }
  result.status = Status::kOptimal;
  result.x = x;
  result.objective = problem.objective(x);
  result.gap = barrier.nu() / t;
  return result;
}

}  // namespace dfrc::sdp
