// SPDX-License-Identifier: Apache-2.0
//
// Dense semidefinite programming over complex-Hermitian variables.
//
// A Problem is variable-centric: declare Hermitian matrix variables, general
// complex matrix variables and scalars, a real linear objective (maximized),
// linear equality constraints, and PSD block constraints that are affine in
// the variables. Complex blocks are realized internally through the
// real-symmetric embedding [[Re, -Im], [Im, Re]]; equality constraints are
// eliminated through a nullspace parameterization before the solve.
//
// The solver is a primal-dual interior-point method on the homogeneous
// self-dual embedding with Nesterov-Todd scaling and Mehrotra
// predictor-corrector steps; the Schur complement is handled by dense
// Cholesky. Infeasibility and unboundedness are reported through embedding
// certificates rather than iteration timeouts.

#pragma once

#include "cohere/matcore.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cohere::sdp {

enum class Status {
  Optimal,
  Infeasible,
  Unbounded,
  MaxIter,
  IllFormed,
  NumericalFailure,
};

const char* to_string(Status s);

struct Options {
  Real gap_tol = 1e-8;
  Real feas_tol = 1e-7;
  int max_iter = 200;
  int real_dim_cap = 512;  // total real-embedded block dimension
  bool verbose = false;
};

struct IllFormed : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VarId {
  int v = -1;
  bool valid() const { return v >= 0; }
};

/// Real linear functional over problem variables:
///   sum Re Tr(coeff^dag V) + sum c_j s_j + constant.
class LinExpr {
 public:
  LinExpr() = default;
  /*implicit*/ LinExpr(Real constant) : constant_(constant) {}

  static LinExpr re_tr(const Matrix& coeff, VarId v);
  static LinExpr entry_re(VarId v, int row, int col);
  static LinExpr scalar(VarId v, Real coeff = 1.0);

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(Real s);
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(Real s, LinExpr a) { return a *= s; }

  struct MatTerm {
    VarId var;
    Matrix coeff;
  };
  struct ScalarTerm {
    VarId var;
    Real coeff;
  };
  const std::vector<MatTerm>& mat_terms() const { return mat_terms_; }
  const std::vector<ScalarTerm>& scalar_terms() const { return scalar_terms_; }
  Real constant() const { return constant_; }

 private:
  std::vector<MatTerm> mat_terms_;
  std::vector<ScalarTerm> scalar_terms_;
  Real constant_ = 0.0;
};

enum class Op { Identity, Adjoint, Transpose, Conjugate };

struct Solution {
  Status status = Status::NumericalFailure;
  Real objective = 0.0;   // user objective (maximize), incl. constant
  Real dual_bound = 0.0;  // certified bound from the conic dual
  Real duality_gap = 0.0;
  Real max_violation = 0.0;  // on the returned point, complex domain
  int iterations = 0;
  std::vector<Matrix> values;  // per variable; scalars as 1x1

  Matrix matrix(VarId v) const { return values.at(static_cast<size_t>(v.v)); }
  Real scalar(VarId v) const {
    return values.at(static_cast<size_t>(v.v))(0, 0).real();
  }
  bool ok() const { return status == Status::Optimal; }
};

struct FeasibilityReport {
  bool feasible = false;
  Real margin = 0.0;  // optimal uniform slack; negative when infeasible
  Solution point;     // witness (feasible) or the slack-optimal point
};

class Problem {
 public:
  VarId hermitian(int dim, std::string name = {});
  VarId complex_rect(int rows, int cols, std::string name = {});
  VarId scalar(std::string name = {});

  void maximize(const LinExpr& objective);
  void add_equality(const LinExpr& lhs, Real rhs);

  /// PSD block builder; the assembled affine matrix must come out Hermitian
  /// (checked at compile time of the problem).
  class Block {
   public:
    /// Adds `m` (and nothing else) at sub-block position (r, c). Off-diagonal
    /// placements automatically add the mirrored adjoint at (c, r).
    Block& constant(int r, int c, const Matrix& m);
    /// Places coeff * op(V) at (r, c); mirrored adjoint added when r != c.
    Block& place(int r, int c, Complex coeff, VarId v, Op op = Op::Identity);
    /// Adds a real linear functional at entry (r, c) (mirrored when r != c).
    Block& entry(int r, int c, const LinExpr& e);

   private:
    friend class Problem;
    struct ConstTerm {
      int r, c;
      Matrix m;
    };
    struct PlaceTerm {
      int r, c;
      Complex coeff;
      VarId var;
      Op op;
    };
    struct EntryTerm {
      int r, c;
      LinExpr expr;
    };
    int dim = 0;
    std::vector<ConstTerm> consts;
    std::vector<PlaceTerm> places;
    std::vector<EntryTerm> entries;
  };

  Block& psd_block(int dim);
  /// 1x1 PSD block: expr >= 0.
  void require_nonneg(const LinExpr& expr);

  Solution solve(const Options& opts = {}) const;

  /// Phase-I by uniform slack maximization: max t s.t. every block >= t*I
  /// (t capped at 1), equalities kept hard. feasible iff t* >= -feas margin.
  FeasibilityReport feasible(const Options& opts = {}) const;

  /// Plain-text dump of the compiled real-embedded problem, SDPA-like,
  /// for cross-checking against external solvers.
  void dump_sdpa(std::ostream& os) const;

  int num_variables() const { return static_cast<int>(vars_.size()); }

 private:
  struct Impl;
  friend struct Impl;
  enum class Kind { Hermitian, Rect, Scalar };
  struct Var {
    Kind kind;
    int rows, cols;
    int param_offset;  // first real parameter index
    int param_count;
    std::string name;
  };
  std::vector<Var> vars_;
  int num_params_ = 0;
  LinExpr objective_;
  std::vector<std::pair<LinExpr, Real>> equalities_;
  std::vector<Block> blocks_;

  const Var& var(VarId v) const;
};

/// Watrous fidelity SDP: max (Tr X + Tr X^dag)/2 s.t. [[rho, X], [X^dag,
/// sigma]] >= 0. Agrees with the eigendecomposition fidelity.
Real fidelity_sdp(const DensityMatrix& rho, const DensityMatrix& sigma,
                  const Options& opts = {});

}  // namespace cohere::sdp
