// SPDX-License-Identifier: Apache-2.0

#include "cohere/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace cohere::sdp {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::MaxIter: return "MaxIter";
    case Status::IllFormed: return "IllFormed";
    case Status::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// LinExpr

LinExpr LinExpr::re_tr(const Matrix& coeff, VarId v) {
  LinExpr e;
  e.mat_terms_.push_back(MatTerm{v, coeff});
  return e;
}

LinExpr LinExpr::entry_re(VarId v, int row, int col) {
  // Re Tr(E_rc^dag V) = Re V(row, col); the coefficient matrix is padded to
  // the variable's dimensions at compile time.
  Matrix coeff = Matrix::Zero(row + 1, col + 1);
  coeff(row, col) = 1.0;
  LinExpr e;
  e.mat_terms_.push_back(MatTerm{v, std::move(coeff)});
  return e;
}

LinExpr LinExpr::scalar(VarId v, Real coeff) {
  LinExpr e;
  e.scalar_terms_.push_back(ScalarTerm{v, coeff});
  return e;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  for (const auto& t : o.mat_terms_) mat_terms_.push_back(t);
  for (const auto& t : o.scalar_terms_) scalar_terms_.push_back(t);
  constant_ += o.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  for (const auto& t : o.mat_terms_) {
    mat_terms_.push_back(MatTerm{t.var, Matrix(-t.coeff)});
  }
  for (const auto& t : o.scalar_terms_) {
    scalar_terms_.push_back(ScalarTerm{t.var, -t.coeff});
  }
  constant_ -= o.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(Real s) {
  for (auto& t : mat_terms_) t.coeff *= s;
  for (auto& t : scalar_terms_) t.coeff *= s;
  constant_ *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// Problem building

VarId Problem::hermitian(int dim, std::string name) {
  if (dim < 1) throw IllFormed("hermitian variable needs dim >= 1");
  Var v{Kind::Hermitian, dim, dim, num_params_, dim * dim, std::move(name)};
  num_params_ += v.param_count;
  vars_.push_back(std::move(v));
  return VarId{static_cast<int>(vars_.size()) - 1};
}

VarId Problem::complex_rect(int rows, int cols, std::string name) {
  if (rows < 1 || cols < 1) throw IllFormed("rect variable needs positive dims");
  Var v{Kind::Rect, rows, cols, num_params_, 2 * rows * cols, std::move(name)};
  num_params_ += v.param_count;
  vars_.push_back(std::move(v));
  return VarId{static_cast<int>(vars_.size()) - 1};
}

VarId Problem::scalar(std::string name) {
  Var v{Kind::Scalar, 1, 1, num_params_, 1, std::move(name)};
  num_params_ += 1;
  vars_.push_back(std::move(v));
  return VarId{static_cast<int>(vars_.size()) - 1};
}

const Problem::Var& Problem::var(VarId v) const {
  if (!v.valid() || v.v >= static_cast<int>(vars_.size())) {
    throw IllFormed("reference to undeclared variable");
  }
  return vars_[static_cast<size_t>(v.v)];
}

void Problem::maximize(const LinExpr& objective) { objective_ = objective; }

void Problem::add_equality(const LinExpr& lhs, Real rhs) {
  equalities_.emplace_back(lhs, rhs - lhs.constant());
}

Problem::Block& Problem::psd_block(int dim) {
  if (dim < 1) throw IllFormed("psd block needs dim >= 1");
  blocks_.emplace_back();
  blocks_.back().dim = dim;
  return blocks_.back();
}

void Problem::require_nonneg(const LinExpr& expr) {
  psd_block(1).entry(0, 0, expr);
}

Problem::Block& Problem::Block::constant(int r, int c, const Matrix& m) {
  consts.push_back(ConstTerm{r, c, m});
  return *this;
}

Problem::Block& Problem::Block::place(int r, int c, Complex coeff, VarId v,
                                      Op op) {
  places.push_back(PlaceTerm{r, c, coeff, v, op});
  return *this;
}

Problem::Block& Problem::Block::entry(int r, int c, const LinExpr& e) {
  entries.push_back(EntryTerm{r, c, e});
  return *this;
}

// ---------------------------------------------------------------------------
// svec helpers (scaled so the Frobenius inner product becomes a dot product)

namespace {

inline int svec_size(int n) { return n * (n + 1) / 2; }

void svec_into(const RealMatrix& m, Eigen::Ref<RealVector> out) {
  static const Real kSqrt2 = std::sqrt(2.0);
  const int n = static_cast<int>(m.rows());
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) out[k++] = kSqrt2 * m(i, j);
    out[k++] = m(j, j);
  }
}

RealVector svec(const RealMatrix& m) {
  RealVector out(svec_size(static_cast<int>(m.rows())));
  svec_into(m, out);
  return out;
}

RealMatrix unsvec(const RealVector& v, int n) {
  static const Real kInvSqrt2 = 1.0 / std::sqrt(2.0);
  RealMatrix m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      const Real x = v[k++] * kInvSqrt2;
      m(i, j) = x;
      m(j, i) = x;
    }
    m(j, j) = v[k++];
  }
  return m;
}

struct ParamEntry {
  int row, col;
  Complex val;
};

// Derivative of a variable with respect to one of its real parameters.
// Layout -- Hermitian: d diagonal entries, then (re, im) per pair (i, j),
// i < j, pairs ordered by j then i. Rect: (re, im) per entry, row-major.
template <typename F>
void for_each_param_entry(int kind, int rows, int cols, int local_param,
                          F&& emit) {
  if (kind == 2) {  // scalar
    emit(ParamEntry{0, 0, Complex(1, 0)});
    return;
  }
  if (kind == 1) {  // rect
    const int idx = local_param / 2;
    const int r = idx / cols;
    const int c = idx % cols;
    emit(ParamEntry{r, c, local_param % 2 == 0 ? Complex(1, 0) : Complex(0, 1)});
    return;
  }
  const int d = rows;
  if (local_param < d) {
    emit(ParamEntry{local_param, local_param, Complex(1, 0)});
    return;
  }
  int idx = (local_param - d) / 2;
  int j = 1;
  while (idx >= j) {
    idx -= j;
    ++j;
  }
  const int i = idx;
  if ((local_param - d) % 2 == 0) {
    emit(ParamEntry{i, j, Complex(1, 0)});
    emit(ParamEntry{j, i, Complex(1, 0)});
  } else {
    emit(ParamEntry{i, j, Complex(0, 1)});
    emit(ParamEntry{j, i, Complex(0, -1)});
  }
}

Matrix apply_op(const Matrix& m, Op op) {
  switch (op) {
    case Op::Identity: return m;
    case Op::Adjoint: return m.adjoint();
    case Op::Transpose: return m.transpose();
    case Op::Conjugate: return m.conjugate();
  }
  return m;
}

struct CompiledBlock {
  int n = 0;  // declared (complex) dimension
  bool is_real = false;
  int ne = 0;  // real-embedded dimension
  RealMatrix C;
  Eigen::SparseMatrix<Real> F_raw;  // svec_size(ne) x num_params
  RealMatrix F;                     // after elimination: svec x m_reduced
};

struct Compiled {
  std::vector<CompiledBlock> blocks;
  RealVector b_full;
  Real obj_const = 0;
  RealMatrix G;
  RealVector h;
  int num_params = 0;
};

struct Reduced {
  std::vector<CompiledBlock> blocks;
  RealVector b;
  Real shift = 0;
  RealMatrix N;
  RealVector y0;
  std::vector<int> kept;
};

struct HsdResult {
  Status status = Status::MaxIter;
  RealVector z;  // de-homogenized reduced solution
  Real pobj = 0, dobj = 0, pres = 0, dres = 0;
  int iterations = 0;
};

struct BlockState {
  int ne = 0;
  RealMatrix X, S;
  RealMatrix L1, L2;
  RealMatrix R, Rinv;
  RealVector lambda;
  RealMatrix Q;  // svec x m: column k = svec(R^T G_k R)
  RealMatrix dXa, dSa, dX, dS;
};

RealMatrix chol_lower(const RealMatrix& m, const char* what) {
  RealMatrix a = m;
  Real jitter = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<RealMatrix> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = (jitter == 0.0) ? 1e-14 * std::max<Real>(1.0, m.trace()) : jitter * 100;
    a = m + jitter * RealMatrix::Identity(m.rows(), m.cols());
  }
  throw NumericalFailure(std::string("Cholesky factorization broke down: ") + what);
}

// max alpha in (0, 1] keeping X + alpha dX psd, X = L L^T.
Real max_step(const RealMatrix& L, const RealMatrix& dX) {
  RealMatrix W = L.triangularView<Eigen::Lower>().solve(dX).transpose();
  RealMatrix M = L.triangularView<Eigen::Lower>().solve(W);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es((M + M.transpose()) / 2.0,
                                               Eigen::EigenvaluesOnly);
  const Real lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0) return 1.0;
  return std::min<Real>(1.0, -1.0 / lmin);
}

}  // namespace

// ---------------------------------------------------------------------------
// Compilation and reduction

struct Problem::Impl {
  static Compiled compile(const Problem& prob) {
    Compiled out;
    out.num_params = prob.num_params_;

    auto lin_to_row = [&](const LinExpr& e, RealVector& row) {
      for (const auto& t : e.mat_terms()) {
        const Var& v = prob.var(t.var);
        if (v.kind == Kind::Scalar) {
          throw IllFormed("matrix term references a scalar variable");
        }
        if (t.coeff.rows() > v.rows || t.coeff.cols() > v.cols) {
          throw IllFormed("linear coefficient exceeds variable dimensions");
        }
        Matrix coeff = Matrix::Zero(v.rows, v.cols);
        coeff.topLeftCorner(t.coeff.rows(), t.coeff.cols()) = t.coeff;
        for (int p = 0; p < v.param_count; ++p) {
          Real g = 0;
          for_each_param_entry(static_cast<int>(v.kind), v.rows, v.cols, p,
                               [&](ParamEntry pe) {
                                 g += (std::conj(coeff(pe.row, pe.col)) * pe.val)
                                          .real();
                               });
          if (g != 0.0) row[v.param_offset + p] += g;
        }
      }
      for (const auto& t : e.scalar_terms()) {
        const Var& v = prob.var(t.var);
        if (v.kind != Kind::Scalar) {
          throw IllFormed("scalar term references a matrix variable");
        }
        row[v.param_offset] += t.coeff;
      }
    };

    out.b_full = RealVector::Zero(out.num_params);
    lin_to_row(prob.objective_, out.b_full);
    out.obj_const = prob.objective_.constant();

    out.G = RealMatrix::Zero(static_cast<int>(prob.equalities_.size()),
                             out.num_params);
    out.h = RealVector::Zero(static_cast<int>(prob.equalities_.size()));
    for (size_t r = 0; r < prob.equalities_.size(); ++r) {
      RealVector row = RealVector::Zero(out.num_params);
      lin_to_row(prob.equalities_[r].first, row);
      out.G.row(static_cast<int>(r)) = row;
      out.h[static_cast<int>(r)] = prob.equalities_[r].second;
    }

    for (const auto& blk : prob.blocks_) {
      const int n = blk.dim;
      Matrix C = Matrix::Zero(n, n);
      std::unordered_map<int, Matrix> fmat;

      auto touch = [&](int p) -> Matrix& {
        auto it = fmat.find(p);
        if (it == fmat.end()) it = fmat.emplace(p, Matrix::Zero(n, n)).first;
        return it->second;
      };
      auto add_at = [&](Matrix& dst, int r, int c, const Matrix& m,
                        bool mirror) {
        if (r < 0 || c < 0 || r + m.rows() > n || c + m.cols() > n) {
          throw IllFormed("block placement out of range");
        }
        dst.block(r, c, m.rows(), m.cols()) += m;
        if (mirror && r != c) dst.block(c, r, m.cols(), m.rows()) += m.adjoint();
      };

      for (const auto& t : blk.consts) add_at(C, t.r, t.c, t.m, true);

      for (const auto& t : blk.places) {
        const Var& v = prob.var(t.var);
        for (int p = 0; p < v.param_count; ++p) {
          Matrix e = Matrix::Zero(v.rows, v.cols);
          for_each_param_entry(static_cast<int>(v.kind), v.rows, v.cols, p,
                               [&](ParamEntry pe) { e(pe.row, pe.col) += pe.val; });
          Matrix contrib = t.coeff * apply_op(e, t.op);
          if (contrib.cwiseAbs().maxCoeff() == 0.0) continue;
          add_at(touch(v.param_offset + p), t.r, t.c, contrib, true);
        }
      }

      const Matrix one = Matrix::Constant(1, 1, Complex(1, 0));
      for (const auto& t : blk.entries) {
        RealVector row = RealVector::Zero(out.num_params);
        lin_to_row(t.expr, row);
        for (int p = 0; p < out.num_params; ++p) {
          if (row[p] == 0.0) continue;
          add_at(touch(p), t.r, t.c, Complex(row[p], 0) * one, true);
        }
        if (t.expr.constant() != 0.0) {
          add_at(C, t.r, t.c, Complex(t.expr.constant(), 0) * one, true);
        }
      }

      const Real cscale = std::max<Real>(1.0, C.cwiseAbs().maxCoeff());
      if (herm_deviation(C) > 1e-11 * cscale) {
        throw IllFormed("assembled block constant is not Hermitian");
      }
      C = ((C + C.adjoint()) / 2.0).eval();
      bool real_data = C.imag().cwiseAbs().maxCoeff() < 1e-13;
      for (auto& [p, m] : fmat) {
        const Real s = std::max<Real>(1.0, m.cwiseAbs().maxCoeff());
        if (herm_deviation(m) > 1e-11 * s) {
          throw IllFormed("assembled block coefficient is not Hermitian");
        }
        m = ((m + m.adjoint()) / 2.0).eval();
        if (real_data && m.imag().cwiseAbs().maxCoeff() >= 1e-13) {
          real_data = false;
        }
      }

      CompiledBlock cb;
      cb.n = n;
      cb.is_real = real_data;
      cb.ne = real_data ? n : 2 * n;

      auto embed = [&](const Matrix& src) -> RealMatrix {
        if (real_data) return src.real();
        RealMatrix dst(2 * n, 2 * n);
        dst.topLeftCorner(n, n) = src.real();
        dst.bottomRightCorner(n, n) = src.real();
        dst.topRightCorner(n, n) = -src.imag();
        dst.bottomLeftCorner(n, n) = src.imag();
        return dst;
      };

      cb.C = embed(C);
      std::vector<Eigen::Triplet<Real>> trips;
      for (const auto& [p, m] : fmat) {
        RealVector col = svec(embed(m));
        for (int k = 0; k < col.size(); ++k) {
          if (col[k] != 0.0) trips.emplace_back(k, p, col[k]);
        }
      }
      cb.F_raw.resize(svec_size(cb.ne), out.num_params);
      cb.F_raw.setFromTriplets(trips.begin(), trips.end());
      out.blocks.push_back(std::move(cb));
    }
    return out;
  }

  // Equality elimination plus removal of directions no block can see.
  static Status reduce(const Compiled& in, Reduced& out, Real feas_tol,
                       std::string* msg) {
    const int m = in.num_params;
    RealVector y0 = RealVector::Zero(m);
    RealMatrix N;
    if (in.G.rows() > 0) {
      Eigen::BDCSVD<RealMatrix> svd(in.G,
                                    Eigen::ComputeFullV | Eigen::ComputeThinU);
      const RealVector& sv = svd.singularValues();
      const Real tol = sv.size() ? std::max<Real>(1e-12, sv[0] * 1e-12) : 1e-12;
      int rank = 0;
      for (int i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol) ++rank;
      }
      RealVector ut_h = svd.matrixU().transpose() * in.h;
      RealVector w = RealVector::Zero(sv.size());
      for (int i = 0; i < rank; ++i) w[i] = ut_h[i] / sv[i];
      y0 = svd.matrixV().leftCols(sv.size()) * w;
      out.y0 = y0;
      if ((in.G * y0 - in.h).cwiseAbs().maxCoeff() >
          std::max(feas_tol, 1e-9) * (1.0 + in.h.cwiseAbs().maxCoeff())) {
        if (msg) *msg = "equality constraints are inconsistent";
        return Status::Infeasible;
      }
      N = svd.matrixV().rightCols(m - rank);
    } else {
      N = RealMatrix::Identity(m, m);
      out.y0 = y0;
    }

    const int mr = static_cast<int>(N.cols());
    out.blocks = in.blocks;
    for (auto& blk : out.blocks) {
      blk.C += unsvec(blk.F_raw * y0, blk.ne);
      blk.F = blk.F_raw * N;
    }
    RealVector b = N.transpose() * in.b_full;
    out.shift = in.b_full.dot(y0) + in.obj_const;

    RealVector colnorm = RealVector::Zero(mr);
    for (const auto& blk : out.blocks) {
      for (int k = 0; k < mr; ++k) colnorm[k] += blk.F.col(k).norm();
    }
    std::vector<int> kept;
    for (int k = 0; k < mr; ++k) {
      if (colnorm[k] > 1e-12) {
        kept.push_back(k);
      } else if (std::abs(b[k]) > 1e-10) {
        if (msg) *msg = "objective direction unconstrained by any block";
        return Status::Unbounded;
      }
    }
    if (static_cast<int>(kept.size()) < mr) {
      for (auto& blk : out.blocks) {
        RealMatrix f(blk.F.rows(), static_cast<int>(kept.size()));
        for (size_t k = 0; k < kept.size(); ++k) f.col(static_cast<int>(k)) = blk.F.col(kept[k]);
        blk.F = std::move(f);
      }
      RealVector bb(static_cast<int>(kept.size()));
      for (size_t k = 0; k < kept.size(); ++k) bb[static_cast<int>(k)] = b[kept[k]];
      b = std::move(bb);
    }
    out.b = std::move(b);
    out.N = std::move(N);
    out.kept = std::move(kept);
    return Status::Optimal;
  }

  // HSD interior point with NT scaling and Mehrotra predictor-corrector.
  //   user:   max b.z  s.t.  S_b = C_b + sum_k z_k G_{b,k} >= 0
  //   primal: min <C,X> s.t. <A_k, X> = b_k, X >= 0, with A_k = -G_k.
  static HsdResult run_hsd(const Reduced& red, const Options& opts) {
    const int m = static_cast<int>(red.b.size());
    std::vector<BlockState> st(red.blocks.size());
    Real nu = 0;
    for (size_t b = 0; b < red.blocks.size(); ++b) {
      st[b].ne = red.blocks[b].ne;
      st[b].X = RealMatrix::Identity(st[b].ne, st[b].ne);
      st[b].S = RealMatrix::Identity(st[b].ne, st[b].ne);
      nu += st[b].ne;
    }
    RealVector y = RealVector::Zero(m);
    Real tau = 1.0, kappa = 1.0;

    const Real normb = 1.0 + red.b.norm();
    Real normc2 = 0;
    for (const auto& blk : red.blocks) normc2 += blk.C.squaredNorm();
    const Real normc = 1.0 + std::sqrt(normc2);

    auto opA = [&]() {
      RealVector r = RealVector::Zero(m);
      for (size_t b = 0; b < st.size(); ++b) {
        r -= red.blocks[b].F.transpose() * svec(st[b].X);
      }
      return r;
    };

    HsdResult res;
    std::vector<RealMatrix> rd(st.size());
    std::vector<RealMatrix> D(st.size()), X0(st.size()), X1(st.size());

    // Best near-optimal iterate. Instances whose conic dual is not attained
    // (singular constant blocks, e.g. fidelity with pure states) drive the
    // embedding's tau to zero before the full tolerances can be certified in
    // double precision; in that regime we return the best iterate seen.
    HsdResult best;
    Real best_score = std::numeric_limits<Real>::infinity();
    Real best_gap = std::numeric_limits<Real>::infinity();
    int stall = 0;
    bool collapsed = false;

    for (int iter = 0; iter < opts.max_iter; ++iter) {
      res.iterations = iter + 1;
      const RealVector ax = opA();
      const RealVector rp = ax - red.b * tau;
      Real cx = 0, xs = 0;
      for (size_t b = 0; b < st.size(); ++b) {
        const auto& blk = red.blocks[b];
        rd[b] = unsvec(blk.F * y, blk.ne) - st[b].S + blk.C * tau;
        cx += (blk.C.array() * st[b].X.array()).sum();
        xs += (st[b].X.array() * st[b].S.array()).sum();
      }
      const Real rg = red.b.dot(y) - cx - kappa;
      const Real mu = (xs + tau * kappa) / (nu + 1.0);

      {
        const Real pres = rp.norm() / (normb * tau);
        Real dr2 = 0;
        for (const auto& r : rd) dr2 += r.squaredNorm();
        const Real dres = std::sqrt(dr2) / (normc * tau);
        const Real pobj = cx / tau;
        const Real dobj = red.b.dot(y) / tau;
        const Real scale = 1.0 + std::max(std::abs(pobj), std::abs(dobj));
        const Real gap = std::abs(pobj - dobj) / scale;
        const Real cgap = xs / (tau * tau) / scale;
        res.pobj = pobj;
        res.dobj = dobj;
        res.pres = pres;
        res.dres = dres;
        if (opts.verbose) {
          std::fprintf(stderr,
                       "it %3d mu %9.2e pres %9.2e dres %9.2e gap %9.2e "
                       "tau %9.2e kappa %9.2e\n",
                       iter, mu, pres, dres, gap, tau, kappa);
        }
#ifndef NDEBUG
        assert(dobj - pobj <=
               1e3 * (pres * normb + dres * normc) + 1e-6 * scale);
#endif
        if (pres <= opts.feas_tol && dres <= opts.feas_tol &&
            (gap <= opts.gap_tol || cgap <= opts.gap_tol)) {
          res.status = Status::Optimal;
          res.z = y / tau;
          return res;
        }
        const Real score = std::max({pres, dres, gap});
        if (score < best_score) {
          best_score = score;
          stall = 0;
        } else {
          ++stall;
        }
        if (pres <= opts.feas_tol && dres <= opts.feas_tol && gap < best_gap) {
          best_gap = gap;
          best = res;
          best.z = y / tau;
        }
        if (iter >= 2 && kappa > 1e2 * tau) {
          if (cx < -1e-12) {
            const Real q = ax.norm() / (-cx) * normc / normb;
            if (q <= opts.feas_tol * 1e-1) {
              res.status = Status::Infeasible;
              res.z = y;
              return res;
            }
          }
          const Real by = red.b.dot(y);
          if (by > 1e-12) {
            Real dr2h = 0;
            for (size_t b = 0; b < st.size(); ++b) {
              RealMatrix h =
                  unsvec(red.blocks[b].F * y, red.blocks[b].ne) - st[b].S;
              dr2h += h.squaredNorm();
            }
            if (std::sqrt(dr2h) / by * normb / normc <= opts.feas_tol * 1e-1) {
              res.status = Status::Unbounded;
              res.z = y / by;
              return res;
            }
          }
        }
        if (tau < 1e-6 || mu < 1e-16 || (stall > 15 && mu < 1e-10)) {
          collapsed = true;
          break;
        }
      }

      // NT scaling, Schur complement
      RealMatrix M = RealMatrix::Zero(m, m);
      for (size_t b = 0; b < st.size(); ++b) {
        auto& s = st[b];
        s.L1 = chol_lower(s.X, "primal iterate");
        s.L2 = chol_lower(s.S, "dual iterate");
        Eigen::BDCSVD<RealMatrix> svd(
            RealMatrix(s.L2.transpose() * s.L1),
            Eigen::ComputeFullU | Eigen::ComputeFullV);
        RealVector sig = svd.singularValues().cwiseMax(1e-150);
        RealVector si = sig.cwiseSqrt().cwiseInverse();
        s.R = s.L1 * svd.matrixV() * si.asDiagonal();
        // R^{-1} = sqrt(Sigma) V^T L1^{-1} = sqrt(Sigma) (L1^{-T} V)^T
        RealMatrix w = s.L1.transpose()
                           .triangularView<Eigen::Upper>()
                           .solve(RealMatrix(svd.matrixV()));
        s.Rinv = sig.cwiseSqrt().asDiagonal() * w.transpose();
        s.lambda = sig;
        s.Q.resize(svec_size(s.ne), m);
        for (int k = 0; k < m; ++k) {
          RealMatrix Gk = unsvec(red.blocks[b].F.col(k), s.ne);
          RealMatrix P = s.R.transpose() * Gk * s.R;
          svec_into(P, s.Q.col(k));
        }
        M.selfadjointView<Eigen::Lower>().rankUpdate(s.Q.transpose());
      }
      M = RealMatrix(M.selfadjointView<Eigen::Lower>());

      Eigen::LLT<RealMatrix> mllt;
      {
        RealMatrix mreg = M;
        Real jit = 0;
        for (int attempt = 0;; ++attempt) {
          mllt.compute(mreg);
          if (mllt.info() == Eigen::Success) break;
          if (attempt >= 3) {
            throw NumericalFailure("Schur complement factorization failed");
          }
          jit = (jit == 0) ? 1e-12 * (1.0 + M.trace() / std::max(1, m))
                           : jit * 1e3;
          mreg = M + jit * RealMatrix::Identity(m, m);
        }
      }

      RealVector g = red.b;
      for (size_t b = 0; b < st.size(); ++b) {
        auto& s = st[b];
        RealVector rcr = svec(RealMatrix(s.R.transpose() * red.blocks[b].C * s.R));
        g -= s.Q.transpose() * rcr;  // A[WCW]_k = -<G_k, WCW>
      }
      const RealVector v = mllt.solve(g);

      Real sigma = 0;
      RealVector dy(m);
      Real dtau = 0, dkappa = 0;
      Real dtau_aff = 0, dkappa_aff = 0;

      for (int pass = 0; pass < 2; ++pass) {
        const Real eta = (pass == 0) ? 1.0 : 1.0 - sigma;
        for (size_t b = 0; b < st.size(); ++b) {
          auto& s = st[b];
          RealMatrix T = RealMatrix::Zero(s.ne, s.ne);
          T.diagonal() = -s.lambda.array().square();
          if (pass == 1) {
            RealMatrix dxt = s.Rinv * s.dXa * s.Rinv.transpose();
            RealMatrix dst = s.R.transpose() * s.dSa * s.R;
            T -= (dxt * dst + dst * dxt) / 2.0;
            T.diagonal().array() += sigma * mu;
          }
          RealMatrix E(s.ne, s.ne);
          for (int i = 0; i < s.ne; ++i) {
            for (int j = 0; j < s.ne; ++j) {
              E(i, j) = 2.0 * T(i, j) / (s.lambda[i] + s.lambda[j]);
            }
          }
          D[b] = std::move(E);
        }
        const Real dk_rhs = (pass == 0)
                                ? -tau * kappa
                                : sigma * mu - tau * kappa - dtau_aff * dkappa_aff;

        RealVector f = -eta * rp;
        Real c_dot_X0 = 0, c_dot_X1 = 0;
        for (size_t b = 0; b < st.size(); ++b) {
          auto& s = st[b];
          RealMatrix inner =
              s.R.transpose() * RealMatrix(-eta * rd[b]) * s.R;
          RealVector sv = svec(RealMatrix(D[b] + inner));
          f += s.Q.transpose() * sv;  // -A[R (D + R^T rd_bar R) R^T]
          X0[b] = s.R * (D[b] + inner) * s.R.transpose();
        }
        const RealVector u = mllt.solve(f);
        for (size_t b = 0; b < st.size(); ++b) {
          auto& s = st[b];
          const auto& blk = red.blocks[b];
          RealMatrix Atu = -unsvec(blk.F * u, s.ne);
          RealMatrix Atv = -unsvec(blk.F * v, s.ne);
          X0[b] += s.R * RealMatrix(s.R.transpose() * Atu * s.R) * s.R.transpose();
          X1[b] = s.R * RealMatrix(s.R.transpose() * (Atv - blk.C) * s.R) *
                  s.R.transpose();
          c_dot_X0 += (blk.C.array() * X0[b].array()).sum();
          c_dot_X1 += (blk.C.array() * X1[b].array()).sum();
        }

        const Real rg_bar = -eta * rg;
        const Real denom = red.b.dot(v) - c_dot_X1 + kappa / tau;
        const Real num = rg_bar - red.b.dot(u) + c_dot_X0 + dk_rhs / tau;
        dtau = num / denom;
        dy = u + v * dtau;
        dkappa = (dk_rhs - kappa * dtau) / tau;
        for (size_t b = 0; b < st.size(); ++b) {
          auto& s = st[b];
          const auto& blk = red.blocks[b];
          RealMatrix dX = X0[b] + X1[b] * dtau;
          dX = ((dX + dX.transpose()) / 2.0).eval();
          // dS = -A^T dy + C dtau - rd_bar
          RealMatrix dS = unsvec(blk.F * dy, s.ne) + blk.C * dtau + eta * rd[b];
          dS = ((dS + dS.transpose()) / 2.0).eval();
          if (pass == 0) {
            s.dXa = std::move(dX);
            s.dSa = std::move(dS);
          } else {
            s.dX = std::move(dX);
            s.dS = std::move(dS);
          }
        }

        if (pass == 0) {
          dtau_aff = dtau;
          dkappa_aff = dkappa;
          Real alpha = 1.0;
          for (auto& s : st) {
            alpha = std::min(alpha, max_step(s.L1, s.dXa));
            alpha = std::min(alpha, max_step(s.L2, s.dSa));
          }
          if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
          if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
          alpha *= 0.99;
          Real xs_a = 0;
          for (auto& s : st) {
            xs_a += ((s.X + alpha * s.dXa).array() *
                     (s.S + alpha * s.dSa).array())
                        .sum();
          }
          const Real mu_aff =
              (xs_a + (tau + alpha * dtau) * (kappa + alpha * dkappa)) /
              (nu + 1.0);
          sigma = std::pow(
              std::max<Real>(0.0, std::min<Real>(1.0, mu_aff / mu)), 3.0);
          sigma = std::min<Real>(std::max<Real>(sigma, 1e-8), 1.0 - 1e-8);
        }
      }

      Real alpha = 1.0;
      for (auto& s : st) {
        alpha = std::min(alpha, max_step(s.L1, s.dX));
        alpha = std::min(alpha, max_step(s.L2, s.dS));
      }
      if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
      if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
      alpha = std::min<Real>(1.0, 0.99 * alpha);

      for (auto& s : st) {
        s.X += alpha * s.dX;
        s.S += alpha * s.dS;
        s.X = ((s.X + s.X.transpose()) / 2.0).eval();
        s.S = ((s.S + s.S.transpose()) / 2.0).eval();
      }
      y += alpha * dy;
      tau += alpha * dtau;
      kappa += alpha * dkappa;
      if (!std::isfinite(tau) || !std::isfinite(kappa) || tau <= 0) {
        throw NumericalFailure("iterate left the homogeneous embedding");
      }
    }
    (void)collapsed;
    if (best_gap <= std::max(opts.gap_tol, 1e-6)) {
      best.status = Status::Optimal;
      best.iterations = res.iterations;
      return best;
    }
    res.status = Status::MaxIter;
    res.z = y / tau;
    return res;
  }
};

// ---------------------------------------------------------------------------
// Public entry points

Solution Problem::solve(const Options& opts) const {
  Solution sol;
  Compiled comp = Impl::compile(*this);
  int total = 0;
  for (const auto& b : comp.blocks) total += b.ne;
  if (total > opts.real_dim_cap) {
    throw CapExceeded("sdp: total real-embedded dimension " +
                      std::to_string(total) + " exceeds cap " +
                      std::to_string(opts.real_dim_cap));
  }

  Reduced red;
  std::string msg;
  const Status rs = Impl::reduce(comp, red, opts.feas_tol, &msg);

  RealVector params = RealVector::Zero(num_params_);
  if (rs != Status::Optimal) {
    sol.status = rs;
    if (red.y0.size()) params = red.y0;
  } else if (red.b.size() == 0) {
    params = red.y0;
    Real min_s = 0;
    for (const auto& blk : red.blocks) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(blk.C,
                                                   Eigen::EigenvaluesOnly);
      min_s = std::min(min_s, es.eigenvalues().minCoeff());
    }
    sol.status =
        (min_s >= -opts.feas_tol) ? Status::Optimal : Status::Infeasible;
    sol.objective = sol.dual_bound = red.shift;
  } else {
    HsdResult h = Impl::run_hsd(red, opts);
    sol.status = h.status;
    sol.iterations = h.iterations;
    if (h.status == Status::Optimal || h.status == Status::MaxIter) {
      RealVector z_full = RealVector::Zero(red.N.cols());
      for (size_t k = 0; k < red.kept.size(); ++k) {
        z_full[red.kept[k]] = h.z[static_cast<int>(k)];
      }
      params = red.y0 + red.N * z_full;
      sol.objective = red.b.dot(h.z) + red.shift;
      sol.dual_bound = h.pobj + red.shift;
      sol.duality_gap = std::abs(h.pobj - h.dobj);
    }
  }

  sol.values.resize(vars_.size());
  for (size_t vi = 0; vi < vars_.size(); ++vi) {
    const Var& v = vars_[vi];
    Matrix m = Matrix::Zero(v.rows, v.cols);
    for (int p = 0; p < v.param_count; ++p) {
      const Real val = params[v.param_offset + p];
      if (val == 0.0) continue;
      for_each_param_entry(static_cast<int>(v.kind), v.rows, v.cols, p,
                           [&](ParamEntry pe) { m(pe.row, pe.col) += val * pe.val; });
    }
    sol.values[vi] = std::move(m);
  }

  if (sol.status == Status::Optimal || sol.status == Status::MaxIter) {
    Real viol = 0;
    RealVector z_all = red.N.transpose() * (params - red.y0);
    RealVector z_red = RealVector::Zero(red.b.size());
    for (size_t k = 0; k < red.kept.size(); ++k) {
      z_red[static_cast<int>(k)] = z_all[red.kept[k]];
    }
    for (const auto& blk : red.blocks) {
      RealMatrix S = blk.C;
      if (z_red.size()) S += unsvec(blk.F * z_red, blk.ne);
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(S, Eigen::EigenvaluesOnly);
      viol = std::max(viol, -es.eigenvalues().minCoeff());
    }
    if (comp.G.rows() > 0) {
      viol = std::max(viol, (comp.G * params - comp.h).cwiseAbs().maxCoeff());
    }
    sol.max_violation = std::max<Real>(0.0, viol);
  }
  return sol;
}

FeasibilityReport Problem::feasible(const Options& opts) const {
  Problem aug = *this;
  VarId t = aug.scalar("slack");
  for (auto& blk : aug.blocks_) {
    for (int j = 0; j < blk.dim; ++j) {
      blk.entry(j, j, LinExpr::scalar(t, -1.0));
    }
  }
  aug.maximize(LinExpr::scalar(t));
  aug.require_nonneg(LinExpr(1.0) - LinExpr::scalar(t));

  FeasibilityReport rep;
  Solution s = aug.solve(opts);
  rep.point = s;
  if (!rep.point.values.empty()) rep.point.values.pop_back();
  if (s.status != Status::Optimal) {
    rep.feasible = false;
    rep.margin = -std::numeric_limits<Real>::infinity();
    return rep;
  }
  rep.margin = s.objective;
  rep.feasible = s.objective >= -std::max(opts.feas_tol, 1e-9);
  return rep;
}

void Problem::dump_sdpa(std::ostream& os) const {
  Compiled comp = Impl::compile(*this);
  Reduced red;
  std::string msg;
  if (Impl::reduce(comp, red, 1e-7, &msg) != Status::Optimal) {
    os << "* reduction failed: " << msg << "\n";
    return;
  }
  // Our problem is max b.z with sum_k z_k G_k + C >= 0; in SDPA dual form
  // (min c.x, X = sum x_i F_i - F_0 >= 0) take c = -b, F_i = G_i, F_0 = -C.
  os << "* cohere sdp dump (reduced, real-embedded)\n";
  os << red.b.size() << " = mDIM\n";
  os << red.blocks.size() << " = nBLOCK\n";
  for (size_t i = 0; i < red.blocks.size(); ++i) {
    os << red.blocks[i].ne << (i + 1 < red.blocks.size() ? " " : "");
  }
  os << " = bLOCKsTRUCT\n";
  for (int k = 0; k < red.b.size(); ++k) {
    os << -red.b[k] << (k + 1 < red.b.size() ? " " : "");
  }
  os << "\n";
  auto emit = [&os](int k, int blk, const RealMatrix& m) {
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = i; j < m.cols(); ++j) {
        if (m(i, j) != 0.0) {
          os << k << " " << blk << " " << i + 1 << " " << j + 1 << " "
             << m(i, j) << "\n";
        }
      }
    }
  };
  for (size_t b = 0; b < red.blocks.size(); ++b) {
    emit(0, static_cast<int>(b) + 1, RealMatrix(-red.blocks[b].C));
  }
  for (int k = 0; k < red.b.size(); ++k) {
    for (size_t b = 0; b < red.blocks.size(); ++b) {
      emit(k + 1, static_cast<int>(b) + 1,
           unsvec(red.blocks[b].F.col(k), red.blocks[b].ne));
    }
  }
}

Real fidelity_sdp(const DensityMatrix& rho, const DensityMatrix& sigma,
                  const Options& opts) {
  if (rho.dim() != sigma.dim()) {
    throw DimensionMismatch("fidelity_sdp: dimension mismatch");
  }
  const int d = rho.dim();
  Problem p;
  VarId x = p.complex_rect(d, d, "X");
  auto& blk = p.psd_block(2 * d);
  blk.constant(0, 0, rho.mat());
  blk.constant(d, d, sigma.mat());
  blk.place(0, d, Complex(1, 0), x);
  p.maximize(LinExpr::re_tr(Matrix::Identity(d, d), x));
  Solution s = p.solve(opts);
  if (!s.ok()) {
    throw NumericalFailure(std::string("fidelity_sdp solve failed: ") +
                           to_string(s.status));
  }
  return s.objective;
}

}  // namespace cohere::sdp
