// SPDX-License-Identifier: Apache-2.0

#include "cohere/matcore.hpp"

#include <algorithm>
#include <cmath>

namespace cohere {

namespace {

void check_same_dim(const DensityMatrix& a, const DensityMatrix& b,
                    const char* what) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch(std::string(what) + ": dimension mismatch " +
                            std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }
}

}  // namespace

Real herm_deviation(const Matrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

Real min_eigenvalue(const Matrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian,
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

DensityMatrix DensityMatrix::from_matrix(Matrix m, bool normalized) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidState("density matrix must be square and nonempty");
  }
  if (!m.allFinite()) throw InvalidState("density matrix has non-finite entries");
  const Real scale = std::max<Real>(1.0, m.cwiseAbs().maxCoeff());
  if (herm_deviation(m) > kHermTol * scale) {
    throw InvalidState("density matrix is not Hermitian within tolerance");
  }
  m = ((m + m.adjoint()) / 2.0).eval();
  const Real tr = m.trace().real();
  if (normalized) {
    if (std::abs(tr - 1.0) > kTraceTol) {
      throw InvalidState("normalized density matrix must have unit trace");
    }
  } else {
    // the zero operator is admitted as the degenerate edge of the
    // subnormalized ball
    if (tr < -kTraceTol || tr > 1.0 + kTraceTol) {
      throw InvalidState("subnormalized trace must lie in [0, 1]");
    }
  }
  // Full spectral check only at moderate dimension; large operators are
  // produced by tensoring validated inputs.
  if (m.rows() <= 512) {
    if (min_eigenvalue(m) < -kPsdTol * scale) {
      throw InvalidState("density matrix has a negative eigenvalue");
    }
  } else if (m.diagonal().real().minCoeff() < -kPsdTol) {
    throw InvalidState("density matrix has a negative diagonal entry");
  }
  DensityMatrix out;
  out.mat_ = std::move(m);
  out.normalized_ = normalized;
  return out;
}

DensityMatrix DensityMatrix::from_matrix_unchecked(Matrix m, bool normalized) {
  DensityMatrix out;
  out.mat_ = ((m + m.adjoint()) / 2.0).eval();
  out.normalized_ = normalized;
  return out;
}

bool DensityMatrix::is_diagonal(Real tol) const {
  for (int i = 0; i < dim(); ++i) {
    for (int j = 0; j < dim(); ++j) {
      if (i != j && std::abs(mat_(i, j)) > tol) return false;
    }
  }
  return true;
}

PureState::PureState(Vector a) : amplitudes(std::move(a)) {
  if (amplitudes.size() == 0) throw InvalidState("empty pure state");
  const Real n2 = amplitudes.squaredNorm();
  if (std::abs(n2 - 1.0) > kTraceTol) {
    throw InvalidState("pure state is not normalized");
  }
}

DensityMatrix PureState::density() const {
  return DensityMatrix::from_matrix_unchecked(projector(), true);
}

Real CqState::reconstruction_error() const {
  Matrix rebuilt = Matrix::Zero(joint.rows(), joint.cols());
  for (int x = 0; x < num_symbols; ++x) {
    rebuilt.block(x * dim_env, x * dim_env, dim_env, dim_env) +=
        env[static_cast<size_t>(x)] * env[static_cast<size_t>(x)].adjoint();
  }
  return (rebuilt - joint).cwiseAbs().maxCoeff();
}

EigH eigh(const Matrix& hermitian) {
  Matrix sym = (hermitian + hermitian.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("hermitian eigendecomposition failed");
  }
  return EigH{es.eigenvalues(), es.eigenvectors()};
}

Matrix sqrt_psd(const Matrix& hermitian) {
  EigH e = eigh(hermitian);
  RealVector s = e.values;
  for (int i = 0; i < s.size(); ++i) {
    s[i] = s[i] > 0 ? std::sqrt(s[i]) : 0.0;
  }
  return e.vectors * s.asDiagonal() * e.vectors.adjoint();
}

int rank_psd(const Matrix& hermitian, Real tol) {
  EigH e = eigh(hermitian);
  int r = 0;
  for (int i = 0; i < e.values.size(); ++i) {
    if (e.values[i] > tol) ++r;
  }
  return r;
}

PureState maximally_coherent(int M) {
  if (M < 1) throw InvalidState("maximally_coherent: M must be >= 1");
  Vector v = Vector::Constant(M, Complex(1.0 / std::sqrt(Real(M)), 0.0));
  return PureState(std::move(v));
}

Matrix phase_unitary(int d) {
  if (d < 1) throw InvalidState("phase_unitary: d must be >= 1");
  Matrix z = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const Real theta = 2.0 * M_PI * Real(k) / Real(d);
    z(k, k) = Complex(std::cos(theta), std::sin(theta));
  }
  return z;
}

DensityMatrix basis_state(int x, int d) {
  Matrix m = Matrix::Zero(d, d);
  m(x, x) = 1.0;
  return DensityMatrix::from_matrix_unchecked(std::move(m), true);
}

Matrix dephase(const Matrix& m) {
  return m.diagonal().asDiagonal();
}

DensityMatrix dephase(const DensityMatrix& rho) {
  return DensityMatrix::from_matrix_unchecked(dephase(rho.mat()),
                                              rho.normalized());
}

Real fidelity(const Matrix& rho, const Matrix& sigma) {
  if (rho.rows() != sigma.rows()) {
    throw DimensionMismatch("fidelity: dimension mismatch");
  }
  Matrix root = sqrt_psd(rho);
  Matrix inner = root * sigma * root;
  EigH e = eigh(inner);
  Real f = 0.0;
  for (int i = 0; i < e.values.size(); ++i) {
    if (e.values[i] > 0) f += std::sqrt(e.values[i]);
  }
  return f;
}

Real fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  check_same_dim(rho, sigma, "fidelity");
  return fidelity(rho.mat(), sigma.mat());
}

Real generalized_fidelity(const DensityMatrix& rho,
                          const DensityMatrix& sigma) {
  check_same_dim(rho, sigma, "generalized_fidelity");
  const Real ta = std::min<Real>(1.0, rho.trace());
  const Real tb = std::min<Real>(1.0, sigma.trace());
  return fidelity(rho, sigma) + std::sqrt((1.0 - ta) * (1.0 - tb));
}

Real purified_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const Real f = std::min<Real>(1.0, generalized_fidelity(rho, sigma));
  return std::sqrt(std::max<Real>(0.0, 1.0 - f * f));
}

Real trace_norm_half(const Matrix& herm) {
  EigH e = eigh(herm);
  return 0.5 * e.values.cwiseAbs().sum();
}

Real trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  check_same_dim(rho, sigma, "trace_distance");
  return trace_norm_half(rho.mat() - sigma.mat());
}

Real von_neumann_entropy(const DensityMatrix& rho) {
  EigH e = eigh(rho.mat());
  Real s = 0.0;
  for (int i = 0; i < e.values.size(); ++i) {
    const Real l = e.values[i];
    if (l > 1e-300) s -= l * std::log2(l);
  }
  return s;
}

Purification purify(const DensityMatrix& rho) {
  EigH e = eigh(rho.mat());
  const int d = rho.dim();
  std::vector<int> keep;
  for (int i = 0; i < d; ++i) {
    if (e.values[i] > 1e-12) keep.push_back(i);
  }
  if (keep.empty()) throw InvalidState("purify: zero operator");
  const int r = static_cast<int>(keep.size());

  // |psi> = sum_k sqrt(l_k) |e_k>^A |k>^E, index (a, k) -> a*r + k.
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(d) * r);
  for (int k = 0; k < r; ++k) {
    const Real root = std::sqrt(e.values[keep[static_cast<size_t>(k)]]);
    for (int a = 0; a < d; ++a) {
      psi[static_cast<Eigen::Index>(a) * r + k] =
          root * e.vectors(a, keep[static_cast<size_t>(k)]);
    }
  }
  psi /= psi.norm();

  CqState cq;
  cq.num_symbols = d;
  cq.dim_env = r;
  cq.probs = RealVector::Zero(d);
  cq.env.reserve(static_cast<size_t>(d));
  cq.joint = Matrix::Zero(psi.size(), psi.size());
  for (int a = 0; a < d; ++a) {
    Vector u = psi.segment(static_cast<Eigen::Index>(a) * r, r);
    cq.probs[a] = u.squaredNorm();
    cq.joint.block(a * r, a * r, r, r) = u * u.adjoint();
    cq.env.push_back(std::move(u));
  }

  Purification out;
  out.psi = PureState(std::move(psi));
  out.dim_a = d;
  out.dim_env = r;
  out.cq = std::move(cq);
  return out;
}

Matrix tensor(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vector tensor(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (int i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a[i] * b;
  }
  return out;
}

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b,
                     int dim_cap) {
  const long prod = static_cast<long>(a.dim()) * b.dim();
  if (prod > dim_cap) {
    throw CapExceeded("tensor: product dimension " + std::to_string(prod) +
                      " exceeds cap " + std::to_string(dim_cap));
  }
  return DensityMatrix::from_matrix_unchecked(
      tensor(a.mat(), b.mat()), a.normalized() && b.normalized());
}

DensityMatrix n_copies(const DensityMatrix& rho, int n, int dim_cap) {
  if (n < 1) throw InvalidState("n_copies: n must be >= 1");
  DensityMatrix out = rho;
  for (int i = 1; i < n; ++i) out = tensor(out, rho, dim_cap);
  return out;
}

Matrix partial_trace_second(const Matrix& joint, int dim_a, int dim_b) {
  if (joint.rows() != static_cast<long>(dim_a) * dim_b) {
    throw DimensionMismatch("partial_trace_second: bad dimensions");
  }
  Matrix out = Matrix::Zero(dim_a, dim_a);
  for (int i = 0; i < dim_a; ++i) {
    for (int j = 0; j < dim_a; ++j) {
      Complex s = 0.0;
      for (int k = 0; k < dim_b; ++k) {
        s += joint(i * dim_b + k, j * dim_b + k);
      }
      out(i, j) = s;
    }
  }
  return out;
}

Matrix partial_trace_first(const Matrix& joint, int dim_a, int dim_b) {
  if (joint.rows() != static_cast<long>(dim_a) * dim_b) {
    throw DimensionMismatch("partial_trace_first: bad dimensions");
  }
  Matrix out = Matrix::Zero(dim_b, dim_b);
  for (int i = 0; i < dim_b; ++i) {
    for (int j = 0; j < dim_b; ++j) {
      Complex s = 0.0;
      for (int k = 0; k < dim_a; ++k) {
        s += joint(k * dim_b + i, k * dim_b + j);
      }
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace cohere
