// SPDX-License-Identifier: Apache-2.0
//
// Dense complex-matrix and quantum-state primitives. Everything is a value
// type over Eigen dense storage; all functions are pure and reentrant.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace cohere {

using Real = double;
using Complex = std::complex<Real>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Real kHermTol = 1e-10;
inline constexpr Real kPsdTol = 1e-10;
inline constexpr Real kTraceTol = 1e-10;
inline constexpr Real kSupportTol = 1e-9;
inline constexpr int kDefaultDimCap = 4096;

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidState : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Hermitian PSD operator in the fixed incoherent (computational) basis.
/// Subnormalized operators (0 < trace <= 1) are first-class and carry
/// normalized() == false; they arise from smoothing balls.
class DensityMatrix {
 public:
  DensityMatrix() = default;

  /// Validates Hermiticity, positivity and trace before accepting `m`.
  static DensityMatrix from_matrix(Matrix m, bool normalized = true);

  /// Skips the spectral check; for internal paths where positivity is
  /// guaranteed by construction. Hermiticity and trace are still enforced.
  static DensityMatrix from_matrix_unchecked(Matrix m, bool normalized = true);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Matrix& mat() const { return mat_; }
  bool normalized() const { return normalized_; }
  Real trace() const { return mat_.trace().real(); }

  bool is_diagonal(Real tol = kSupportTol) const;

 private:
  Matrix mat_;
  bool normalized_ = true;
};

/// Unit vector in the incoherent basis.
struct PureState {
  Vector amplitudes;

  explicit PureState(Vector a);
  PureState() = default;

  int dim() const { return static_cast<int>(amplitudes.size()); }
  Matrix projector() const { return amplitudes * amplitudes.adjoint(); }
  DensityMatrix density() const;
};

/// Classical-quantum state omega = sum_x p_x |x><x| (x) psi_x on X (x) E,
/// obtained by dephasing the system side of a purification. env holds the
/// unnormalized environment vectors u_x with |u_x|^2 = p_x.
struct CqState {
  int num_symbols = 0;
  int dim_env = 0;
  RealVector probs;
  std::vector<Vector> env;  // unnormalized: u_x = sqrt(p_x) psi_x
  Matrix joint;             // on X (x) E, dim num_symbols * dim_env

  /// Reconstructs sum_x |x><x| (x) u_x u_x^dag and checks it against joint.
  Real reconstruction_error() const;
};

struct Purification {
  PureState psi;  // on A (x) E
  int dim_a = 0;
  int dim_env = 0;
  CqState cq;  // (Delta (x) id) psi
};

// --- eigendecomposition helpers -------------------------------------------

struct EigH {
  RealVector values;  // ascending
  Matrix vectors;     // columns
};

/// Hermitian eigendecomposition (input symmetrized first).
EigH eigh(const Matrix& hermitian);

/// PSD square root; eigenvalues in [-kPsdTol, 0) are clamped to zero.
Matrix sqrt_psd(const Matrix& hermitian);

/// Rank of a PSD matrix at the given eigenvalue threshold.
int rank_psd(const Matrix& hermitian, Real tol = 1e-12);

// --- constructors ----------------------------------------------------------

/// |Psi_M> = 1/sqrt(M) sum_x |x>.
PureState maximally_coherent(int M);

/// diag(1, e^{2 pi i/d}, ..., e^{2 pi i (d-1)/d}).
Matrix phase_unitary(int d);

DensityMatrix basis_state(int x, int d);

// --- channels on states (the trivial ones live here) ------------------------

/// Completely dephasing map: zero off-diagonals, diagonal kept exactly.
DensityMatrix dephase(const DensityMatrix& rho);
Matrix dephase(const Matrix& m);

// --- distances and entropies -----------------------------------------------

/// Root fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)). For subnormalized
/// inputs this is just the root-fidelity term (see generalized_fidelity).
Real fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);
Real fidelity(const Matrix& rho, const Matrix& sigma);

/// F(rho, sigma) + sqrt((1 - Tr rho)(1 - Tr sigma)).
Real generalized_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

/// P = sqrt(1 - generalized_fidelity^2).
Real purified_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

/// (1/2) sum |eig(rho - sigma)|.
Real trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);
Real trace_norm_half(const Matrix& herm);

/// -sum lambda log2 lambda, with 0 log 0 := 0. Bits.
Real von_neumann_entropy(const DensityMatrix& rho);

// --- purification ------------------------------------------------------------

/// Canonical purification |psi> = sum_k sqrt(l_k) |e_k>|k> with
/// dim E = rank(rho), plus the dephased cq-state read off in the
/// computational basis: p_x = rho_xx, u_x[k] = sqrt(l_k) <x|e_k>.
Purification purify(const DensityMatrix& rho);

// --- tensor products ----------------------------------------------------------

Matrix tensor(const Matrix& a, const Matrix& b);
Vector tensor(const Vector& a, const Vector& b);
DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b,
                     int dim_cap = kDefaultDimCap);
DensityMatrix n_copies(const DensityMatrix& rho, int n,
                       int dim_cap = kDefaultDimCap);

/// Trace out the second factor of a matrix on A (x) B.
Matrix partial_trace_second(const Matrix& joint, int dim_a, int dim_b);
Matrix partial_trace_first(const Matrix& joint, int dim_a, int dim_b);

// --- small utilities ----------------------------------------------------------

inline Real log2_safe(Real x) { return std::log2(x); }
Real herm_deviation(const Matrix& m);
Real min_eigenvalue(const Matrix& hermitian);

}  // namespace cohere
