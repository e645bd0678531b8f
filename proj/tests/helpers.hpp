// SPDX-License-Identifier: Apache-2.0
//
// Shared test fixtures: deterministic random states and the four-dimensional
// two-qubit mixture used throughout the bound-coherence checks.

#pragma once

#include "cohere/matcore.hpp"

#include <random>

namespace cohere::test {

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline Matrix random_ginibre(int d, std::mt19937_64& gen) {
  std::normal_distribution<Real> n(0.0, 1.0);
  Matrix g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = Complex(n(gen), n(gen));
  }
  return g;
}

inline DensityMatrix random_state(int d, std::mt19937_64& gen) {
  Matrix g = random_ginibre(d, gen);
  Matrix m = g * g.adjoint();
  m /= m.trace();
  return DensityMatrix::from_matrix(m);
}

inline DensityMatrix random_rank_state(int d, int rank, std::mt19937_64& gen) {
  std::normal_distribution<Real> n(0.0, 1.0);
  Matrix m = Matrix::Zero(d, d);
  for (int k = 0; k < rank; ++k) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = Complex(n(gen), n(gen));
    m += v * v.adjoint();
  }
  m /= m.trace();
  return DensityMatrix::from_matrix(m);
}

inline PureState random_pure(int d, std::mt19937_64& gen) {
  std::normal_distribution<Real> n(0.0, 1.0);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = Complex(n(gen), n(gen));
  v /= v.norm();
  return PureState(v);
}

/// 1/2 (|++><++| + |-~+><-~+|): the equal mixture of (1,1,1,1)/2 and
/// (1,i,-1,-i)/2, a state with one bit of relative-entropy coherence that is
/// undistillable by SIO.
inline DensityMatrix bound_state() {
  Vector p1(4), p2(4);
  p1 << 0.5, 0.5, 0.5, 0.5;
  p2 << Complex(0.5, 0), Complex(0, 0.5), Complex(-0.5, 0), Complex(0, -0.5);
  Matrix m = 0.5 * (p1 * p1.adjoint() + p2 * p2.adjoint());
  return DensityMatrix::from_matrix(m);
}

inline DensityMatrix diagonal_state(const RealVector& p) {
  Matrix m = Matrix::Zero(p.size(), p.size());
  for (int i = 0; i < p.size(); ++i) m(i, i) = p[i];
  return DensityMatrix::from_matrix(m);
}

inline DensityMatrix bloch_state(Real x, Real y, Real z) {
  Matrix m(2, 2);
  m(0, 0) = Complex(0.5 * (1 + z), 0);
  m(1, 1) = Complex(0.5 * (1 - z), 0);
  m(0, 1) = Complex(0.5 * x, -0.5 * y);
  m(1, 0) = Complex(0.5 * x, 0.5 * y);
  return DensityMatrix::from_matrix(m);
}

}  // namespace cohere::test
