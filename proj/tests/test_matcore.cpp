// SPDX-License-Identifier: Apache-2.0

#include "cohere/matcore.hpp"

#include "doctest.h"
#include "helpers.hpp"

using namespace cohere;

TEST_CASE("maximally coherent states") {
  CHECK(maximally_coherent(1).dim() == 1);
  CHECK(maximally_coherent(1).amplitudes[0] == Complex(1, 0));
  auto psi2 = maximally_coherent(2);
  CHECK(psi2.amplitudes[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(psi2.amplitudes[1].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
  auto psi4 = maximally_coherent(4);
  for (int i = 0; i < 4; ++i) {
    CHECK(psi4.amplitudes[i] == Complex(0.5, 0));
  }
}

TEST_CASE("phase unitary") {
  CHECK(phase_unitary(1)(0, 0) == Complex(1, 0));
  Matrix z2 = phase_unitary(2);
  CHECK(std::abs(z2(0, 0) - Complex(1, 0)) < 1e-12);
  CHECK(std::abs(z2(1, 1) - Complex(-1, 0)) < 1e-12);
  Matrix z4 = phase_unitary(4);
  CHECK(std::abs(z4(1, 1) - Complex(0, 1)) < 1e-12);
  CHECK(std::abs(z4(2, 2) - Complex(-1, 0)) < 1e-12);
  CHECK(std::abs(z4(3, 3) - Complex(0, -1)) < 1e-12);
  for (int d : {1, 2, 3, 4, 7}) {
    Matrix z = phase_unitary(d);
    CHECK((z * z.adjoint() - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("dephase is the diagonal projection") {
  auto gen = test::rng(11);
  RealVector p(3);
  p << 0.2, 0.5, 0.3;
  auto delta = test::diagonal_state(p);
  CHECK((dephase(delta).mat() - delta.mat()).cwiseAbs().maxCoeff() == 0.0);

  auto psi2 = maximally_coherent(2).density();
  CHECK((dephase(psi2).mat() - Matrix::Identity(2, 2) * 0.5)
            .cwiseAbs()
            .maxCoeff() < 1e-15);

  for (int rep = 0; rep < 10; ++rep) {
    auto rho = test::random_state(4, gen);
    auto d1 = dephase(rho);
    auto d2 = dephase(d1);
    CHECK((d1.mat() - d2.mat()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d1.trace() == doctest::Approx(rho.trace()).epsilon(1e-14));
  }
}

TEST_CASE("fidelity agrees with the pure-state closed form") {
  auto psi2 = maximally_coherent(2).density();
  Matrix half = Matrix::Identity(2, 2) * 0.5;
  auto mixed = DensityMatrix::from_matrix(half);

  // oracle for pure rho: F = sqrt(<psi|sigma|psi>)
  const Real oracle = std::sqrt(
      (maximally_coherent(2).amplitudes.adjoint() * mixed.mat() *
       maximally_coherent(2).amplitudes)(0, 0)
          .real());
  CHECK(oracle == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(fidelity(psi2, mixed) == doctest::Approx(oracle).epsilon(1e-9));

  CHECK(fidelity(basis_state(0, 2), basis_state(1, 2)) ==
        doctest::Approx(0.0).epsilon(1e-12));

  auto gen = test::rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto rho = test::random_state(3, gen);
    auto sig = test::random_state(3, gen);
    CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fidelity(rho, sig) == doctest::Approx(fidelity(sig, rho)).epsilon(1e-9));
    // pure-vs-mixed closed form
    auto psi = test::random_pure(3, gen);
    const Real f = fidelity(psi.density(), sig);
    const Real closed =
        std::sqrt((psi.amplitudes.adjoint() * sig.mat() * psi.amplitudes)(0, 0)
                      .real());
    CHECK(f == doctest::Approx(closed).epsilon(1e-7));
  }
  CHECK_THROWS_AS(fidelity(psi2, test::random_state(3, gen)),
                  DimensionMismatch);
}

TEST_CASE("generalized fidelity handles subnormalized states") {
  Matrix half0 = Matrix::Zero(2, 2);
  half0(0, 0) = 0.5;
  auto sub = DensityMatrix::from_matrix(half0, false);
  CHECK(generalized_fidelity(sub, sub) == doctest::Approx(1.0).epsilon(1e-12));

  auto gen = test::rng(7);
  auto rho = test::random_state(2, gen);
  auto sig = test::random_state(2, gen);
  CHECK(generalized_fidelity(rho, sig) ==
        doctest::Approx(fidelity(rho, sig)).epsilon(1e-12));

  auto zero = DensityMatrix::from_matrix(Matrix::Zero(2, 2), false);
  CHECK(generalized_fidelity(zero, rho) == doctest::Approx(0.0));
}

TEST_CASE("purified and trace distance satisfy Fuchs-van de Graaf") {
  auto gen = test::rng(13);
  auto rho0 = test::random_state(2, gen);
  CHECK(purified_distance(rho0, rho0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(purified_distance(basis_state(0, 2), basis_state(1, 2)) ==
        doctest::Approx(1.0).epsilon(1e-12));

  RealVector p1(2), p2(2);
  p1 << 0.6, 0.4;
  p2 << 0.5, 0.5;
  CHECK(trace_distance(test::diagonal_state(p1), test::diagonal_state(p2)) ==
        doctest::Approx(0.1).epsilon(1e-12));

  for (int d : {2, 3, 4}) {
    for (int rep = 0; rep < 1000; ++rep) {
      auto a = test::random_state(d, gen);
      auto b = test::random_state(d, gen);
      const Real td = trace_distance(a, b);
      const Real pd = purified_distance(a, b);
      CHECK(1.0 - std::sqrt(1.0 - pd * pd) <= td + 1e-9);
      CHECK(td <= pd + 1e-9);
    }
  }

  // triangle inequality on a few triples
  for (int rep = 0; rep < 50; ++rep) {
    auto a = test::random_state(3, gen);
    auto b = test::random_state(3, gen);
    auto c = test::random_state(3, gen);
    CHECK(purified_distance(a, c) <=
          purified_distance(a, b) + purified_distance(b, c) + 1e-9);
  }
}

TEST_CASE("von Neumann entropy") {
  auto gen0 = test::rng(3);
  CHECK(von_neumann_entropy(test::random_pure(4, gen0).density()) ==
        doctest::Approx(0.0).epsilon(1e-9));
  auto mixed = DensityMatrix::from_matrix(Matrix::Identity(2, 2) * 0.5);
  CHECK(von_neumann_entropy(mixed) == doctest::Approx(1.0).epsilon(1e-12));
  RealVector p(2);
  p << 0.75, 0.25;
  CHECK(von_neumann_entropy(test::diagonal_state(p)) ==
        doctest::Approx(0.811278124459).epsilon(1e-9));

  auto gen = test::rng(17);
  auto a = test::random_state(2, gen);
  auto b = test::random_state(3, gen);
  CHECK(von_neumann_entropy(tensor(a, b)) ==
        doctest::Approx(von_neumann_entropy(a) + von_neumann_entropy(b))
            .epsilon(1e-8));
}

TEST_CASE("purification round trip") {
  auto gen = test::rng(23);

  auto pure = test::random_pure(3, gen).density();
  auto p1 = purify(pure);
  CHECK(p1.dim_env == 1);

  auto mixed = DensityMatrix::from_matrix(Matrix::Identity(2, 2) * 0.5);
  auto p2 = purify(mixed);
  CHECK(p2.dim_env == 2);
  CHECK(von_neumann_entropy(DensityMatrix::from_matrix(
            partial_trace_second(p2.psi.projector(), 2, 2))) ==
        doctest::Approx(1.0).epsilon(1e-9));

  for (int rep = 0; rep < 10; ++rep) {
    auto rho = test::random_rank_state(3, 2, gen);
    auto p = purify(rho);
    Matrix back = partial_trace_second(p.psi.projector(), 3, p.dim_env);
    CHECK((back - rho.mat()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(p.cq.reconstruction_error() < 1e-10);
    for (int x = 0; x < 3; ++x) {
      CHECK(p.cq.probs[x] == doctest::Approx(rho.mat()(x, x).real()).epsilon(1e-10));
    }
  }
}

TEST_CASE("tensor products and copies") {
  auto gen = test::rng(29);
  auto rho = test::random_state(3, gen);
  auto one = DensityMatrix::from_matrix(Matrix::Identity(1, 1));
  CHECK((tensor(rho, one).mat() - rho.mat()).cwiseAbs().maxCoeff() < 1e-15);

  auto psi2 = maximally_coherent(2).density();
  auto psi4 = maximally_coherent(4).density();
  CHECK((n_copies(psi2, 2).mat() - psi4.mat()).cwiseAbs().maxCoeff() < 1e-12);

  auto sig = test::random_state(2, gen);
  CHECK(tensor(rho, sig).trace() ==
        doctest::Approx(rho.trace() * sig.trace()).epsilon(1e-12));

  CHECK_THROWS_AS(n_copies(psi2, 3, 4), CapExceeded);
}

TEST_CASE("eigendecomposition reconstructs the input") {
  auto gen = test::rng(31);
  for (int d : {2, 4, 8}) {
    auto rho = test::random_state(d, gen);
    auto e = eigh(rho.mat());
    Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.adjoint();
    CHECK((back - rho.mat()).norm() < 1e-10);
  }
}

TEST_CASE("density matrix validation") {
  Matrix bad(2, 2);
  bad << Complex(0.5, 0), Complex(0.1, 0.2), Complex(0.1, 0.3), Complex(0.5, 0);
  CHECK_THROWS_AS(DensityMatrix::from_matrix(bad), InvalidState);

  Matrix neg(2, 2);
  neg << Complex(1.5, 0), Complex(0, 0), Complex(0, 0), Complex(-0.5, 0);
  CHECK_THROWS_AS(DensityMatrix::from_matrix(neg), InvalidState);

  Matrix sub = Matrix::Identity(2, 2) * 0.25;
  CHECK_THROWS_AS(DensityMatrix::from_matrix(sub, true), InvalidState);
  CHECK(DensityMatrix::from_matrix(sub, false).trace() ==
        doctest::Approx(0.5));
}
