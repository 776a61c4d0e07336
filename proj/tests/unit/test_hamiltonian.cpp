#include <cmath>

#include <gtest/gtest.h>

#include "esqpt/errors.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/quantum_state.hpp"

using namespace esqpt;

TEST(Hamiltonian, MatrixElements) {
  const HilbertSpace space(10);
  const double size = 15.0, lambda = 2.0, delta = 0.3;
  const SymmetricBand h = build_hamiltonian({size, lambda, delta, std::nullopt}, space);
  EXPECT_EQ(h.bandwidth(), 3);
  const double g = lambda / std::sqrt(size);
  for (int n = 0; n <= 10; ++n) {
    EXPECT_DOUBLE_EQ(h(HilbertSpace::index(n, 0), HilbertSpace::index(n, 0)), -0.5 + n / size);
    EXPECT_DOUBLE_EQ(h(HilbertSpace::index(n, 1), HilbertSpace::index(n, 1)), 0.5 + n / size);
  }
  for (int n = 0; n < 10; ++n) {
    // ⟨↑,n| J₊â |↓,n+1⟩ and ⟨↑,n+1| J₊â† |↓,n⟩.
    EXPECT_NEAR(h(HilbertSpace::index(n, 1), HilbertSpace::index(n + 1, 0)),
                g * 0.5 * (1 + delta) * std::sqrt(n + 1.0), 1e-15);
    EXPECT_NEAR(h(HilbertSpace::index(n + 1, 1), HilbertSpace::index(n, 0)),
                g * 0.5 * (1 - delta) * std::sqrt(n + 1.0), 1e-15);
  }
  EXPECT_EQ(h(HilbertSpace::index(2, 0), HilbertSpace::index(2, 1)), 0.0);
}

TEST(Hamiltonian, TermsRecombine) {
  const HilbertSpace space(12);
  const ErmTerms terms = erm_terms(20.0, -0.4, space);
  const SymmetricBand h = build_hamiltonian({20.0, 3.0, -0.4, std::nullopt}, space);
  EXPECT_LT((terms.at(3.0).to_dense() - h.to_dense()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Hamiltonian, ParityCommutes) {
  const HilbertSpace space(30);
  const Eigen::MatrixXd p = build_parity(space).to_dense();
  for (double delta : {-1.0, -0.2, 0.0, 0.5, 1.0}) {
    const Eigen::MatrixXd h = build_hamiltonian({15.0, 4.0, delta, std::nullopt}, space).to_dense();
    EXPECT_LT((h * p - p * h).cwiseAbs().maxCoeff(), 1e-14) << "delta = " << delta;
  }
  EXPECT_EQ(parity_of(0, 0), 1);
  EXPECT_EQ(parity_of(0, 1), -1);
  EXPECT_EQ(parity_of(3, 1), 1);
}

TEST(Hamiltonian, JcLimitKeepsVacuumStationary) {
  const HilbertSpace space(8);
  const SymmetricBand h = build_hamiltonian({10.0, 5.0, 1.0, std::nullopt}, space);
  const Eigen::VectorXcd v = QuantumState::vacuum(space).amplitudes;
  const Eigen::VectorXcd hv = h.apply(v);
  EXPECT_LT((hv + 0.5 * v).norm(), 1e-15);
}

TEST(Hamiltonian, Operators) {
  const HilbertSpace space(5);
  const QuantumState s = QuantumState::basis(space, 3, 1);
  EXPECT_DOUBLE_EQ(s.expectation(number_operator(space)), 3.0);
  EXPECT_DOUBLE_EQ(s.expectation(jz_operator(space)), 0.5);
  EXPECT_DOUBLE_EQ(s.expectation(qubit_down_projector(space)), 0.0);
  EXPECT_DOUBLE_EQ(QuantumState::vacuum(space).expectation(vacuum_down_projector(space)), 1.0);
}

TEST(Hamiltonian, BlueSidebandCouplesDownToUpPlusOne) {
  const HilbertSpace space(6);
  const double w = 3.0;
  const SymmetricBand b = blue_sideband_operator(w, space);
  for (int n = 0; n < 6; ++n) {
    EXPECT_NEAR(b(HilbertSpace::index(n, 0), HilbertSpace::index(n + 1, 1)), 0.5 * w * std::sqrt(n + 1.0), 1e-15);
    EXPECT_EQ(b(HilbertSpace::index(n, 1), HilbertSpace::index(n + 1, 0)), 0.0);
  }
}

TEST(Hamiltonian, InvalidParameters) {
  EXPECT_THROW(build_hamiltonian({15.0, 1.0, 2.0, std::nullopt}, HilbertSpace(4)), ParameterError);
}

TEST(QuantumStateTest, NormalizationAndTail) {
  const HilbertSpace space(20);
  QuantumState s = QuantumState::basis(space, 20, 0);
  EXPECT_TRUE(s.is_normalized());
  EXPECT_DOUBLE_EQ(s.tail_mass(), 1.0);
  EXPECT_THROW(check_cutoff(s), CutoffError);
  EXPECT_NO_THROW(check_cutoff(QuantumState::vacuum(space)));
  s.amplitudes *= 2.0;
  EXPECT_FALSE(s.is_normalized());
  s.normalize();
  EXPECT_NEAR(s.norm_squared(), 1.0, 1e-15);
  const Eigen::VectorXd p = s.fock_populations();
  EXPECT_DOUBLE_EQ(p[20], 1.0);
}
