#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "esqpt/errors.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/semiclassics.hpp"
#include "esqpt/spectrum.hpp"

using namespace esqpt;

class JcOracle : public ::testing::TestWithParam<std::tuple<int, double>> {};

TEST_P(JcOracle, LowestFiftyMatchClosedForm) {
  const auto [sign, lambda] = GetParam();
  const HilbertSpace space(400);
  const Spectrum s = diagonalize_erm({15.0, lambda, static_cast<double>(sign), std::nullopt}, space,
                                     Selection::lowest(50));
  const std::vector<double> exact = jc_spectrum_analytic(15.0, lambda, sign, 399);
  ASSERT_EQ(s.size(), 50u);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) worst = std::max(worst, std::abs(s.eigenvalues[i] - exact[i]));
  EXPECT_LE(worst, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Couplings, JcOracle,
                         ::testing::Combine(::testing::Values(1, -1), ::testing::Values(0.5, 2.0, 4.0)));

TEST(Spectrum, SectorRouteAgreesWithDense) {
  const HilbertSpace space(60);
  const ModelParams p{12.0, 2.5, 0.4, std::nullopt};
  const SymmetricBand h = build_hamiltonian(p, space);
  const Spectrum dense = diagonalize(h, space);
  const Spectrum sect = diagonalize_sectors(h, space);
  ASSERT_EQ(dense.size(), sect.size());
  EXPECT_LT((dense.eigenvalues - sect.eigenvalues).cwiseAbs().maxCoeff(), 1e-11);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (!dense.near_degenerate[i]) EXPECT_EQ(dense.parities[i], sect.parities[i]) << i;
  }
  EXPECT_LT(sect.max_residual, 1e-9);
}

TEST(Spectrum, EigenvectorsHaveDefiniteParity) {
  const HilbertSpace space(40);
  const Spectrum s = diagonalize_erm({10.0, 3.0, 0.0, std::nullopt}, space);
  const SymmetricBand parity = build_parity(space);
  ASSERT_TRUE(s.has_vectors());
  for (std::size_t j = 0; j < s.size(); ++j) {
    const Eigen::VectorXd v = s.eigenvectors.col(static_cast<Eigen::Index>(j));
    EXPECT_NEAR(v.dot(parity.apply(v)), s.parities[j], 1e-10);
  }
}

TEST(Spectrum, WindowSelection) {
  const HilbertSpace space(200);
  const ModelParams p{20.0, 4.0, 0.5, std::nullopt};
  const Spectrum all = diagonalize_erm(p, space, Selection::all(), {.vectors = false});
  const Spectrum win = diagonalize_erm(p, space, Selection::window(-1.0, -0.5));
  const auto expected = std::count_if(all.eigenvalues.begin(), all.eigenvalues.end(),
                                       [](double e) { return e > -1.0 && e <= -0.5; });
  ASSERT_EQ(static_cast<long>(win.size()), expected);
  EXPECT_TRUE(win.has_vectors());
  EXPECT_GT(win.eigenvalues.minCoeff(), -1.0);
  EXPECT_LE(win.eigenvalues.maxCoeff(), -0.5);
}

TEST(Spectrum, LevelDynamicsCsv) {
  const HilbertSpace space(30);
  const auto rows = level_dynamics(10.0, 0.5, {0.0, 1.0, 2.0}, 4, space, 2);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_DOUBLE_EQ(rows.front().energy, -0.5);  // λ = 0 ground state
  std::ostringstream os;
  write_levels_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "lambda,index,energy,parity");
}

TEST(Spectrum, JsonExport) {
  const Spectrum s = diagonalize_erm({10.0, 1.0, 0.2, std::nullopt}, HilbertSpace(10), Selection::lowest(3));
  const auto j = to_json(s);
  EXPECT_EQ(j["eigenvalues"].size(), 3u);
}

TEST(Spectrum, RejectsBadSelection) {
  EXPECT_THROW(diagonalize_erm({10.0, 1.0, 0.2, std::nullopt}, HilbertSpace(10), Selection::lowest(0)),
               DomainError);
}
