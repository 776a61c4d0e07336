#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "esqpt/errors.hpp"
#include "esqpt/semiclassics.hpp"

using namespace esqpt;

namespace {

// Independent route to the volumes: along each ray the level set h = e on the
// m = −1/2 branch solves (u − 2e)² = g·u + 1 for u = r², so the area enclosed
// by a level curve is ½∮u(φ)dφ. The inner region is bounded by the smaller
// root at e_sad, the outer ring by the larger root at e_sad and u = g − 2 at
// e_vac = −1/2. Composite Simpson on a fine grid; the √ endpoint behavior at
// the saddle direction limits it to ~1e−8.
struct VolumeOracle {
  double inner = 0.0, outer = 0.0;
};

VolumeOracle volume_oracle(double lambda, double delta) {
  const double e = -((lambda * delta) * (lambda * delta) + 1.0 / ((lambda * delta) * (lambda * delta))) / 4.0;
  const int n = 400000;
  const double h = (kPi / 2) / n;
  VolumeOracle v;
  for (int k = 0; k <= n; ++k) {
    const double phi = k * h;
    const double g = 2 * lambda * lambda * (std::cos(phi) * std::cos(phi) + delta * delta * std::sin(phi) * std::sin(phi));
    const double b = 4 * e + g;
    const double disc = std::sqrt(std::max(0.0, b * b - 4 * (4 * e * e - 1)));
    const double um = 0.5 * (b - disc), up = 0.5 * (b + disc);
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    v.inner += w * 0.5 * um;
    v.outer += w * 0.5 * ((g - 2.0) - up);
  }
  v.inner *= 4 * h / 3;
  v.outer *= 4 * h / 3;
  return v;
}

}  // namespace

TEST(ClassicalEnergy, OriginAndMinimum) {
  EXPECT_DOUBLE_EQ(classical_energy({0, 0, -0.5}, 4.0, 0.5), -0.5);
  EXPECT_DOUBLE_EQ(classical_energy({0, 0, 0.5}, 4.0, 0.5), 0.5);
  const CriticalSet c = critical_set(4.0, 0.5);
  EXPECT_NEAR(classical_energy({c.x_c, 0, -0.5}, 4.0, 0.5), c.e_min, 1e-14);
  ASSERT_TRUE(c.p_c.has_value());
  EXPECT_NEAR(classical_energy({0, *c.p_c, -0.5}, 4.0, 0.5), *c.e_sad, 1e-14);
}

TEST(CriticalSetTest, ClosedForms) {
  const CriticalSet c = critical_set(4.0, 0.5);
  EXPECT_DOUBLE_EQ(c.e_vac, -0.5);
  EXPECT_NEAR(c.e_min, -(16.0 + 1.0 / 16.0) / 4.0, 1e-15);
  ASSERT_TRUE(c.e_sad.has_value());
  EXPECT_NEAR(*c.e_sad, -(4.0 + 0.25) / 4.0, 1e-15);
  EXPECT_NEAR(c.x_c * c.x_c / 2.0, 3.984375, 1e-12);
  EXPECT_DOUBLE_EQ(c.lambda_0, 2.0);
  EXPECT_FALSE(critical_set(1.5, 0.5).e_sad.has_value());
  EXPECT_DOUBLE_EQ(critical_set(0.5, 0.0).x_c, 0.0);
  EXPECT_THROW(critical_set(-1.0, 0.0), ParameterError);
}

TEST(PhaseClassificationTest, Labels) {
  EXPECT_EQ(classify_phase(4.0, 0.5).label, PhaseLabel::S2);
  EXPECT_EQ(classify_phase(4.0, -0.5).label, PhaseLabel::S2Prime);
  EXPECT_EQ(classify_phase(1.5, 0.5).label, PhaseLabel::S1);
  EXPECT_EQ(classify_phase(0.5, 1.0).label, PhaseLabel::N);
  const auto edge = classify_phase(1.0, 0.3);
  EXPECT_TRUE(edge.boundary);
  EXPECT_EQ(edge.label, PhaseLabel::N);
  const auto edge2 = classify_phase(2.0, 0.5);
  EXPECT_TRUE(edge2.boundary);
  EXPECT_EQ(edge2.label, PhaseLabel::S1);
  EXPECT_EQ(to_string(PhaseLabel::S2Prime), "S2'");
}

TEST(Volumes, PaperValues) {
  const PhaseSpaceVolumes v = phase_space_volumes(4.0, 0.5);
  EXPECT_NEAR(v.inner / kTwoPi, 0.210, 0.001);
  EXPECT_NEAR(v.outer / kTwoPi, 1.335, 0.001);
  EXPECT_NEAR(v.inner / kTwoPi, 0.2101157, 2e-7);
  EXPECT_NEAR(v.outer / kTwoPi, 1.3351157, 2e-7);
}

class VolumeOracleTest : public ::testing::TestWithParam<std::pair<double, double>> {};

TEST_P(VolumeOracleTest, QuadratureMatchesClosedForm) {
  const auto [lambda, delta] = GetParam();
  const PhaseSpaceVolumes v = phase_space_volumes(lambda, delta);
  const VolumeOracle o = volume_oracle(lambda, delta);
  EXPECT_NEAR(v.inner, o.inner, 1e-6 * o.inner);
  EXPECT_NEAR(v.outer, o.outer, 1e-6 * o.outer);
}

INSTANTIATE_TEST_SUITE_P(Points, VolumeOracleTest,
                         ::testing::Values(std::pair{4.0, 0.5}, std::pair{3.0, 0.6}, std::pair{5.0, 0.8},
                                           std::pair{6.0, -0.3}));

TEST(Volumes, RequiresS2Phase) {
  EXPECT_THROW(phase_space_volumes(1.5, 0.5), PhaseError);
}

TEST(EmergentPredictionTest, ScalesWithSystemSize) {
  const auto a = predict_emergent_counts(4.0, 0.5, 20.0);
  const auto b = predict_emergent_counts(4.0, 0.5, 40.0);
  EXPECT_NEAR(a.emergent, 4.2023, 1e-3);
  EXPECT_NEAR(b.emergent, 2.0 * a.emergent, 1e-12);
  EXPECT_NEAR(a.ratio, 0.2101157 / 1.3351157, 1e-6);
}

TEST(Dos, IntegratesToLevelCount) {
  Spectrum s;
  s.eigenvalues = Eigen::VectorXd::LinSpaced(40, -1.0, 1.0);
  const DosCurve c = smoothed_dos(s, 0.05, 4001);
  double integral = 0.0;
  for (std::size_t k = 1; k < c.energy.size(); ++k)
    integral += 0.5 * (c.density[k] + c.density[k - 1]) * (c.energy[k] - c.energy[k - 1]);
  EXPECT_NEAR(integral, 40.0, 1e-6);
  EXPECT_NEAR(mean_level_spacing(s, -1.0, 1.0), 2.0 / 39.0, 1e-14);
  EXPECT_TRUE(std::isnan(mean_level_spacing(s, 5.0, 6.0)));
  EXPECT_THROW(smoothed_dos(s, 0.0), DomainError);
  EXPECT_THROW(smoothed_dos(Spectrum{}, 0.1), DomainError);
}

TEST(PhaseMap, GridAndCsv) {
  const auto rows = phase_map({0.5, 1.5, 4.0}, {0.0, 0.5}, true, 2);
  ASSERT_EQ(rows.size(), 6u);
  std::size_t with_volume = 0;
  for (const auto& r : rows) with_volume += r.v_minus.has_value() ? 1 : 0;
  EXPECT_EQ(with_volume, 1u);  // only (4, 0.5) is in S2
  std::ostringstream os;
  write_phase_map_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "lambda,delta,phase,e_min,e_sad,v_minus,v_plus");
}
