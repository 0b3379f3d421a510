#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "deis/errors.hpp"
#include "deis/weights.hpp"
#include "test_support.hpp"

using namespace deis;

TEST(Lagrange, KroneckerAtNodesAndPartitionOfUnity) {
  const std::vector<double> nodes{0.9, 0.7, 0.4, 0.2};
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      EXPECT_NEAR(lagrange_basis(nodes, j, nodes[k]), j == k ? 1.0 : 0.0, 1e-15);
    }
  }
  for (double tau : {0.0, 0.33, 1.2}) {
    double sum = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) sum += lagrange_basis(nodes, j, tau);
    EXPECT_NEAR(sum, 1.0, 1e-13);
  }
}

TEST(Lagrange, RejectsRepeatedNodes) {
  const std::vector<double> nodes{0.5, 0.3, 0.5};
  EXPECT_THROW((void)lagrange_basis(nodes, 0, 0.1), DegenerateNodesError);
}

TEST(Weights, HistoryLengthWarmsUp) {
  EXPECT_EQ(history_length(10, 10, 3), 1);
  EXPECT_EQ(history_length(9, 10, 3), 2);
  EXPECT_EQ(history_length(7, 10, 3), 4);
  EXPECT_EQ(history_length(1, 10, 3), 4);
  EXPECT_EQ(history_length(1, 10, 0), 1);
}

TEST(Weights, OrderZeroOnVpIsTheDdimCoefficient) {
  const DiffusionSpec vp = vpsde();
  const TimeGrid grid = quadratic_grid(1e-3, 1.0, 10);
  const WeightTable table = tab_weights(vp, grid, 0);
  for (int i = 1; i <= 10; ++i) {
    const double a = check::vp_alpha(grid[i]);
    const double ap = check::vp_alpha(grid[i - 1]);
    EXPECT_NEAR(table.psi(i), std::sqrt(ap / a), 1e-13);
    ASSERT_EQ(table.c(i).size(), 1u);
    EXPECT_NEAR(table.c(i)[0], std::sqrt(1.0 - ap) - std::sqrt(ap / a) * std::sqrt(1.0 - a), 1e-12);
  }
}

TEST(Weights, CoefficientsMatchSimpsonOracle) {
  const DiffusionSpec vp = vpsde();
  const TimeGrid grid = uniform_grid(1e-3, 1.0, 6);
  const WeightTable table = tab_weights(vp, grid, 2);
  for (int i = 1; i <= 6; ++i) {
    const int len = history_length(i, 6, 2);
    std::vector<double> nodes;
    for (int j = 0; j < len; ++j) nodes.push_back(grid[i + j]);
    for (int j = 0; j < len; ++j) {
      const double ref = check::adaptive_simpson(
          [&](double tau) {
            return 0.5 * transition(vp, grid[i - 1], tau) * vp.g2(tau) / vp.L(tau) *
                   lagrange_basis(nodes, static_cast<std::size_t>(j), tau);
          },
          grid[i], grid[i - 1]);
      EXPECT_NEAR(table.c(i)[j], ref, 1e-10) << "i=" << i << " j=" << j;
    }
  }
}

TEST(Weights, JsonRoundTripIsBitExact) {
  const TimeGrid grid = quadratic_grid(1e-3, 1.0, 9);
  const WeightTable table = tab_weights(vpsde(), grid, 3);
  const WeightTable back = WeightTable::from_json(table.to_json());
  EXPECT_TRUE(back == table);
  EXPECT_TRUE(back.matches(grid));
  EXPECT_FALSE(back.matches(uniform_grid(1e-3, 1.0, 9)));
  EXPECT_THROW((void)WeightTable::from_json("{\"schema\":\"other\"}"), ConfigError);
  EXPECT_THROW((void)WeightTable::from_json("not json"), ConfigError);
}

TEST(Rho, RoundTripAndDerivative) {
  for (const DiffusionSpec& spec : {vpsde(), vesde(0.01, 50.0)}) {
    for (double t : {1e-3, 0.01, 0.3, 0.77, 1.0}) {
      EXPECT_NEAR(t_of_rho(spec, rho_of_t(spec, t)), t, 1e-11) << spec.name();
    }
    for (double t : {0.05, 0.4, 0.8}) {
      const double fd = check::central_difference([&](double s) { return rho_of_t(spec, s); }, t,
                                                    1e-6);
      EXPECT_NEAR(drho_dt(spec, t), fd, 1e-6 * fd) << spec.name();
    }
  }
  EXPECT_NEAR(rho_of_t(vesde(0.01, 50.0), 0.5), vesde(0.01, 50.0).sigma(0.5), 1e-14);
  EXPECT_THROW((void)t_of_rho(vpsde(), 1e6), DomainError);
  EXPECT_THROW((void)t_of_rho(vpsde(), -1.0), DomainError);
}

TEST(Rho, AdamsWeightsIntegratePolynomialsExactly) {
  const std::vector<double> rho{0.02, 0.1, 0.35, 0.9, 2.0, 5.0};
  for (int r = 0; r <= 3; ++r) {
    for (int i = 1; i <= 5; ++i) {
      const auto w = rho_ab_weights(rho, i, r);
      ASSERT_EQ(static_cast<int>(w.size()), history_length(i, 5, r));
      const int deg = static_cast<int>(w.size()) - 1;
      // integral of p(rho) = rho^deg from rho_i to rho_{i-1}
      const double exact = (std::pow(rho[i - 1], deg + 1) - std::pow(rho[i], deg + 1)) / (deg + 1);
      double approx = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) approx += w[j] * std::pow(rho[i + j], deg);
      EXPECT_NEAR(approx, exact, 1e-12 * (1.0 + std::fabs(exact))) << "r=" << r << " i=" << i;
    }
  }
  EXPECT_THROW((void)rho_ab_weights(std::vector<double>{0.1, 0.1}, 1, 0), DegenerateNodesError);
}

TEST(Rho, UnsupportedForCustomDiffusions) {
  const DiffusionSpec vp = vpsde();
  const DiffusionSpec custom = DiffusionSpec::custom(
      [vp](double t) { return vp.f(t); }, [vp](double t) { return vp.g2(t); },
      [vp](double t) { return vp.mu(t); }, [vp](double t) { return vp.L(t); }, 1.0);
  EXPECT_FALSE(supports_rho(custom));
  EXPECT_THROW((void)rho_of_t(custom, 0.5), ContractError);
}

TEST(Rho, OrderZeroWeightIsTheStep) {
  const std::vector<double> rho{0.1, 0.4, 1.5};
  const auto w = rho_ab_weights(rho, 2, 0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_DOUBLE_EQ(w[0], 0.4 - 1.5);
}
