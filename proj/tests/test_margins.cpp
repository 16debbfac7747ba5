#include <doctest.h>

#include <cmath>
#include <vector>

#include "spatex/margins.hpp"

using namespace spatex;

namespace {

Eigen::VectorXd sample_gev(int n, const GevParams& p, Rng& rng) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = gev_quantile(rng.uniform(), p);
  return z;
}

Eigen::VectorXd sample_unit_frechet(int n, Rng& rng) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = -1.0 / std::log(rng.uniform());
  return z;
}

}  // namespace

TEST_CASE("gev_fit_mle recovers Gumbel(10, 2)") {
  Rng rng(314);
  auto z = sample_gev(10000, {10.0, 2.0, 0.0}, rng);
  auto fit = gev_fit_mle(z);
  CHECK(fit.mu == doctest::Approx(10.0).scale(1.0).epsilon(0.1));
  CHECK(fit.sigma == doctest::Approx(2.0).scale(1.0).epsilon(0.1));
  CHECK(fit.xi == doctest::Approx(0.0).scale(1.0).epsilon(0.05));
}

TEST_CASE("gev_fit_mle recovers a heavy-tailed fit") {
  Rng rng(99);
  GevParams truth{3.0, 1.5, 0.25};
  auto z = sample_gev(10000, truth, rng);
  auto fit = gev_fit_mle(z);
  CHECK(fit.mu == doctest::Approx(truth.mu).scale(1.0).epsilon(0.1));
  CHECK(fit.sigma == doctest::Approx(truth.sigma).scale(1.0).epsilon(0.1));
  CHECK(fit.xi == doctest::Approx(truth.xi).scale(1.0).epsilon(0.06));
  // MLE attains at least the likelihood of the generator
  CHECK(gev_loglik(z, fit) >= gev_loglik(z, truth) - 1e-6);
}

TEST_CASE("gev_fit_mle degenerate and short inputs") {
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(50, 7.0);
  CHECK_THROWS_AS(gev_fit_mle(flat), std::invalid_argument);
  Eigen::VectorXd tiny(3);
  tiny << 1, 2, 3;
  CHECK_THROWS_AS(gev_fit_mle(tiny), std::invalid_argument);
}

TEST_CASE("gev_loglik support and continuity through xi = 0") {
  Eigen::VectorXd z(4);
  z << -1.0, 0.5, 2.0, 3.5;
  GevParams out_of_support{0.0, 1.0, -0.5};  // needs z < mu + sigma/|xi| = 2
  CHECK(gev_loglik(z, out_of_support) == -std::numeric_limits<double>::infinity());
  GevParams a{0.3, 1.2, 1e-7}, b{0.3, 1.2, -1e-7}, c{0.3, 1.2, 0.0};
  CHECK(gev_loglik(z, a) == doctest::Approx(gev_loglik(z, c)).epsilon(1e-9));
  CHECK(gev_loglik(z, b) == doctest::Approx(gev_loglik(z, c)).epsilon(1e-9));
}

TEST_CASE("gev_quantile round trips through the CDF") {
  GevParams p{2.0, 1.5, 0.3};
  for (double prob : {0.05, 0.3, 0.5, 0.9, 0.99}) {
    double q = gev_quantile(prob, p);
    double t = std::pow(1.0 + p.xi * (q - p.mu) / p.sigma, -1.0 / p.xi);
    CHECK(std::exp(-t) == doctest::Approx(prob).epsilon(1e-12));
  }
  CHECK(gev_quantile(std::exp(-1.0), {0.0, 1.0, 0.0}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("to_unit_frechet pointwise examples") {
  CHECK(to_unit_frechet_value(1.0, {0.0, 1.0, 1.0}) == doctest::Approx(2.0));
  CHECK(to_unit_frechet_value(0.0, {0.0, 1.0, 0.0}) == doctest::Approx(1.0));
  // Gumbel branch is the continuous limit in xi
  for (double raw : {-1.0, 0.2, 3.0}) {
    double at0 = to_unit_frechet_value(raw, {0.5, 2.0, 0.0});
    for (double xi : {1e-7, -1e-7}) {
      CHECK(std::abs(to_unit_frechet_value(raw, {0.5, 2.0, xi}) - at0) / at0 < 1e-5);
    }
  }
}

TEST_CASE("to_unit_frechet matrix path, ranks, and round trip") {
  Rng rng(55);
  DataMatrix raw;
  raw.values.resize(200, 2);
  std::vector<GevParams> fits = {{1.0, 2.0, 0.2}, {0.0, 1.0, -0.1}};
  for (int s = 0; s < 2; ++s) {
    auto col = sample_gev(200, fits[s], rng);
    raw.values.col(s) = col;
  }
  raw.site_ids = {"a", "b"};
  auto z = to_unit_frechet(raw, fits);
  CHECK(z.scale_tag == ScaleTag::UnitFrechet);
  CHECK((z.values.array() > 0.0).all());

  // strictly monotone per column: ranks preserved
  for (int s = 0; s < 2; ++s) {
    for (int i = 1; i < 200; ++i) {
      bool raw_less = raw.values(i - 1, s) < raw.values(i, s);
      bool z_less = z.values(i - 1, s) < z.values(i, s);
      CHECK(raw_less == z_less);
    }
  }
  // round trip
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < 200; ++i) {
      double back = from_unit_frechet_value(z.values(i, s), fits[s]);
      CHECK(back == doctest::Approx(raw.values(i, s)).epsilon(1e-9));
    }
  }
}

TEST_CASE("to_unit_frechet support violation names site and replicate") {
  DataMatrix raw;
  raw.values.resize(2, 1);
  raw.values << 0.0, -10.0;  // second value below the xi>0 lower endpoint
  raw.site_ids = {"stn7"};
  std::vector<GevParams> fits = {{0.0, 1.0, 0.5}};
  try {
    to_unit_frechet(raw, fits);
    FAIL("expected support violation");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("stn7") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("transformed GEV sample passes KS at the 1% level") {
  Rng rng(2024);
  GevParams truth{5.0, 2.0, 0.15};
  auto raw = sample_gev(10000, truth, rng);
  Eigen::VectorXd z(raw.size());
  for (int i = 0; i < raw.size(); ++i) z[i] = to_unit_frechet_value(raw[i], truth);
  auto ks = gumbel_ks(z);
  CHECK(ks.statistic < 1.628 / std::sqrt(10000.0));  // 1% critical value
  CHECK(ks.p_value > 0.01);
}

TEST_CASE("gumbel_ks closed-form cases") {
  Eigen::VectorXd one(1);
  one << std::exp(-std::log(std::log(2.0)));  // log z at the Gumbel median
  CHECK(gumbel_ks(one).statistic == doctest::Approx(0.5).epsilon(1e-12));

  int n = 20;
  Eigen::VectorXd q(n);
  for (int i = 0; i < n; ++i) {
    double p = (i + 0.5) / n;
    q[i] = -1.0 / std::log(p);  // unit-Frechet quantile at p
  }
  CHECK(gumbel_ks(q).statistic == doctest::Approx(0.5 / n).epsilon(1e-10));

  Eigen::VectorXd bad(2);
  bad << 1.0, -1.0;
  CHECK_THROWS_AS(gumbel_ks(bad), std::invalid_argument);
}

TEST_CASE("gumbel_ks calibration at the 5% level") {
  Rng rng(777);
  int runs = 1000, rejections = 0;
  for (int r = 0; r < runs; ++r) {
    auto z = sample_unit_frechet(18, rng);
    if (gumbel_ks(z).p_value < 0.05) ++rejections;
  }
  double rate = static_cast<double>(rejections) / runs;
  CHECK(rate >= 0.03);
  CHECK(rate <= 0.07);
}
