#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spatex/margins.hpp"
#include "spatex/simulate.hpp"

using namespace spatex;

namespace {

SiteSet two_sites(double dx, double dy) {
  SiteSet s;
  s.coords.resize(2, 2);
  s.coords << 0, 0, dx, dy;
  s.ids = {"a", "b"};
  return s;
}

SiteSet one_site() {
  SiteSet s;
  s.coords.resize(1, 2);
  s.coords << 0, 0;
  s.ids = {"a"};
  return s;
}

// two-sample KS statistic
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

// Kendall tau by merge-sort inversion counting (no ties expected)
long long count_inversions(std::vector<double>& v, std::size_t lo, std::size_t hi,
                           std::vector<double>& tmp) {
  if (hi - lo < 2) return 0;
  std::size_t mid = (lo + hi) / 2;
  long long inv = count_inversions(v, lo, mid, tmp) + count_inversions(v, mid, hi, tmp);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[i] <= v[j]) {
      tmp[k++] = v[i++];
    } else {
      inv += static_cast<long long>(mid - i);
      tmp[k++] = v[j++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return inv;
}

double kendall_tau_fast(const std::vector<std::pair<double, double>>& xy) {
  auto sorted = xy;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> second(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) second[i] = sorted[i].second;
  std::vector<double> tmp(second.size());
  long long inv = count_inversions(second, 0, second.size(), tmp);
  double n = static_cast<double>(xy.size());
  return 1.0 - 4.0 * static_cast<double>(inv) / (n * (n - 1.0));
}

// bivariate exponent measures from the closed-form CDFs (test-local oracle)
double v_br(double z1, double z2, double gamma_h) {
  double a = std::sqrt(2.0 * gamma_h);
  auto phi = [](double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); };
  return phi(a / 2 + std::log(z2 / z1) / a) / z1 +
         phi(a / 2 + std::log(z1 / z2) / a) / z2;
}

double v_extt(double z1, double z2, double rho, double nu) {
  double a = std::sqrt((nu + 1.0) / (1.0 - rho * rho));
  double q = std::pow(z2 / z1, 1.0 / nu);
  return student_t_cdf(a * (q - rho), nu + 1.0) / z1 +
         student_t_cdf(a * (1.0 / q - rho), nu + 1.0) / z2;
}

}  // namespace

TEST_CASE("single site margins are unit Frechet") {
  auto s = one_site();
  for (auto model : {ModelId::BrownResnick, ModelId::ExtT_PE, ModelId::TCop_WM}) {
    Rng rng(42 + static_cast<int>(model));
    ParamVector p;
    p.lambda = 2.0;
    p.kappa = 1.0;
    p.nu = 2.0;
    Eigen::VectorXd z(10000);
    for (int i = 0; i < z.size(); ++i) z[i] = simulate_field(model, p, s, rng)[0];
    auto ks = gumbel_ks(z);
    CHECK(ks.statistic < 1.628 / std::sqrt(10000.0));
  }
}

TEST_CASE("coincident sites are completely dependent") {
  auto s = two_sites(0.0, 0.0);
  ParamVector p;
  p.lambda = 1.5;
  p.kappa = 0.8;
  p.nu = 1.5;
  for (int i = 0; i < kNumModels; ++i) {
    auto model = static_cast<ModelId>(i);
    Rng rng(7 + i);
    for (int rep = 0; rep < 20; ++rep) {
      auto z = simulate_field(model, p, s, rng);
      CHECK(z[0] == z[1]);
      CHECK(z[0] > 0.0);
    }
  }
}

TEST_CASE("Brown-Resnick bivariate CDF matches the closed form") {
  auto s = two_sites(1.0, 0.5);
  ParamVector p;
  p.lambda = 2.0;
  p.kappa = 1.2;
  p.alpha = 0.6;
  p.ratio = 1.5;
  double h = aniso_distance(s.coords.row(0), s.coords.row(1), {p.alpha, p.ratio});
  double gamma_h = std::pow(h / p.lambda, p.kappa);

  Rng rng(1001);
  const int n = 100000;
  std::vector<Eigen::VectorXd> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(simulate_maxstable(ModelId::BrownResnick, p, s, rng));

  for (double z1 : {0.5, 1.0, 3.0}) {
    for (double z2 : {0.5, 1.0, 3.0}) {
      int count = 0;
      for (const auto& z : draws) {
        if (z[0] <= z1 && z[1] <= z2) ++count;
      }
      double emp = static_cast<double>(count) / n;
      double theo = std::exp(-v_br(z1, z2, gamma_h));
      CHECK(emp == doctest::Approx(theo).scale(1.0).epsilon(0.01));
    }
  }
}

TEST_CASE("extremal-t bivariate CDF matches the closed form") {
  auto s = two_sites(1.2, 0.0);
  ParamVector p;
  p.lambda = 1.5;
  p.kappa = 1.0;
  p.nu = 2.0;
  double rho = correlation(CorrelationFamily::PoweredExponential, 1.2, p.lambda, p.kappa);

  Rng rng(2002);
  const int n = 100000;
  std::vector<Eigen::VectorXd> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(simulate_maxstable(ModelId::ExtT_PE, p, s, rng));

  for (double z1 : {0.5, 1.0, 3.0}) {
    for (double z2 : {0.5, 1.0, 3.0}) {
      int count = 0;
      for (const auto& z : draws) {
        if (z[0] <= z1 && z[1] <= z2) ++count;
      }
      double emp = static_cast<double>(count) / n;
      double theo = std::exp(-v_extt(z1, z2, rho, p.nu));
      CHECK(emp == doctest::Approx(theo).scale(1.0).epsilon(0.01));
    }
  }
}

TEST_CASE("t copula dependence matches the elliptical identity") {
  auto s = two_sites(0.8, 0.6);
  ParamVector p;
  p.lambda = 2.0;
  p.kappa = 1.0;
  p.nu = 3.0;
  double rho = correlation(CorrelationFamily::WhittleMatern, 1.0, p.lambda, p.kappa);

  Rng rng(3003);
  const int n = 100000;
  std::vector<std::pair<double, double>> xy(n);
  for (int i = 0; i < n; ++i) {
    auto z = simulate_tcopula(ModelId::TCop_WM, p, s, rng);
    xy[i] = {z[0], z[1]};
  }
  double tau = kendall_tau_fast(xy);
  CHECK(tau == doctest::Approx(2.0 / M_PI * std::asin(rho)).scale(1.0).epsilon(0.01));
}

TEST_CASE("simulate_dataset shape, positivity, determinism") {
  SiteSet s;
  int H = 25;
  s.coords.resize(H, 2);
  Rng crng(5);
  for (int i = 0; i < H; ++i) {
    s.coords(i, 0) = crng.uniform(0.0, 10.0);
    s.coords(i, 1) = crng.uniform(0.0, 10.0);
    s.ids.push_back("s" + std::to_string(i));
  }
  ParamVector p;
  p.lambda = 3.0;
  p.kappa = 1.0;
  p.nu = 2.0;

  Rng r1(99), r2(99);
  auto a = simulate_dataset(ModelId::TCop_PE, p, s, 18, r1);
  auto b = simulate_dataset(ModelId::TCop_PE, p, s, 18, r2);
  CHECK(a.values.rows() == 18);
  CHECK(a.values.cols() == H);
  CHECK((a.values.array() > 0.0).all());
  CHECK(a.values == b.values);
  CHECK(a.scale_tag == ScaleTag::UnitFrechet);
  CHECK_THROWS_AS(simulate_dataset(ModelId::TCop_PE, p, s, 0, r1), std::invalid_argument);
}

TEST_CASE("max-stability: rescaled maxima of m fields match one field") {
  auto s = two_sites(1.0, 0.0);
  ParamVector p;
  p.lambda = 2.0;
  p.kappa = 1.0;
  p.nu = 1.5;
  const int n = 10000, m = 5;
  for (auto model : {ModelId::BrownResnick, ModelId::ExtT_PE}) {
    Rng rng(4004 + static_cast<int>(model));
    std::vector<double> single0, single1, maxed0, maxed1;
    for (int i = 0; i < n; ++i) {
      auto z = simulate_maxstable(model, p, s, rng);
      single0.push_back(z[0]);
      single1.push_back(z[1]);
      double m0 = 0.0, m1 = 0.0;
      for (int k = 0; k < m; ++k) {
        auto y = simulate_maxstable(model, p, s, rng);
        m0 = std::max(m0, y[0]);
        m1 = std::max(m1, y[1]);
      }
      maxed0.push_back(m0 / m);
      maxed1.push_back(m1 / m);
    }
    // 0.1% two-sample critical value: 1.949 * sqrt(2/n)
    double crit = 1.949 * std::sqrt(2.0 / n);
    CHECK(ks_two_sample(single0, maxed0) < crit);
    CHECK(ks_two_sample(single1, maxed1) < crit);
  }
}

TEST_CASE("average extremal-function draws is close to the site count") {
  SiteSet s;
  int H = 6;
  s.coords.resize(H, 2);
  Rng crng(11);
  for (int i = 0; i < H; ++i) {
    s.coords(i, 0) = crng.uniform(0.0, 4.0);
    s.coords(i, 1) = crng.uniform(0.0, 4.0);
    s.ids.push_back("s" + std::to_string(i));
  }
  ParamVector p;
  p.lambda = 2.0;
  p.kappa = 1.0;
  Rng rng(606);
  SimStats stats;
  const int runs = 1000;
  for (int i = 0; i < runs; ++i) simulate_maxstable(ModelId::BrownResnick, p, s, rng, &stats);
  double avg = static_cast<double>(stats.extremal_draws) / runs;
  CHECK(avg > 0.85 * H);
  CHECK(avg < 1.15 * H);
}

TEST_CASE("non-positive-definite covariance names a site pair") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // |rho| > 1
  try {
    detail::chol_with_jitter(bad, {3, 8});
    FAIL("expected factorization error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("3") != std::string::npos);
    CHECK(msg.find("8") != std::string::npos);
  }
}

TEST_CASE("model kind guards") {
  auto s = two_sites(1.0, 0.0);
  ParamVector p;
  Rng rng(1);
  CHECK_THROWS_AS(simulate_maxstable(ModelId::TCop_WM, p, s, rng), std::invalid_argument);
  CHECK_THROWS_AS(simulate_tcopula(ModelId::BrownResnick, p, s, rng), std::invalid_argument);
}
