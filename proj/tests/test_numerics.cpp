#include <doctest.h>

#include <cmath>
#include <vector>

#include "spatex/numerics.hpp"
#include "spatex/optimize.hpp"

using namespace spatex;

namespace {

// Independent oracle for K_nu(x): integral representation
// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, evaluated by composite
// Simpson quadrature on a truncated range.
double bessel_k_oracle(double nu, double x) {
  // exp(-x cosh t) decays doubly exponentially; t_max = acosh(large/x)
  double t_max = std::acosh((745.0 + 40.0) / x);
  int n = 20000;  // even
  double h = t_max / n;
  auto f = [&](double t) {
    double e = -x * std::cosh(t);
    if (e < -745.0) return 0.0;
    return std::exp(e) * std::cosh(nu * t);
  };
  double sum = f(0.0) + f(t_max);
  for (int i = 1; i < n; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// CDF of the standard normal by quadrature of the density (oracle).
double gauss_cdf_oracle(double x) {
  int n = 20000;
  double h = x / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) * 0.39894228040143267794; };
  double sum = pdf(0.0) + pdf(x);
  for (int i = 1; i < n; ++i) sum += pdf(i * h) * (i % 2 ? 4.0 : 2.0);
  return 0.5 + sum * h / 3.0;
}

}  // namespace

TEST_CASE("bessel_k half-integer closed form") {
  CHECK(bessel_k(0.5, 1.0) ==
        doctest::Approx(std::sqrt(M_PI / 2.0) * std::exp(-1.0)).epsilon(1e-12));
  CHECK(bessel_k(0.5, 2.0) ==
        doctest::Approx(std::sqrt(M_PI / 4.0) * std::exp(-2.0)).epsilon(1e-12));
  for (double x : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    double closed = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x);
    CHECK(bessel_k(0.5, x) == doctest::Approx(closed).epsilon(1e-12));
  }
}

TEST_CASE("bessel_k against quadrature oracle") {
  CHECK(bessel_k(1.0, 1.0) == doctest::Approx(bessel_k_oracle(1.0, 1.0)).epsilon(1e-9));
  for (double nu : {0.3, 0.75, 1.7, 5.0, 12.5}) {
    for (double x : {0.2, 1.0, 3.5, 20.0}) {
      CHECK(bessel_k(nu, x) == doctest::Approx(bessel_k_oracle(nu, x)).epsilon(1e-8));
    }
  }
}

TEST_CASE("bessel_k positivity and monotonicity in x") {
  for (double nu : {0.25, 0.5, 1.0, 1.5, 2.0}) {
    double prev = bessel_k(nu, 0.05);
    for (double x = 0.1; x < 50.0; x += 0.37) {
      double cur = bessel_k(nu, x);
      CHECK(cur > 0.0);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("bessel_k domain errors") {
  CHECK_THROWS_AS(bessel_k(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(bessel_k(1.0, 0.0), std::domain_error);
}

TEST_CASE("digamma known values and recurrence") {
  CHECK(digamma(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-12));
  CHECK(digamma(0.5) ==
        doctest::Approx(-0.57721566490153286 - 2.0 * std::log(2.0)).epsilon(1e-12));
  for (double x : {0.1, 0.7, 1.3, 5.0, 42.0}) {
    CHECK(digamma(x + 1.0) - digamma(x) == doctest::Approx(1.0 / x).epsilon(1e-12));
  }
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
}

TEST_CASE("gauss_cdf_pdf") {
  auto [cdf0, pdf0] = gauss_cdf_pdf(0.0);
  CHECK(cdf0 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(pdf0 == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  for (double x : {0.3, 1.0, 2.5, 4.0}) {
    CHECK(gauss_cdf(x) + gauss_cdf(-x) == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(gauss_cdf(1.959964) == doctest::Approx(gauss_cdf_oracle(1.959964)).epsilon(1e-9));
  CHECK(gauss_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
}

TEST_CASE("student_t cdf/pdf") {
  for (double nu : {0.5, 1.0, 2.0, 7.3}) {
    CHECK(student_t(0.0, nu).cdf == doctest::Approx(0.5).epsilon(1e-12));
  }
  CHECK(student_t(1.0, 1.0).cdf == doctest::Approx(0.75).epsilon(1e-12));
  // closed-form T_2 CDF: 1/2 + x / (2 sqrt(2 + x^2))
  double x = std::sqrt(2.0);
  CHECK(student_t(x, 2.0).cdf ==
        doctest::Approx(0.5 + x / (2.0 * std::sqrt(2.0 + x * x))).epsilon(1e-12));
  CHECK_THROWS_AS(student_t(0.0, -1.0), std::domain_error);
}

TEST_CASE("student_t pdf derivative identity") {
  for (double nu : {0.7, 2.0, 6.0}) {
    for (double x : {-2.0, -0.4, 0.9, 3.1}) {
      double h = 1e-6;
      double fd = (student_t(x + h, nu).pdf - student_t(x - h, nu).pdf) / (2 * h);
      CHECK(student_t(x, nu).d_pdf_dx == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("student_t pdf quadrature matches cdf increments") {
  for (double nu : {0.5, 1.0, 3.0, 10.0}) {
    for (auto [a, b] : std::vector<std::pair<double, double>>{
             {-1.0, 1.0}, {0.0, 2.5}, {-4.0, -0.5}, {1.0, 8.0}}) {
      int n = 20000;
      double h = (b - a) / n;
      double sum = student_t(a, nu).pdf + student_t(b, nu).pdf;
      for (int i = 1; i < n; ++i) sum += student_t(a + i * h, nu).pdf * (i % 2 ? 4.0 : 2.0);
      double mass = sum * h / 3.0;
      CHECK(mass == doctest::Approx(student_t(b, nu).cdf - student_t(a, nu).cdf)
                        .epsilon(1e-9));
    }
  }
}

TEST_CASE("student_t_quantile round trip") {
  CHECK(student_t_quantile(0.5, 3.3) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(student_t_quantile(0.75, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
  for (double nu : {0.5, 1.0, 5.0, 30.0}) {
    for (double p = 0.01; p < 0.995; p += 0.07) {
      double q = student_t_quantile(p, nu);
      CHECK(student_t(q, nu).cdf == doctest::Approx(p).epsilon(1e-8));
    }
  }
  CHECK(std::abs(student_t(student_t_quantile(0.9, 5.0), 5.0).cdf - 0.9) <= 1e-10);
  CHECK_THROWS_AS(student_t_quantile(0.0, 1.0), std::domain_error);
}

TEST_CASE("minimize_bounded quadratic") {
  Vector lo(2), hi(2), x0(2);
  lo << -5, -5;
  hi << 5, 5;
  x0 << 3, -2;
  auto obj = [](const Vector& x) {
    return (x[0] - 1) * (x[0] - 1) + (x[1] - 1) * (x[1] - 1);
  };
  auto res = minimize_bounded(obj, lo, hi, x0);
  CHECK(res.converged);
  CHECK(res.argmin[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.argmin[1] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.min == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("minimize_bounded active bound") {
  Vector lo(1), hi(1), x0(1);
  lo << 2;
  hi << 5;
  x0 << 4;
  auto obj = [](const Vector& x) { return x[0] * x[0]; };
  auto res = minimize_bounded(obj, lo, hi, x0);
  CHECK(res.argmin[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("minimize_bounded rosenbrock") {
  Vector lo(2), hi(2), x0(2);
  lo << -2, -2;
  hi << 2, 2;
  x0 << -1.2, 1.0;
  auto obj = [](const Vector& x) {
    double a = 1 - x[0], b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  MinimizeOptions opts;
  opts.tol = 1e-10;
  opts.max_evaluations = 100000;
  auto res = minimize_bounded(obj, lo, hi, x0, opts);
  CHECK(res.argmin[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.argmin[1] == doctest::Approx(1.0).epsilon(1e-4));
  // gradient path
  auto grad = [](const Vector& x) {
    Vector g(2);
    g[0] = -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] * x[0]);
    g[1] = 200 * (x[1] - x[0] * x[0]);
    return g;
  };
  auto res2 = minimize_bounded(obj, grad, lo, hi, x0, opts);
  CHECK(res2.argmin[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res2.argmin[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("minimize_bounded stays in bounds and survives non-finite objective") {
  Vector lo(2), hi(2), x0(2);
  lo << 0.5, 0.5;
  hi << 3, 3;
  x0 << 1, 1;
  auto obj = [](const Vector& x) {
    if (x[0] > 2.0) return std::numeric_limits<double>::quiet_NaN();
    return (x[0] - 2.5) * (x[0] - 2.5) + x[1];
  };
  auto res = minimize_bounded(obj, lo, hi, x0);
  CHECK(res.argmin[0] >= 0.5);
  CHECK(res.argmin[0] <= 3.0);
  CHECK(res.argmin[1] >= 0.5);
}

TEST_CASE("finite_difference_gradient") {
  auto sum = [](const Vector& x) { return x.sum(); };
  Vector x(3);
  x << 0.3, -1.0, 5.0;
  Vector g = finite_difference_gradient(sum, x, 1e-5);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(1.0).epsilon(1e-10));

  auto sq = [](const Vector& x) { return x[0] * x[0]; };
  Vector x1(1);
  x1 << 3.0;
  CHECK(finite_difference_gradient(sq, x1, 1e-5)[0] == doctest::Approx(6.0).epsilon(1e-6));

  auto bad = [](const Vector&) { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS(finite_difference_gradient(bad, x1, 1e-5));
}
