#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace spatex {

struct RealFunctionTolerances {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double fd_step = 1e-6;
};

// Modified Bessel function of the second kind, real order.
inline double bessel_k(double order, double x) {
  if (!(order >= 0.0) || !(x > 0.0)) {
    throw std::domain_error("bessel_k: order must be >= 0 and x positive");
  }
  if (x > 705.0) {
    // exp(-x) underflows the smallest normal double around here
    return 0.0;
  }
  return boost::math::cyl_bessel_k(order, x);
}

inline double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: x must be positive");
  return boost::math::digamma(x);
}

// Standard normal CDF and PDF.
inline std::pair<double, double> gauss_cdf_pdf(double x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  double cdf = 0.5 * std::erfc(-x * inv_sqrt2);
  double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
  return {cdf, pdf};
}

inline double gauss_cdf(double x) { return gauss_cdf_pdf(x).first; }
inline double gauss_pdf(double x) { return gauss_cdf_pdf(x).second; }

struct StudentT {
  double cdf;
  double pdf;
  double d_pdf_dx;
};

// Univariate central Student-t: CDF, PDF, and the PDF's derivative in x.
inline StudentT student_t(double x, double dof) {
  if (!(dof > 0.0)) throw std::domain_error("student_t: dof must be positive");
  boost::math::students_t_distribution<double> dist(dof);
  double cdf = boost::math::cdf(dist, x);
  double log_pdf = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                   0.5 * std::log(dof * M_PI) -
                   0.5 * (dof + 1.0) * std::log1p(x * x / dof);
  double pdf = std::exp(log_pdf);
  double d_pdf_dx = -x * (dof + 1.0) / (x * x + dof) * pdf;
  return {cdf, pdf, d_pdf_dx};
}

inline double student_t_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw std::domain_error("student_t: dof must be positive");
  return boost::math::cdf(boost::math::students_t_distribution<double>(dof), x);
}

inline double student_t_pdf(double x, double dof) {
  return student_t(x, dof).pdf;
}

inline double student_t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("student_t_quantile: p must be in (0,1)");
  }
  if (!(dof > 0.0)) {
    throw std::domain_error("student_t_quantile: dof must be positive");
  }
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

}  // namespace spatex
