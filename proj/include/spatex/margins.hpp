#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatex/optimize.hpp"
#include "spatex/rng.hpp"

namespace spatex {

struct GevParams {
  double mu = 0.0;     // location
  double sigma = 1.0;  // scale > 0
  double xi = 0.0;     // shape
};

enum class ScaleTag { RawGEV, UnitFrechet };

struct DataMatrix {
  Eigen::MatrixXd values;  // n replicates x H sites
  ScaleTag scale_tag = ScaleTag::RawGEV;
  std::vector<std::string> site_ids;

  std::size_t n_reps() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_sites() const { return static_cast<std::size_t>(values.cols()); }

  void validate() const {
    if (values.rows() < 1) throw std::invalid_argument("DataMatrix: need n >= 1");
    if (site_ids.size() != n_sites()) {
      throw std::invalid_argument("DataMatrix: site_ids/columns mismatch");
    }
    if (!values.allFinite()) throw std::invalid_argument("DataMatrix: non-finite value");
    if (scale_tag == ScaleTag::UnitFrechet && (values.array() <= 0.0).any()) {
      throw std::invalid_argument("DataMatrix: unit-Frechet values must be positive");
    }
  }
};

inline constexpr double kGumbelXiThreshold = 1e-6;

// GEV log-likelihood; -inf outside the support.  |xi| below the switch
// threshold uses the Gumbel limit so the surface is continuous through 0.
inline double gev_loglik(const Eigen::VectorXd& z, const GevParams& p) {
  if (!(p.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(z.size());
  double ll = -n * std::log(p.sigma);
  if (std::abs(p.xi) < kGumbelXiThreshold) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      double u = (z[i] - p.mu) / p.sigma;
      ll -= u + std::exp(-u);
    }
    return ll;
  }
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    double t = 1.0 + p.xi * (z[i] - p.mu) / p.sigma;
    if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
    double logt = std::log(t);
    ll -= (1.0 + 1.0 / p.xi) * logt + std::exp(-logt / p.xi);
  }
  return ll;
}

// GEV quantile function (inverse CDF), p in (0,1).
inline double gev_quantile(double prob, const GevParams& p) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::domain_error("gev_quantile: prob must be in (0,1)");
  }
  double w = -std::log(prob);  // unit-Frechet value is 1/w
  if (std::abs(p.xi) < kGumbelXiThreshold) return p.mu - p.sigma * std::log(w);
  return p.mu + p.sigma * (std::pow(w, -p.xi) - 1.0) / p.xi;
}

struct GevFitError : std::runtime_error {
  GevParams best;
  double best_loglik;
  GevFitError(const std::string& msg, const GevParams& b, double ll)
      : std::runtime_error(msg), best(b), best_loglik(ll) {}
};

struct GevFitOptions {
  double xi_lo = -0.5, xi_hi = 1.0;
  int restarts = 4;  // jittered restarts after the moments-based start
  std::size_t min_obs = 5;
  std::uint64_t jitter_seed = 0x6d617267696e73ULL;
};

// Maximum-likelihood GEV fit of one column.  Optimizes over
// (mu, log sigma, xi) with a moments-based start and jittered restarts;
// throws GevFitError (carrying the best attempt) if nothing converges.
inline GevParams gev_fit_mle(const Eigen::VectorXd& z,
                             const GevFitOptions& opts = {}) {
  if (static_cast<std::size_t>(z.size()) < opts.min_obs) {
    throw std::invalid_argument("gev_fit_mle: need at least " +
                                std::to_string(opts.min_obs) + " observations");
  }
  double mean = z.mean();
  double sd = std::sqrt((z.array() - mean).square().sum() /
                        static_cast<double>(z.size() - 1));
  if (!(sd > 0.0)) {
    throw std::invalid_argument("gev_fit_mle: constant column, scale degenerates");
  }

  // Gumbel moment estimates seed the search
  double sigma0 = sd * std::sqrt(6.0) / M_PI;
  double mu0 = mean - 0.57721566490153286 * sigma0;

  auto objective = [&](const Vector& x) {
    GevParams p{x[0], std::exp(x[1]), x[2]};
    double ll = gev_loglik(z, p);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  double span = z.maxCoeff() - z.minCoeff();
  Vector lo(3), hi(3);
  lo << z.minCoeff() - 2.0 * span, std::log(sigma0) - 8.0, opts.xi_lo;
  hi << z.maxCoeff() + 2.0 * span, std::log(sigma0) + 8.0, opts.xi_hi;

  GevParams best;
  double best_ll = -std::numeric_limits<double>::infinity();
  bool any_converged = false;
  Rng rng(opts.jitter_seed);

  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    Vector x0(3);
    if (attempt == 0) {
      x0 << mu0, std::log(sigma0), 0.1;
    } else {
      x0 << mu0 + sigma0 * rng.normal(), std::log(sigma0) + 0.5 * rng.normal(),
          rng.uniform(opts.xi_lo, opts.xi_hi);
    }
    for (int c = 0; c < 3; ++c) x0[c] = std::clamp(x0[c], lo[c], hi[c]);
    auto res = minimize_bounded(objective, lo, hi, x0);
    if (!std::isfinite(res.min)) continue;
    if (-res.min > best_ll) {
      best_ll = -res.min;
      best = GevParams{res.argmin[0], std::exp(res.argmin[1]), res.argmin[2]};
      any_converged = res.converged;
    } else if (res.converged && -res.min > best_ll - 1e-8) {
      any_converged = true;
    }
  }

  if (!std::isfinite(best_ll)) {
    throw GevFitError("gev_fit_mle: no attempt reached the support", best, best_ll);
  }
  if (!any_converged) {
    throw GevFitError("gev_fit_mle: optimizer failed to converge", best, best_ll);
  }
  return best;
}

// z = (1 + xi (z*-mu)/sigma)^{1/xi}; Gumbel branch z = exp((z*-mu)/sigma).
inline double to_unit_frechet_value(double raw, const GevParams& p) {
  double u = (raw - p.mu) / p.sigma;
  if (std::abs(p.xi) < kGumbelXiThreshold) return std::exp(u);
  double t = 1.0 + p.xi * u;
  if (!(t > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::pow(t, 1.0 / p.xi);
}

inline double from_unit_frechet_value(double z, const GevParams& p) {
  if (!(z > 0.0)) throw std::domain_error("from_unit_frechet_value: z must be > 0");
  if (std::abs(p.xi) < kGumbelXiThreshold) return p.mu + p.sigma * std::log(z);
  return p.mu + p.sigma * (std::pow(z, p.xi) - 1.0) / p.xi;
}

inline DataMatrix to_unit_frechet(const DataMatrix& data,
                                  const std::vector<GevParams>& fits) {
  data.validate();
  if (data.scale_tag != ScaleTag::RawGEV) {
    throw std::invalid_argument("to_unit_frechet: input must be raw scale");
  }
  if (fits.size() != data.n_sites()) {
    throw std::invalid_argument("to_unit_frechet: one fit per site required");
  }
  DataMatrix out;
  out.values.resize(data.values.rows(), data.values.cols());
  out.scale_tag = ScaleTag::UnitFrechet;
  out.site_ids = data.site_ids;
  for (Eigen::Index s = 0; s < data.values.cols(); ++s) {
    for (Eigen::Index r = 0; r < data.values.rows(); ++r) {
      double z = to_unit_frechet_value(data.values(r, s), fits[s]);
      if (!std::isfinite(z) || z <= 0.0) {
        throw std::invalid_argument(
            "to_unit_frechet: value outside GEV support at site '" +
            data.site_ids[s] + "', replicate " + std::to_string(r));
      }
      out.values(r, s) = z;
    }
  }
  return out;
}

namespace detail {

// asymptotic two-sided Kolmogorov tail: P(sqrt(n) D > t)
inline double kolmogorov_tail(double t) {
  if (t < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace detail

struct KsResult {
  double statistic;
  double p_value;
};

// Two-sided one-sample KS test of a unit-Frechet column: log-transform to
// Gumbel and compare the ECDF to exp(-exp(-x)); p from the asymptotic series.
inline KsResult gumbel_ks(const Eigen::VectorXd& column) {
  if (column.size() < 1) throw std::invalid_argument("gumbel_ks: empty column");
  if ((column.array() <= 0.0).any()) {
    throw std::invalid_argument("gumbel_ks: values must be positive");
  }
  std::vector<double> x(column.data(), column.data() + column.size());
  for (auto& v : x) v = std::log(v);
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f = std::exp(-std::exp(-x[i]));
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  // Stephens' finite-sample argument keeps the asymptotic tail calibrated
  // at the short record lengths typical for block maxima.
  double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  return {d, detail::kolmogorov_tail(t)};
}

}  // namespace spatex
