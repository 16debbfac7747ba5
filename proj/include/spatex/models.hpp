#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatex/numerics.hpp"
#include "spatex/rng.hpp"

namespace spatex {

// The five dependence models, stable integer codes 0..4.
enum class ModelId : int {
  ExtT_WM = 0,
  ExtT_PE = 1,
  BrownResnick = 2,
  TCop_WM = 3,
  TCop_PE = 4,
};

inline constexpr int kNumModels = 5;

enum class CorrelationFamily { WhittleMatern, PoweredExponential };

inline bool has_dof(ModelId m) { return m != ModelId::BrownResnick; }

inline bool is_max_stable(ModelId m) {
  return m == ModelId::ExtT_WM || m == ModelId::ExtT_PE || m == ModelId::BrownResnick;
}

inline bool is_t_copula(ModelId m) {
  return m == ModelId::TCop_WM || m == ModelId::TCop_PE;
}

// Correlation family for extremal-t and t-copula models; Brown-Resnick has
// none (it is driven by the power variogram).
inline CorrelationFamily correlation_family(ModelId m) {
  switch (m) {
    case ModelId::ExtT_WM:
    case ModelId::TCop_WM:
      return CorrelationFamily::WhittleMatern;
    case ModelId::ExtT_PE:
    case ModelId::TCop_PE:
      return CorrelationFamily::PoweredExponential;
    default:
      throw std::invalid_argument("correlation_family: Brown-Resnick has none");
  }
}

inline std::string model_name(ModelId m) {
  switch (m) {
    case ModelId::ExtT_WM: return "extt_wm";
    case ModelId::ExtT_PE: return "extt_pe";
    case ModelId::BrownResnick: return "br";
    case ModelId::TCop_WM: return "tcop_wm";
    case ModelId::TCop_PE: return "tcop_pe";
  }
  throw std::invalid_argument("model_name: bad model id");
}

inline ModelId model_from_name(const std::string& name) {
  for (int i = 0; i < kNumModels; ++i) {
    if (model_name(static_cast<ModelId>(i)) == name) return static_cast<ModelId>(i);
  }
  throw std::invalid_argument("unknown model name '" + name + "'");
}

// Parameter order is fixed as (lambda, kappa, alpha, ratio[, nu]) everywhere.
struct ParamVector {
  double lambda = 1.0;  // range > 0
  double kappa = 1.0;   // smoothness in (0, 2]
  double alpha = 0.0;   // rotation in [0, pi/2)
  double ratio = 1.0;   // axes ratio > 0
  double nu = 1.0;      // dof > 0; ignored for Brown-Resnick

  static std::size_t dim(ModelId m) { return has_dof(m) ? 5 : 4; }

  Eigen::VectorXd to_vector(ModelId m) const {
    Eigen::VectorXd v(dim(m));
    v[0] = lambda;
    v[1] = kappa;
    v[2] = alpha;
    v[3] = ratio;
    if (has_dof(m)) v[4] = nu;
    return v;
  }

  static ParamVector from_vector(ModelId m, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != dim(m)) {
      throw std::invalid_argument("ParamVector: wrong length");
    }
    ParamVector p;
    p.lambda = v[0];
    p.kappa = v[1];
    p.alpha = v[2];
    p.ratio = v[3];
    if (has_dof(m)) p.nu = v[4];
    return p;
  }

  // Transformed coordinates (log lambda, kappa, alpha, log r[, log nu]) used
  // for regression responses and MCMC proposals.
  Eigen::VectorXd to_transformed(ModelId m) const {
    Eigen::VectorXd v(dim(m));
    v[0] = std::log(lambda);
    v[1] = kappa;
    v[2] = alpha;
    v[3] = std::log(ratio);
    if (has_dof(m)) v[4] = std::log(nu);
    return v;
  }

  static ParamVector from_transformed(ModelId m, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != dim(m)) {
      throw std::invalid_argument("ParamVector: wrong length");
    }
    ParamVector p;
    p.lambda = std::exp(v[0]);
    p.kappa = v[1];
    p.alpha = v[2];
    p.ratio = std::exp(v[3]);
    if (has_dof(m)) p.nu = std::exp(v[4]);
    return p;
  }
};

inline std::vector<std::string> param_names(ModelId m) {
  std::vector<std::string> names = {"lambda", "kappa", "alpha", "ratio"};
  if (has_dof(m)) names.push_back("nu");
  return names;
}

// Independent priors: log-normal on lambda, r, nu (nu truncated in log space),
// uniform on kappa and alpha.  The "N(mean, s)" notation is read with s as a
// VARIANCE by default; set normal_second_arg_is_variance=false for SD.
struct PriorSpec {
  double log_lambda_mean = 1.0;
  double log_lambda_scale2 = 4.0;
  double kappa_lo = 0.0, kappa_hi = 2.0;
  double alpha_lo = 0.0, alpha_hi = M_PI / 2.0;
  double log_ratio_mean = 0.0;
  double log_ratio_scale2 = 8.0;
  double log_nu_mean = 0.0;
  double log_nu_scale2 = 1.0;
  double log_nu_trunc_lo = -2.5, log_nu_trunc_hi = 2.5;
  bool normal_second_arg_is_variance = true;
  std::vector<double> model_probs = std::vector<double>(kNumModels, 1.0 / kNumModels);

  double sd(double scale2) const {
    return normal_second_arg_is_variance ? std::sqrt(scale2) : scale2;
  }
  double log_lambda_sd() const { return sd(log_lambda_scale2); }
  double log_ratio_sd() const { return sd(log_ratio_scale2); }
  double log_nu_sd() const { return sd(log_nu_scale2); }
};

namespace detail {

inline double normal_logpdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.91893853320467274178;  // log sqrt(2 pi)
}

}  // namespace detail

inline ParamVector prior_sample(ModelId model, const PriorSpec& prior, Rng& rng) {
  ParamVector p;
  p.lambda = std::exp(prior.log_lambda_mean + prior.log_lambda_sd() * rng.normal());
  p.kappa = rng.uniform(prior.kappa_lo, prior.kappa_hi);
  p.alpha = rng.uniform(prior.alpha_lo, prior.alpha_hi);
  p.ratio = std::exp(prior.log_ratio_mean + prior.log_ratio_sd() * rng.normal());
  if (has_dof(model)) {
    double lnu;
    do {
      lnu = prior.log_nu_mean + prior.log_nu_sd() * rng.normal();
    } while (lnu < prior.log_nu_trunc_lo || lnu > prior.log_nu_trunc_hi);
    p.nu = std::exp(lnu);
  }
  return p;
}

// Log prior density in natural parameter space (includes the 1/value
// change-of-variables for the log-normal components).  -inf outside support.
inline double prior_logpdf(ModelId model, const ParamVector& p, const PriorSpec& prior) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  if (!(p.lambda > 0.0) || !(p.ratio > 0.0)) return neg_inf;
  if (p.kappa <= prior.kappa_lo || p.kappa >= prior.kappa_hi) return neg_inf;
  if (p.alpha < prior.alpha_lo || p.alpha >= prior.alpha_hi) return neg_inf;
  double lp = 0.0;
  lp += detail::normal_logpdf(std::log(p.lambda), prior.log_lambda_mean,
                              prior.log_lambda_sd()) - std::log(p.lambda);
  lp -= std::log(prior.kappa_hi - prior.kappa_lo);
  lp -= std::log(prior.alpha_hi - prior.alpha_lo);
  lp += detail::normal_logpdf(std::log(p.ratio), prior.log_ratio_mean,
                              prior.log_ratio_sd()) - std::log(p.ratio);
  if (has_dof(model)) {
    if (!(p.nu > 0.0)) return neg_inf;
    double lnu = std::log(p.nu);
    if (lnu < prior.log_nu_trunc_lo || lnu > prior.log_nu_trunc_hi) return neg_inf;
    double sd = prior.log_nu_sd();
    double mass = gauss_cdf((prior.log_nu_trunc_hi - prior.log_nu_mean) / sd) -
                  gauss_cdf((prior.log_nu_trunc_lo - prior.log_nu_mean) / sd);
    lp += detail::normal_logpdf(lnu, prior.log_nu_mean, sd) - std::log(mass) - lnu;
  }
  return lp;
}

// Log prior density in the transformed coordinates (log lambda, kappa, alpha,
// log r[, log nu]); used by the SMC sampler where proposals live in the same
// space so Jacobians cancel.
inline double prior_logpdf_transformed(ModelId model, const Eigen::VectorXd& psi,
                                       const PriorSpec& prior) {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  if (static_cast<std::size_t>(psi.size()) != ParamVector::dim(model)) {
    throw std::invalid_argument("prior_logpdf_transformed: wrong length");
  }
  if (psi[1] <= prior.kappa_lo || psi[1] >= prior.kappa_hi) return neg_inf;
  if (psi[2] < prior.alpha_lo || psi[2] >= prior.alpha_hi) return neg_inf;
  double lp = 0.0;
  lp += detail::normal_logpdf(psi[0], prior.log_lambda_mean, prior.log_lambda_sd());
  lp -= std::log(prior.kappa_hi - prior.kappa_lo);
  lp -= std::log(prior.alpha_hi - prior.alpha_lo);
  lp += detail::normal_logpdf(psi[3], prior.log_ratio_mean, prior.log_ratio_sd());
  if (has_dof(model)) {
    if (psi[4] < prior.log_nu_trunc_lo || psi[4] > prior.log_nu_trunc_hi) return neg_inf;
    double sd = prior.log_nu_sd();
    double mass = gauss_cdf((prior.log_nu_trunc_hi - prior.log_nu_mean) / sd) -
                  gauss_cdf((prior.log_nu_trunc_lo - prior.log_nu_mean) / sd);
    lp += detail::normal_logpdf(psi[4], prior.log_nu_mean, sd) - std::log(mass);
  }
  return lp;
}

// rho(h) for the two correlation families; rho(0) = 1 by continuous extension.
inline double correlation(CorrelationFamily family, double h, double lambda,
                          double kappa) {
  if (!(h >= 0.0)) throw std::domain_error("correlation: h must be >= 0");
  if (!(lambda > 0.0)) throw std::domain_error("correlation: lambda must be > 0");
  if (family == CorrelationFamily::WhittleMatern) {
    if (!(kappa > 0.0)) throw std::domain_error("correlation: WM needs kappa > 0");
    if (h == 0.0) return 1.0;
    double u = h / lambda;
    double log_pref = (1.0 - kappa) * std::log(2.0) - std::lgamma(kappa) +
                      kappa * std::log(u);
    double k = bessel_k(kappa, u);
    if (k <= 0.0) return 0.0;
    return std::exp(log_pref + std::log(k));
  }
  if (!(kappa > 0.0 && kappa <= 2.0)) {
    throw std::domain_error("correlation: PE needs kappa in (0,2]");
  }
  if (h == 0.0) return 1.0;
  return std::exp(-std::pow(h / lambda, kappa));
}

// Power variogram gamma(h) = (h/lambda)^kappa of the Brown-Resnick model.
inline double variogram_br(double h, double lambda, double kappa) {
  if (!(h >= 0.0)) throw std::domain_error("variogram_br: h must be >= 0");
  if (!(lambda > 0.0)) throw std::domain_error("variogram_br: lambda must be > 0");
  if (!(kappa > 0.0 && kappa <= 2.0)) {
    throw std::domain_error("variogram_br: kappa must be in (0,2]");
  }
  if (h == 0.0) return 0.0;
  return std::pow(h / lambda, kappa);
}

struct ExtremalCoefResult {
  double value = 1.0;
  bool mc_warning = false;  // t-copula Monte Carlo sample considered too small
};

// Theoretical pairwise extremal coefficient at transformed distance h (the
// caller applies anisotropy and divides by lambda, so lambda=1 here).
// Brown-Resnick and extremal-t have closed forms; the t-copula value is a
// Monte Carlo estimate from mc_size bivariate copula draws.
inline ExtremalCoefResult theoretical_extremal_coef(ModelId model,
                                                    const ParamVector& params,
                                                    double h,
                                                    std::size_t mc_size = 500000,
                                                    std::uint64_t mc_seed = 1) {
  if (!(h >= 0.0)) throw std::domain_error("theoretical_extremal_coef: h < 0");
  ExtremalCoefResult res;
  if (model == ModelId::BrownResnick) {
    double a = std::sqrt(2.0 * std::pow(h, params.kappa));
    res.value = 2.0 * gauss_cdf(a / 2.0);
    return res;
  }
  double rho = correlation(correlation_family(model), h, 1.0, params.kappa);
  if (is_max_stable(model)) {
    double arg = std::sqrt((params.nu + 1.0) * (1.0 - rho) / (1.0 + rho));
    res.value = 2.0 * student_t_cdf(arg, params.nu + 1.0);
    return res;
  }
  // t copula: simulate bivariate pairs and apply the rate-parameter estimator
  if (mc_size < 10000) res.mc_warning = true;
  Rng rng(mc_seed);
  double nu = params.nu;
  double sum_inv_max = 0.0;
  double b = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (std::size_t i = 0; i < mc_size; ++i) {
    double w1 = rng.normal();
    double w2 = rho * w1 + b * rng.normal();
    double s = rng.chi_squared(nu);
    double scale = std::sqrt(nu / s);
    double t1 = w1 * scale, t2 = w2 * scale;
    double z1 = -1.0 / std::log(student_t_cdf(t1, nu));
    double z2 = -1.0 / std::log(student_t_cdf(t2, nu));
    sum_inv_max += 1.0 / std::max(z1, z2);
  }
  res.value = static_cast<double>(mc_size) / sum_inv_max;
  return res;
}

}  // namespace spatex
