#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatex/margins.hpp"
#include "spatex/models.hpp"
#include "spatex/numerics.hpp"
#include "spatex/optimize.hpp"
#include "spatex/rng.hpp"
#include "spatex/spatial.hpp"

namespace spatex {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ExponentMeasureTerms {
  double V = 0, V1 = 0, V2 = 0, V12 = 0;
  double a = 0, w = 0, v = 0, q = 0, r = 0;
};

// Per-pair quantities that depend on the parameters but not on the data;
// computing them once per pair lets the replicate loop stay cheap.
struct PairContext {
  ModelId model;
  ParamVector params;
  std::size_t dim;     // 4 for Brown-Resnick, 5 otherwise
  double hs = 0;       // anisotropic distance scaled by the range
  double dh[4] = {0, 0, 0, 0};  // d hs / d(lambda, kappa, alpha, ratio)
  // Brown-Resnick
  double a = 0, da[4] = {0, 0, 0, 0};
  // correlation-driven models
  double rho = 0, drho[4] = {0, 0, 0, 0};
};

namespace detail {

inline double bessel_k_abs(double order, double x) {
  return bessel_k(std::abs(order), x);
}

// d K_kappa(x) / d kappa by central finite differences
inline double bessel_k_dorder(double kappa, double x) {
  double step = std::min(1e-6 * std::max(1.0, kappa), 0.45 * kappa);
  return (bessel_k(kappa + step, x) - bessel_k(kappa - step, x)) / (2.0 * step);
}

// d T_{1;dof}(x) / d dof at fixed x, central finite differences
inline double student_t_cdf_ddof(double x, double dof) {
  double step = 1e-6 * std::max(1.0, dof);
  return (student_t_cdf(x, dof + step) - student_t_cdf(x, dof - step)) / (2.0 * step);
}

// d t_{1;nu+1}(x) / d nu at fixed x (closed form via digamma)
inline double student_t_pdf_dnu_fixed(double x, double nu, double pdf) {
  return 0.5 * pdf *
         (digamma(0.5 * (nu + 2.0)) - digamma(0.5 * (nu + 1.0)) - 1.0 / (nu + 1.0) -
          std::log1p(x * x / (nu + 1.0)) +
          x * x * (nu + 2.0) / ((nu + 1.0) * (x * x + nu + 1.0)));
}

}  // namespace detail

inline PairContext make_pair_context(ModelId model, const ParamVector& p,
                                     const Eigen::Vector2d& x1,
                                     const Eigen::Vector2d& x2) {
  PairContext ctx;
  ctx.model = model;
  ctx.params = p;
  ctx.dim = ParamVector::dim(model);
  if (!(p.lambda > 0.0) || !(p.ratio > 0.0) || !(p.kappa > 0.0)) {
    throw std::invalid_argument("make_pair_context: invalid parameters");
  }

  Eigen::Vector2d d = x1 - x2;
  double c = std::cos(p.alpha), s = std::sin(p.alpha);
  double sin2 = std::sin(2.0 * p.alpha), cos2 = std::cos(2.0 * p.alpha);
  double inner = d[0] * d[0] * s * s - d[0] * d[1] * sin2 + d[1] * d[1] * c * c;
  double q_form = d.squaredNorm() + (1.0 / (p.ratio * p.ratio) - 1.0) * inner;
  double hbar = std::sqrt(std::max(0.0, q_form));
  if (!(hbar > 0.0)) {
    throw std::invalid_argument("make_pair_context: coincident sites");
  }
  ctx.hs = hbar / p.lambda;

  double dq_dalpha = (1.0 / (p.ratio * p.ratio) - 1.0) *
                     ((d[0] * d[0] - d[1] * d[1]) * sin2 - 2.0 * d[0] * d[1] * cos2);
  double dq_dratio = -2.0 / (p.ratio * p.ratio * p.ratio) * inner;
  ctx.dh[0] = -hbar / (p.lambda * p.lambda);
  ctx.dh[1] = 0.0;
  ctx.dh[2] = dq_dalpha / (2.0 * hbar * p.lambda);
  ctx.dh[3] = dq_dratio / (2.0 * hbar * p.lambda);

  double h = ctx.hs;
  if (model == ModelId::BrownResnick) {
    ctx.a = std::sqrt(2.0 * std::pow(h, p.kappa));
    for (int i : {0, 2, 3}) ctx.da[i] = ctx.a * p.kappa / (2.0 * h) * ctx.dh[i];
    ctx.da[1] = 0.5 * ctx.a * std::log(h);
    return ctx;
  }

  auto fam = correlation_family(model);
  double drho_dh;
  if (fam == CorrelationFamily::WhittleMatern) {
    double kk = bessel_k(p.kappa, h);
    double log_pref = (1.0 - p.kappa) * std::log(2.0) - std::lgamma(p.kappa) +
                      p.kappa * std::log(h);
    ctx.rho = std::exp(log_pref) * kk;
    drho_dh = -std::exp(log_pref) * detail::bessel_k_abs(p.kappa - 1.0, h);
    ctx.drho[1] = ctx.rho * (std::log(0.5 * h) - digamma(p.kappa)) +
                  std::exp(log_pref) * detail::bessel_k_dorder(p.kappa, h);
  } else {
    if (!(p.kappa <= 2.0)) {
      throw std::invalid_argument("make_pair_context: PE needs kappa <= 2");
    }
    double hk = std::pow(h, p.kappa);
    ctx.rho = std::exp(-hk);
    drho_dh = -ctx.rho * p.kappa * std::pow(h, p.kappa - 1.0);
    ctx.drho[1] = -ctx.rho * hk * std::log(h);
  }
  for (int i : {0, 2, 3}) ctx.drho[i] = drho_dh * ctx.dh[i];
  return ctx;
}

// ---------------------------------------------------------------------------
// Brown-Resnick bivariate terms (exponent measure and parameter derivatives)
// ---------------------------------------------------------------------------

inline ExponentMeasureTerms exponent_measure_br(const PairContext& ctx, double z1,
                                                double z2) {
  ExponentMeasureTerms t;
  double a = ctx.a;
  t.a = a;
  t.w = 0.5 * a + std::log(z2 / z1) / a;
  t.v = a - t.w;
  auto [Pw, pw] = gauss_cdf_pdf(t.w);
  auto [Pv, pv] = gauss_cdf_pdf(t.v);
  t.V = Pw / z1 + Pv / z2;
  t.V1 = pv / (a * z1 * z2) - pw / (a * z1 * z1) - Pw / (z1 * z1);
  t.V2 = pw / (a * z1 * z2) - pv / (a * z2 * z2) - Pv / (z2 * z2);
  t.V12 = -t.v * pw / (a * a * z1 * z1 * z2) - t.w * pv / (a * a * z1 * z2 * z2);
  return t;
}

inline ExponentMeasureTerms exponent_measure_extt(const PairContext& ctx, double z1,
                                                  double z2) {
  ExponentMeasureTerms t;
  double nu = ctx.params.nu, rho = ctx.rho;
  double a = std::sqrt((nu + 1.0) / (1.0 - rho * rho));
  t.a = a;
  t.q = std::pow(z2 / z1, 1.0 / nu);
  t.r = 1.0 / t.q;
  t.w = a * (t.q - rho);
  t.v = a * (t.r - rho);
  auto sw = student_t(t.w, nu + 1.0);
  auto sv = student_t(t.v, nu + 1.0);
  t.V = sw.cdf / z1 + sv.cdf / z2;
  t.V1 = -sw.cdf / (z1 * z1) - a * t.q * sw.pdf / (nu * z1 * z1) +
         a * t.r * sv.pdf / (nu * z1 * z2);
  t.V2 = -sv.cdf / (z2 * z2) - a * t.r * sv.pdf / (nu * z2 * z2) +
         a * t.q * sw.pdf / (nu * z1 * z2);
  t.V12 = -(nu + 1.0) * a * t.q * sw.pdf / (nu * nu * z1 * z1 * z2) -
          a * a * t.q * t.q * sw.d_pdf_dx / (nu * nu * z1 * z1 * z2) -
          (nu + 1.0) * a * t.r * sv.pdf / (nu * nu * z1 * z2 * z2) -
          a * a * t.r * t.r * sv.d_pdf_dx / (nu * nu * z1 * z2 * z2);
  return t;
}

struct PairEval {
  double loglik = kNegInf;
  Eigen::VectorXd score;  // empty when only the log-likelihood was requested
  bool density_positive = true;
};

namespace detail {

inline PairEval eval_br(const PairContext& ctx, double z1, double z2,
                        bool want_score) {
  PairEval out;
  auto t = exponent_measure_br(ctx, z1, z2);
  double D = t.V1 * t.V2 - t.V12;
  if (!(D > 0.0) || !std::isfinite(D)) {
    out.density_positive = false;
    if (want_score) out.score = Eigen::VectorXd::Zero(4);
    return out;
  }
  out.loglik = -t.V + std::log(D);
  if (!want_score) return out;

  double a = t.a, w = t.w, v = t.v;
  double pw = gauss_pdf(w), pv = gauss_pdf(v);
  out.score.resize(4);
  double base_V = v * pw / (a * z1) + w * pv / (a * z2);
  double base_V1 = (1.0 - v * v) * pw / (a * a * z1 * z1) -
                   (1.0 + w * v) * pv / (a * a * z1 * z2);
  double base_V2 = (1.0 - w * w) * pv / (a * a * z2 * z2) -
                   (1.0 + w * v) * pw / (a * a * z1 * z2);
  double base_V12 = ((w * v * v + 2.0 * v - w) * pw * z2 +
                     (v * w * w + 2.0 * w - v) * pv * z1) /
                    (a * a * a * z1 * z1 * z2 * z2);
  for (int i = 0; i < 4; ++i) {
    double dai = ctx.da[i];
    double Vi = base_V * dai;
    double V1i = base_V1 * dai;
    double V2i = base_V2 * dai;
    double V12i = base_V12 * dai;
    out.score[i] = -Vi + (V1i * t.V2 + t.V1 * V2i - V12i) / D;
  }
  return out;
}

inline PairEval eval_extt(const PairContext& ctx, double z1, double z2,
                          bool want_score) {
  PairEval out;
  const double nu = ctx.params.nu, rho = ctx.rho;
  auto t = exponent_measure_extt(ctx, z1, z2);
  double D = t.V1 * t.V2 - t.V12;
  if (!(D > 0.0) || !std::isfinite(D)) {
    out.density_positive = false;
    if (want_score) out.score = Eigen::VectorXd::Zero(5);
    return out;
  }
  out.loglik = -t.V + std::log(D);
  if (!want_score) return out;

  const double a = t.a, w = t.w, v = t.v, q = t.q, r = t.r;
  auto sw = student_t(w, nu + 1.0);
  auto sv = student_t(v, nu + 1.0);
  const double tw = sw.pdf, tv = sv.pdf;
  const double tpw = sw.d_pdf_dx, tpv = sv.d_pdf_dx;
  // second derivative of the t_{nu+1} density in its argument, closed form
  auto tpp = [nu](double x, double pdf) {
    double den = x * x + nu + 1.0;
    return pdf * (nu + 2.0) * (x * x * (nu + 3.0) - (nu + 1.0)) / (den * den);
  };
  const double tppw = tpp(w, tw), tppv = tpp(v, tv);

  out.score.resize(5);
  const double z11 = z1 * z1, z22 = z2 * z2, z12 = z1 * z2;
  const double one_m_r2 = 1.0 - rho * rho;

  for (int i = 0; i < 4; ++i) {
    double dri = ctx.drho[i];
    double dai = a * rho / one_m_r2 * dri;
    double dwi = (-a + w * rho / one_m_r2) * dri;
    double dvi = (-a + v * rho / one_m_r2) * dri;
    double Vi = tw * dwi / z1 + tv * dvi / z2;
    double V1i = -tw * dwi / z11 - a * q * tpw * dwi / (nu * z11) -
                 q * tw * dai / (nu * z11) + a * r * tpv * dvi / (nu * z12) +
                 r * tv * dai / (nu * z12);
    double V2i = -tv * dvi / z22 - a * r * tpv * dvi / (nu * z22) -
                 r * tv * dai / (nu * z22) + a * q * tpw * dwi / (nu * z12) +
                 q * tw * dai / (nu * z12);
    double c1 = nu * nu * z11 * z2, c2 = nu * nu * z1 * z22;
    double V12i = -(nu + 1.0) * q * tw * dai / c1 -
                  (nu + 1.0) * a * q * tpw * dwi / c1 -
                  2.0 * a * q * q * tpw * dai / c1 - a * a * q * q * tppw * dwi / c1 -
                  (nu + 1.0) * r * tv * dai / c2 -
                  (nu + 1.0) * a * r * tpv * dvi / c2 -
                  2.0 * a * r * r * tpv * dai / c2 - a * a * r * r * tppv * dvi / c2;
    out.score[i] = -Vi + (V1i * t.V2 + t.V1 * V2i - V12i) / D;
  }

  // degrees-of-freedom component
  double da_nu = a / (2.0 * (nu + 1.0));
  double dq_nu = -q * std::log(q) / nu;
  double dr_nu = -r * std::log(r) / nu;
  double dw_nu = (q - rho) * da_nu + a * dq_nu;
  double dv_nu = (r - rho) * da_nu + a * dr_nu;
  double dT_w = detail::student_t_cdf_ddof(w, nu + 1.0) + tw * dw_nu;
  double dT_v = detail::student_t_cdf_ddof(v, nu + 1.0) + tv * dv_nu;
  double dt_w = detail::student_t_pdf_dnu_fixed(w, nu, tw) + tpw * dw_nu;
  double dt_v = detail::student_t_pdf_dnu_fixed(v, nu, tv) + tpv * dv_nu;
  auto dtp = [nu](double x, double pdf, double dpdx, double dx_nu, double dt_nu) {
    double den = x * x + nu + 1.0;
    double grouped = (nu + 2.0) * (x * x - nu - 1.0) / (den * den) * pdf * dx_nu;
    return dpdx * (1.0 / (nu + 2.0) - 1.0 / den + dt_nu / pdf) + grouped;
  };
  double dtp_w = dtp(w, tw, tpw, dw_nu, dt_w);
  double dtp_v = dtp(v, tv, tpv, dv_nu, dt_v);

  double Vnu = dT_w / z1 + dT_v / z2;
  double V1nu = -dT_w / z11 + a * q * tw / (nu * nu * z11) -
                q * tw * da_nu / (nu * z11) - a * tw * dq_nu / (nu * z11) -
                a * q * dt_w / (nu * z11) - a * r * tv / (nu * nu * z12) +
                r * tv * da_nu / (nu * z12) + a * tv * dr_nu / (nu * z12) +
                a * r * dt_v / (nu * z12);
  double V2nu = -dT_v / z22 + a * r * tv / (nu * nu * z22) -
                r * tv * da_nu / (nu * z22) - a * tv * dr_nu / (nu * z22) -
                a * r * dt_v / (nu * z22) - a * q * tw / (nu * nu * z12) +
                q * tw * da_nu / (nu * z12) + a * tw * dq_nu / (nu * z12) +
                a * q * dt_w / (nu * z12);
  double c1 = nu * nu * z11 * z2, c2 = nu * nu * z1 * z22;
  double V12nu =
      (nu + 2.0) * a * q * tw / (nu * c1) - (nu + 1.0) * q * tw * da_nu / c1 -
      (nu + 1.0) * a * tw * dq_nu / c1 - (nu + 1.0) * a * q * dt_w / c1 +
      2.0 * a * a * q * q * tpw / (nu * c1) - 2.0 * a * q * q * tpw * da_nu / c1 -
      2.0 * a * a * q * tpw * dq_nu / c1 - a * a * q * q * dtp_w / c1 +
      (nu + 2.0) * a * r * tv / (nu * c2) - (nu + 1.0) * r * tv * da_nu / c2 -
      (nu + 1.0) * a * tv * dr_nu / c2 - (nu + 1.0) * a * r * dt_v / c2 +
      2.0 * a * a * r * r * tpv / (nu * c2) - 2.0 * a * r * r * tpv * da_nu / c2 -
      2.0 * a * a * r * tpv * dr_nu / c2 - a * a * r * r * dtp_v / c2;
  out.score[4] = -Vnu + (V1nu * t.V2 + t.V1 * V2nu - V12nu) / D;
  return out;
}

inline PairEval eval_tcop(const PairContext& ctx, double z1, double z2,
                          bool want_score) {
  PairEval out;
  const double nu = ctx.params.nu, rho = ctx.rho;
  const double one_m_r2 = 1.0 - rho * rho;
  double eta1 = student_t_quantile(std::exp(-1.0 / z1), nu);
  double eta2 = student_t_quantile(std::exp(-1.0 / z2), nu);
  double Q = (eta1 * eta1 - 2.0 * rho * eta1 * eta2 + eta2 * eta2) / one_m_r2;

  double ll = std::log(0.5 * nu) - 0.5 * std::log(one_m_r2) -
              0.5 * (nu + 2.0) * std::log1p(Q / nu) -
              2.0 * std::lgamma(0.5 * (nu + 1.0)) + 2.0 * std::lgamma(0.5 * nu) +
              0.5 * (nu + 1.0) *
                  (std::log1p(eta1 * eta1 / nu) + std::log1p(eta2 * eta2 / nu)) -
              1.0 / z1 - 2.0 * std::log(z1) - 1.0 / z2 - 2.0 * std::log(z2);
  if (!std::isfinite(ll)) {
    out.density_positive = false;
    if (want_score) out.score = Eigen::VectorXd::Zero(5);
    return out;
  }
  out.loglik = ll;
  if (!want_score) return out;

  out.score.resize(5);
  double corr_factor =
      rho / one_m_r2 + (nu + 2.0) / (nu + Q) *
                           ((1.0 + rho * rho) * eta1 * eta2 -
                            rho * (eta1 * eta1 + eta2 * eta2)) /
                           (one_m_r2 * one_m_r2);
  for (int i = 0; i < 4; ++i) out.score[i] = corr_factor * ctx.drho[i];

  // eta'(nu) at fixed probability level, by central finite differences
  double step = 1e-6 * std::max(1.0, nu);
  double p1 = std::exp(-1.0 / z1), p2 = std::exp(-1.0 / z2);
  double deta1 = (student_t_quantile(p1, nu + step) -
                  student_t_quantile(p1, nu - step)) /
                 (2.0 * step);
  double deta2 = (student_t_quantile(p2, nu + step) -
                  student_t_quantile(p2, nu - step)) /
                 (2.0 * step);
  double cross = eta1 * deta1 - rho * eta2 * deta1 - rho * eta1 * deta2 +
                 eta2 * deta2;
  double snu = 1.0 / nu - digamma(0.5 * (nu + 1.0)) + digamma(0.5 * nu) -
               0.5 * std::log1p(Q / nu) -
               (nu + 2.0) / (2.0 * nu * (nu + Q)) *
                   (2.0 * nu / one_m_r2 * cross - Q) +
               0.5 * (std::log1p(eta1 * eta1 / nu) + std::log1p(eta2 * eta2 / nu)) +
               (nu + 1.0) / (2.0 * nu) *
                   ((2.0 * nu * eta1 * deta1 - eta1 * eta1) / (nu + eta1 * eta1) +
                    (2.0 * nu * eta2 * deta2 - eta2 * eta2) / (nu + eta2 * eta2));
  out.score[4] = snu;
  return out;
}

inline PairEval eval_pair(const PairContext& ctx, double z1, double z2,
                          bool want_score) {
  if (!(z1 > 0.0) || !(z2 > 0.0)) {
    throw std::invalid_argument("pair likelihood needs positive values");
  }
  switch (ctx.model) {
    case ModelId::BrownResnick:
      return eval_br(ctx, z1, z2, want_score);
    case ModelId::ExtT_WM:
    case ModelId::ExtT_PE:
      return eval_extt(ctx, z1, z2, want_score);
    default:
      return eval_tcop(ctx, z1, z2, want_score);
  }
}

}  // namespace detail

inline double biv_loglik(ModelId model, const ParamVector& p, double z1, double z2,
                         const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  auto ctx = make_pair_context(model, p, x1, x2);
  return detail::eval_pair(ctx, z1, z2, false).loglik;
}

inline Eigen::VectorXd biv_score(ModelId model, const ParamVector& p, double z1,
                                 double z2, const Eigen::Vector2d& x1,
                                 const Eigen::Vector2d& x2) {
  auto ctx = make_pair_context(model, p, x1, x2);
  return detail::eval_pair(ctx, z1, z2, true).score;
}

// ---------------------------------------------------------------------------
// H-dimensional t-copula log-likelihood (used as an extra MCLE start and to
// cross-check the bivariate closed form)
// ---------------------------------------------------------------------------

inline double tcop_full_loglik(ModelId model, const ParamVector& p,
                               const DataMatrix& data, const SiteSet& sites) {
  if (!is_t_copula(model)) {
    throw std::invalid_argument("tcop_full_loglik: not a t-copula model");
  }
  const std::size_t H = sites.size();
  const double nu = p.nu;
  auto fam = correlation_family(model);
  AnisotropyParams aniso{p.alpha, p.ratio};
  Eigen::MatrixXd sigma(H, H);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < H; ++j) {
      double h = aniso_distance(sites.coords.row(i), sites.coords.row(j), aniso);
      sigma(i, j) = correlation(fam, h, p.lambda, p.kappa);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) return kNegInf;
  double log_det = 0.0;
  for (std::size_t i = 0; i < H; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));

  double total = 0.0;
  double Hd = static_cast<double>(H);
  double const_part = std::lgamma(0.5 * (nu + Hd)) - Hd * std::lgamma(0.5 * (nu + 1.0)) +
                      (Hd - 1.0) * std::lgamma(0.5 * nu) - 0.5 * log_det;
  for (Eigen::Index rep = 0; rep < data.values.rows(); ++rep) {
    Eigen::VectorXd eta(H);
    double tail = 0.0;
    for (std::size_t i = 0; i < H; ++i) {
      double z = data.values(rep, i);
      if (!(z > 0.0)) return kNegInf;
      eta[i] = student_t_quantile(std::exp(-1.0 / z), nu);
      tail += 0.5 * (nu + 1.0) * std::log1p(eta[i] * eta[i] / nu) - 1.0 / z -
              2.0 * std::log(z);
    }
    double Q = eta.dot(llt.solve(eta));
    total += const_part - 0.5 * (nu + Hd) * std::log1p(Q / nu) + tail;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Pairwise composite likelihood over a data matrix
// ---------------------------------------------------------------------------

inline std::vector<PairContext> make_pair_contexts(ModelId model,
                                                   const ParamVector& p,
                                                   const SiteSet& sites) {
  auto pairs = enumerate_pairs(sites.size());
  std::vector<PairContext> ctxs;
  ctxs.reserve(pairs.size());
  for (const auto& pr : pairs) {
    ctxs.push_back(
        make_pair_context(model, p, sites.coords.row(pr.i), sites.coords.row(pr.j)));
  }
  return ctxs;
}

inline void check_weights(const std::vector<double>& weights, std::size_t n_pairs) {
  if (!weights.empty() && weights.size() != n_pairs) {
    throw std::invalid_argument("pair weights must match the pair count");
  }
}

inline double pairwise_loglik(ModelId model, const ParamVector& p,
                              const DataMatrix& data, const SiteSet& sites,
                              const std::vector<double>& weights = {}) {
  data.validate();
  auto pairs = enumerate_pairs(sites.size());
  check_weights(weights, pairs.size());
  auto ctxs = make_pair_contexts(model, p, sites);
  double total = 0.0;
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    double w = weights.empty() ? 1.0 : weights[pi];
    if (w == 0.0) continue;
    for (Eigen::Index rep = 0; rep < data.values.rows(); ++rep) {
      double ll = detail::eval_pair(ctxs[pi], data.values(rep, pairs[pi].i),
                                    data.values(rep, pairs[pi].j), false)
                      .loglik;
      if (ll == kNegInf) return kNegInf;
      total += w * ll;
    }
  }
  return total;
}

// Composite score contributions, one row per replicate.
inline Eigen::MatrixXd composite_score_by_replicate(
    ModelId model, const ParamVector& p, const DataMatrix& data,
    const SiteSet& sites, const std::vector<double>& weights = {}) {
  data.validate();
  auto pairs = enumerate_pairs(sites.size());
  check_weights(weights, pairs.size());
  auto ctxs = make_pair_contexts(model, p, sites);
  const std::size_t dim = ParamVector::dim(model);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(data.values.rows(), dim);
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    double w = weights.empty() ? 1.0 : weights[pi];
    if (w == 0.0) continue;
    for (Eigen::Index rep = 0; rep < data.values.rows(); ++rep) {
      auto ev = detail::eval_pair(ctxs[pi], data.values(rep, pairs[pi].i),
                                  data.values(rep, pairs[pi].j), true);
      rows.row(rep) += w * ev.score.transpose();
    }
  }
  return rows;
}

inline Eigen::VectorXd composite_score(ModelId model, const ParamVector& p,
                                       const DataMatrix& data, const SiteSet& sites,
                                       const std::vector<double>& weights = {}) {
  return composite_score_by_replicate(model, p, data, sites, weights)
      .colwise()
      .sum()
      .transpose();
}

// ---------------------------------------------------------------------------
// Maximum composite-likelihood estimation
// ---------------------------------------------------------------------------

struct McleOptions {
  std::size_t n_converged = 5;
  std::size_t max_starts = 25;
  std::uint64_t seed = 0x6d636c65ULL;
  double tol = 1e-9;
  std::size_t max_evaluations = 4000;
  bool tcop_full_lik_start = true;
};

struct McleResult {
  ParamVector params;
  double loglik = kNegInf;
  std::size_t converged_runs = 0;
  std::size_t starts_used = 0;
};

namespace detail {

// optimization runs in (log lambda, kappa, alpha, log r[, log nu]) coordinates
inline void mcle_bounds(ModelId model, const PriorSpec& prior, Vector& lo, Vector& hi) {
  std::size_t dim = ParamVector::dim(model);
  lo.resize(dim);
  hi.resize(dim);
  lo[0] = prior.log_lambda_mean - 4.0 * prior.log_lambda_sd();
  hi[0] = prior.log_lambda_mean + 4.0 * prior.log_lambda_sd();
  lo[1] = 1e-3;
  hi[1] = prior.kappa_hi;
  lo[2] = prior.alpha_lo;
  hi[2] = prior.alpha_hi - 1e-6;
  lo[3] = prior.log_ratio_mean - 4.0 * prior.log_ratio_sd();
  hi[3] = prior.log_ratio_mean + 4.0 * prior.log_ratio_sd();
  if (dim == 5) {
    lo[4] = prior.log_nu_trunc_lo;
    hi[4] = prior.log_nu_trunc_hi;
  }
}

}  // namespace detail

inline McleResult mcle_fit(ModelId model, const DataMatrix& data, const SiteSet& sites,
                           const PriorSpec& prior, const McleOptions& opts = {},
                           const std::vector<double>& weights = {}) {
  data.validate();
  const std::size_t dim = ParamVector::dim(model);
  Vector lo, hi;
  detail::mcle_bounds(model, prior, lo, hi);

  auto clamp_to_box = [&](Vector psi) {
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi[i] = std::clamp(psi[i], lo[i], hi[i]);
    return psi;
  };

  auto objective = [&](const Vector& psi) {
    auto p = ParamVector::from_transformed(model, psi);
    double ll = pairwise_loglik(model, p, data, sites, weights);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };
  auto gradient = [&](const Vector& psi) {
    auto p = ParamVector::from_transformed(model, psi);
    Eigen::VectorXd g = composite_score(model, p, data, sites, weights);
    Vector gt(dim);
    gt[0] = -g[0] * p.lambda;
    gt[1] = -g[1];
    gt[2] = -g[2];
    gt[3] = -g[3] * p.ratio;
    if (dim == 5) gt[4] = -g[4] * p.nu;
    return gt;
  };

  MinimizeOptions mopts;
  mopts.tol = opts.tol;
  mopts.max_evaluations = opts.max_evaluations;

  McleResult best;
  Rng rng(opts.seed);

  std::vector<Vector> extra_starts;
  if (is_t_copula(model) && opts.tcop_full_lik_start) {
    auto full_obj = [&](const Vector& psi) {
      auto p = ParamVector::from_transformed(model, psi);
      double ll = tcop_full_loglik(model, p, data, sites);
      return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    };
    Vector x0(dim);
    x0 << prior.log_lambda_mean, 1.0, 0.5 * (lo[2] + hi[2]), prior.log_ratio_mean,
        prior.log_nu_mean;
    MinimizeOptions fopts;
    fopts.tol = 1e-7;
    fopts.max_evaluations = 2000;
    auto full = minimize_bounded(full_obj, lo, hi, clamp_to_box(x0), fopts);
    if (std::isfinite(full.min)) extra_starts.push_back(full.argmin);
  }

  std::size_t attempt = 0;
  while (best.converged_runs < opts.n_converged &&
         attempt < opts.max_starts + extra_starts.size()) {
    Vector psi0;
    if (attempt < extra_starts.size()) {
      psi0 = extra_starts[attempt];
    } else {
      auto p0 = prior_sample(model, prior, rng);
      psi0 = clamp_to_box(p0.to_transformed(model));
    }
    ++attempt;
    auto res = minimize_bounded(objective, gradient, lo, hi, psi0, mopts);
    if (!std::isfinite(res.min)) continue;
    if (res.converged) ++best.converged_runs;
    if (-res.min > best.loglik) {
      best.loglik = -res.min;
      best.params = ParamVector::from_transformed(model, res.argmin);
    }
  }
  best.starts_used = attempt;
  if (best.converged_runs < opts.n_converged) {
    throw std::runtime_error("mcle_fit: fewer than " +
                             std::to_string(opts.n_converged) +
                             " converged runs for model " + model_name(model));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Score-based summary statistics and CLIC
// ---------------------------------------------------------------------------

struct ScoreContext {
  std::vector<ModelId> models;
  std::vector<ParamVector> mcle;    // aligned with models
  std::vector<double> weights;      // pair weights, empty = all ones

  std::size_t total_dim() const {
    std::size_t d = 0;
    for (auto m : models) d += ParamVector::dim(m);
    return d;
  }
};

struct ScoreSummary {
  Eigen::VectorXd values;
  bool valid = true;
  std::vector<std::string> bad_components;
};

inline ScoreSummary score_summary(const DataMatrix& data, const SiteSet& sites,
                                  const ScoreContext& ctx) {
  if (ctx.models.size() != ctx.mcle.size()) {
    throw std::invalid_argument("score_summary: models/mcle mismatch");
  }
  ScoreSummary out;
  out.values.resize(ctx.total_dim());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < ctx.models.size(); ++k) {
    Eigen::VectorXd s =
        composite_score(ctx.models[k], ctx.mcle[k], data, sites, ctx.weights);
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      out.values[offset + j] = s[j];
      if (!std::isfinite(s[j])) {
        out.valid = false;
        out.bad_components.push_back(model_name(ctx.models[k]) + ":" +
                                     param_names(ctx.models[k])[j]);
      }
    }
    offset += s.size();
  }
  return out;
}

struct ClicError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClicResult {
  double clic = 0.0;
  double loglik = 0.0;
  double penalty = 0.0;  // 2 tr(J H^-1)
  ParamVector mcle;
};

inline ClicResult clic(ModelId model, const DataMatrix& data, const SiteSet& sites,
                       const ParamVector& theta, double fd_step = 1e-5,
                       const std::vector<double>& weights = {}) {
  const std::size_t dim = ParamVector::dim(model);
  double ll = pairwise_loglik(model, theta, data, sites, weights);

  Eigen::MatrixXd per_rep = composite_score_by_replicate(model, theta, data, sites, weights);
  Eigen::RowVectorXd mean = per_rep.colwise().mean();
  Eigen::MatrixXd centered = per_rep.rowwise() - mean;
  Eigen::MatrixXd J = centered.transpose() * centered;

  // H = -d(score)/d(theta), central finite differences of the analytic score
  Eigen::MatrixXd Hm(dim, dim);
  Eigen::VectorXd th = theta.to_vector(model);
  for (std::size_t j = 0; j < dim; ++j) {
    double step = fd_step * std::max(1.0, std::abs(th[j]));
    Eigen::VectorXd up = th, dn = th;
    up[j] += step;
    dn[j] -= step;
    Eigen::VectorXd su = composite_score(model, ParamVector::from_vector(model, up),
                                         data, sites, weights);
    Eigen::VectorXd sd = composite_score(model, ParamVector::from_vector(model, dn),
                                         data, sites, weights);
    Hm.col(j) = -(su - sd) / (2.0 * step);
  }
  Hm = 0.5 * (Hm + Hm.transpose().eval());

  Eigen::FullPivLU<Eigen::MatrixXd> lu(Hm);
  if (!lu.isInvertible()) {
    throw ClicError("clic: sensitivity matrix is singular for model " +
                    model_name(model));
  }
  ClicResult res;
  res.mcle = theta;
  res.loglik = ll;
  res.penalty = 2.0 * (lu.solve(J)).trace();
  res.clic = -2.0 * ll + res.penalty;
  return res;
}

inline ClicResult clic(ModelId model, const DataMatrix& data, const SiteSet& sites,
                       const PriorSpec& prior, const McleOptions& opts = {}) {
  auto fit = mcle_fit(model, data, sites, prior, opts);
  return clic(model, data, sites, fit.params);
}

}  // namespace spatex
