#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatex/margins.hpp"
#include "spatex/models.hpp"
#include "spatex/numerics.hpp"
#include "spatex/rng.hpp"
#include "spatex/spatial.hpp"

namespace spatex {

namespace detail {

// Cholesky factor with a single 1e-10 jitter retry; on failure reports the
// most correlated site pair involving the offending pivot.
inline Eigen::MatrixXd chol_with_jitter(Eigen::MatrixXd a,
                                        const std::vector<std::size_t>& site_index) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    if (attempt == 0) {
      a.diagonal().array() += 1e-10;
      continue;
    }
    // locate the failing pivot with a manual factorization
    Eigen::Index n = a.rows(), bad = 0;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = a(i, i) - l.row(i).head(i).squaredNorm();
      if (!(d > 0.0)) {
        bad = i;
        break;
      }
      l(i, i) = std::sqrt(d);
      for (Eigen::Index j = i + 1; j < n; ++j) {
        l(j, i) = (a(j, i) - l.row(j).head(i).dot(l.row(i).head(i))) / l(i, i);
      }
    }
    Eigen::Index partner = bad == 0 ? std::min<Eigen::Index>(1, n - 1) : 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == bad) continue;
      double c = std::abs(a(bad, j));
      if (c > best) {
        best = c;
        partner = j;
      }
    }
    throw std::runtime_error(
        "covariance not positive definite after jitter; offending site pair (" +
        std::to_string(site_index[bad]) + ", " + std::to_string(site_index[partner]) +
        ")");
  }
  throw std::logic_error("unreachable");
}

// Groups coincident sites so degenerate covariance blocks never reach the
// factorization; returns representative indices and a site -> rep map.
struct UniqueSites {
  std::vector<std::size_t> reps;        // indices into the full SiteSet
  std::vector<std::size_t> rep_of;      // full index -> position in reps
};

inline UniqueSites unique_sites(const SiteSet& sites) {
  UniqueSites u;
  u.rep_of.resize(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    bool found = false;
    for (std::size_t k = 0; k < u.reps.size(); ++k) {
      if (sites.coords.row(i) == sites.coords.row(u.reps[k])) {
        u.rep_of[i] = k;
        found = true;
        break;
      }
    }
    if (!found) {
      u.rep_of[i] = u.reps.size();
      u.reps.push_back(i);
    }
  }
  return u;
}

// simulation accepts single-site inputs, unlike the pair-based machinery
inline void check_sites_for_simulation(const SiteSet& sites) {
  if (sites.size() < 1) throw std::invalid_argument("need at least one site");
  if (sites.size() >= 2) {
    sites.validate();
  } else if (sites.ids.size() != 1 || !sites.coords.allFinite()) {
    throw std::invalid_argument("bad single-site SiteSet");
  }
}

}  // namespace detail

struct SimStats {
  std::size_t extremal_draws = 0;  // extremal-function samples used
};

// One exact max-stable realization with unit Frechet margins, via the
// per-site conditional sampling of extremal functions.
inline Eigen::VectorXd simulate_maxstable(ModelId model, const ParamVector& params,
                                          const SiteSet& sites, Rng& rng,
                                          SimStats* stats = nullptr) {
  if (!is_max_stable(model)) {
    throw std::invalid_argument("simulate_maxstable: not a max-stable model");
  }
  detail::check_sites_for_simulation(sites);
  auto uniq = detail::unique_sites(sites);
  const std::size_t m = uniq.reps.size();
  AnisotropyParams aniso{params.alpha, params.ratio};

  Eigen::MatrixXd h(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      h(i, j) = aniso_distance(sites.coords.row(uniq.reps[i]),
                               sites.coords.row(uniq.reps[j]), aniso);
    }
  }

  const bool br = (model == ModelId::BrownResnick);
  Eigen::MatrixXd gamma, sigma;
  if (br) {
    gamma.resize(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        gamma(i, j) = variogram_br(h(i, j), params.lambda, params.kappa);
      }
    }
  } else {
    sigma.resize(m, m);
    auto fam = correlation_family(model);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        sigma(i, j) = correlation(fam, h(i, j), params.lambda, params.kappa);
      }
    }
  }

  // per conditioning site: Cholesky factor of the (m-1)-dim extremal law
  std::vector<Eigen::MatrixXd> chol(m);
  std::vector<std::vector<std::size_t>> others(m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      if (j != k) others[k].push_back(j);
    }
    if (m == 1) continue;
    const auto& o = others[k];
    Eigen::MatrixXd c(m - 1, m - 1);
    std::vector<std::size_t> labels(m - 1);
    for (std::size_t a = 0; a < m - 1; ++a) {
      labels[a] = uniq.reps[o[a]];
      for (std::size_t b = 0; b < m - 1; ++b) {
        if (br) {
          c(a, b) = gamma(o[a], k) + gamma(o[b], k) - gamma(o[a], o[b]);
        } else {
          c(a, b) = (sigma(o[a], o[b]) - sigma(o[a], k) * sigma(o[b], k)) /
                    (params.nu + 1.0);
        }
      }
    }
    chol[k] = detail::chol_with_jitter(c, labels);
  }

  auto draw_extremal = [&](std::size_t k) {
    Eigen::VectorXd y = Eigen::VectorXd::Ones(m);
    if (m == 1) return y;
    const auto& o = others[k];
    Eigen::VectorXd eps(m - 1);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
    Eigen::VectorXd g = chol[k] * eps;
    if (br) {
      for (std::size_t a = 0; a < m - 1; ++a) {
        y[o[a]] = std::exp(g[a] - gamma(o[a], k));
      }
    } else {
      double w = rng.chi_squared(params.nu + 1.0);
      double scale = std::sqrt((params.nu + 1.0) / w);
      for (std::size_t a = 0; a < m - 1; ++a) {
        double t = sigma(o[a], k) + scale * g[a];
        y[o[a]] = std::pow(std::max(0.0, t), params.nu);
      }
    }
    return y;
  };

  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < m; ++k) {
    double big_gamma = rng.exponential();
    while (1.0 / big_gamma > z[k]) {
      Eigen::VectorXd y = draw_extremal(k);
      if (stats) ++stats->extremal_draws;
      bool accept = true;
      for (std::size_t j = 0; j < k; ++j) {
        if (!(y[j] / big_gamma < z[j])) {
          accept = false;
          break;
        }
      }
      if (accept) {
        for (std::size_t j = 0; j < m; ++j) z[j] = std::max(z[j], y[j] / big_gamma);
      }
      big_gamma += rng.exponential();
    }
  }

  Eigen::VectorXd out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) out[i] = z[uniq.rep_of[i]];
  return out;
}

// One realization of the Student-t copula models with unit Frechet margins.
inline Eigen::VectorXd simulate_tcopula(ModelId model, const ParamVector& params,
                                        const SiteSet& sites, Rng& rng) {
  if (!is_t_copula(model)) {
    throw std::invalid_argument("simulate_tcopula: not a t-copula model");
  }
  detail::check_sites_for_simulation(sites);
  auto uniq = detail::unique_sites(sites);
  const std::size_t m = uniq.reps.size();
  AnisotropyParams aniso{params.alpha, params.ratio};
  auto fam = correlation_family(model);

  Eigen::MatrixXd sigma(m, m);
  std::vector<std::size_t> labels(m);
  for (std::size_t i = 0; i < m; ++i) {
    labels[i] = uniq.reps[i];
    for (std::size_t j = 0; j < m; ++j) {
      double h = aniso_distance(sites.coords.row(uniq.reps[i]),
                                sites.coords.row(uniq.reps[j]), aniso);
      sigma(i, j) = correlation(fam, h, params.lambda, params.kappa);
    }
  }
  Eigen::MatrixXd l = detail::chol_with_jitter(sigma, labels);

  Eigen::VectorXd eps(m);
  for (std::size_t i = 0; i < m; ++i) eps[i] = rng.normal();
  Eigen::VectorXd w = l * eps;
  double s = rng.chi_squared(params.nu);
  double scale = std::sqrt(params.nu / s);

  Eigen::VectorXd out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    double t = w[uniq.rep_of[i]] * scale;
    out[i] = -1.0 / std::log(student_t_cdf(t, params.nu));
  }
  return out;
}

inline Eigen::VectorXd simulate_field(ModelId model, const ParamVector& params,
                                      const SiteSet& sites, Rng& rng,
                                      SimStats* stats = nullptr) {
  if (is_max_stable(model)) return simulate_maxstable(model, params, sites, rng, stats);
  return simulate_tcopula(model, params, sites, rng);
}

// n_reps independent rows from the appropriate simulator.
inline DataMatrix simulate_dataset(ModelId model, const ParamVector& params,
                                   const SiteSet& sites, std::size_t n_reps,
                                   Rng& rng) {
  if (n_reps < 1) throw std::invalid_argument("simulate_dataset: need n_reps >= 1");
  DataMatrix data;
  data.values.resize(n_reps, sites.size());
  data.scale_tag = ScaleTag::UnitFrechet;
  data.site_ids = sites.ids;
  for (std::size_t r = 0; r < n_reps; ++r) {
    data.values.row(r) = simulate_field(model, params, sites, rng);
  }
  return data;
}

}  // namespace spatex
