#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatex/clikelihood.hpp"
#include "spatex/margins.hpp"
#include "spatex/spatial.hpp"

namespace spatex {

// F-madogram of two unit Frechet columns, using the parametric CDF
// F(z) = exp(-1/z).  Value lies in [0, 1/2).
inline double fmadogram(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  if (z1.size() != z2.size() || z1.size() < 1) {
    throw std::invalid_argument("fmadogram: need equal-length columns, n >= 1");
  }
  if ((z1.array() <= 0.0).any() || (z2.array() <= 0.0).any()) {
    throw std::invalid_argument("fmadogram: values must be positive");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z1.size(); ++i) {
    sum += std::abs(std::exp(-1.0 / z1[i]) - std::exp(-1.0 / z2[i]));
  }
  return 0.5 * sum / static_cast<double>(z1.size());
}

// Rate-parameter MLE of the L-variate extremal coefficient:
// theta = n / sum_i 1/max(column values in replicate i).
// Deliberately not clipped to [1, L].
inline double extremal_coef_estimate(const std::vector<Eigen::VectorXd>& columns) {
  if (columns.size() < 2 || columns.size() > 3) {
    throw std::invalid_argument("extremal_coef_estimate: need 2 or 3 columns");
  }
  const Eigen::Index n = columns[0].size();
  for (const auto& c : columns) {
    if (c.size() != n || n < 1) {
      throw std::invalid_argument("extremal_coef_estimate: column length mismatch");
    }
    if ((c.array() <= 0.0).any()) {
      throw std::invalid_argument("extremal_coef_estimate: values must be positive");
    }
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = columns[0][i];
    for (std::size_t c = 1; c < columns.size(); ++c) mx = std::max(mx, columns[c][i]);
    sum += 1.0 / mx;
  }
  return static_cast<double>(n) / sum;
}

// Kendall's tau over all replicate pairs; ties contribute sign 0.
inline double kendall_tau(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  if (z1.size() != z2.size() || z1.size() < 2) {
    throw std::invalid_argument("kendall_tau: need equal-length columns, n >= 2");
  }
  const Eigen::Index n = z1.size();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double a = z1[i] - z1[j], b = z2[i] - z2[j];
      double s = (a > 0) - (a < 0);
      double t = (b > 0) - (b < 0);
      sum += s * t;
    }
  }
  return 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

struct SummaryVector {
  Eigen::VectorXd values;
  std::vector<std::string> names;  // aligned with values
  bool valid = true;
  std::vector<std::string> bad_components;
};

namespace detail {

// population mean/sd of the group members indexed by membership == g
inline std::pair<double, double> group_mean_sd(const std::vector<double>& v,
                                               const std::vector<std::size_t>& member,
                                               std::size_t g) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (member[i] == g) {
      sum += v[i];
      ++count;
    }
  }
  if (count == 0) return {0.0, 0.0};
  double mean = sum / static_cast<double>(count);
  if (count < 2) return {mean, 0.0};
  double ss = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (member[i] == g) ss += (v[i] - mean) * (v[i] - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(count))};
}

}  // namespace detail

// The regression covariate vector: per-bin mean/sd of the three pairwise
// indicators, per-cluster mean/sd of the triplet extremal coefficient, then
// the stacked composite score components.  Ordering is indicator-major and
// stable; component names are emitted alongside the values.
inline SummaryVector build_summary_vector(const DataMatrix& data, const SiteSet& sites,
                                          const PairBinning& bins,
                                          const TripletClustering& clusters,
                                          const ScoreContext& score_ctx) {
  data.validate();
  if (data.scale_tag != ScaleTag::UnitFrechet) {
    throw std::invalid_argument("build_summary_vector: data must be unit Frechet");
  }
  if (data.n_sites() != sites.size()) {
    throw std::invalid_argument("build_summary_vector: data/sites mismatch");
  }
  auto pairs = enumerate_pairs(sites.size());
  auto triplets = enumerate_triplets(sites.size());
  if (bins.membership.size() != pairs.size() ||
      clusters.membership.size() != triplets.size()) {
    throw std::invalid_argument("build_summary_vector: grouping/site mismatch");
  }

  std::vector<double> fmad(pairs.size()), theta2(pairs.size()), tau(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    Eigen::VectorXd c1 = data.values.col(pairs[p].i);
    Eigen::VectorXd c2 = data.values.col(pairs[p].j);
    fmad[p] = fmadogram(c1, c2);
    theta2[p] = extremal_coef_estimate({c1, c2});
    tau[p] = kendall_tau(c1, c2);
  }
  std::vector<double> theta3(triplets.size());
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    theta3[t] = extremal_coef_estimate({data.values.col(triplets[t].i),
                                        data.values.col(triplets[t].j),
                                        data.values.col(triplets[t].k)});
  }

  const std::size_t B = bins.n_bins();
  const std::size_t G = clusters.n_clusters;
  SummaryVector out;
  out.values.resize(6 * B + 2 * G + score_ctx.total_dim());
  std::size_t at = 0;
  auto emit = [&](const std::string& name, double value) {
    out.values[at] = value;
    out.names.push_back(name);
    if (!std::isfinite(value)) {
      out.valid = false;
      out.bad_components.push_back(name);
    }
    ++at;
  };

  struct Indicator {
    const char* tag;
    const std::vector<double>* values;
  };
  for (Indicator ind : {Indicator{"fmad", &fmad}, Indicator{"theta2", &theta2},
                        Indicator{"tau", &tau}}) {
    for (std::size_t b = 0; b < B; ++b) {
      auto [m, s] = detail::group_mean_sd(*ind.values, bins.membership, b);
      emit(std::string(ind.tag) + "_bin" + std::to_string(b) + "_mean", m);
      emit(std::string(ind.tag) + "_bin" + std::to_string(b) + "_sd", s);
    }
  }
  for (std::size_t g = 0; g < G; ++g) {
    auto [m, s] = detail::group_mean_sd(theta3, clusters.membership, g);
    emit("theta3_cluster" + std::to_string(g) + "_mean", m);
    emit("theta3_cluster" + std::to_string(g) + "_sd", s);
  }

  auto scores = score_summary(data, sites, score_ctx);
  std::size_t idx = 0;
  for (std::size_t k = 0; k < score_ctx.models.size(); ++k) {
    auto pnames = param_names(score_ctx.models[k]);
    for (const auto& pn : pnames) {
      emit("score_" + model_name(score_ctx.models[k]) + "_" + pn, scores.values[idx]);
      ++idx;
    }
  }
  return out;
}

}  // namespace spatex
