#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatex/rng.hpp"

namespace spatex {

struct SiteSet {
  std::vector<std::string> ids;
  Eigen::MatrixX2d coords;  // H x 2 planar coordinates

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }

  void validate() const {
    if (size() < 2) throw std::invalid_argument("SiteSet: need at least 2 sites");
    if (ids.size() != size()) throw std::invalid_argument("SiteSet: id/coord mismatch");
    if (!coords.allFinite()) throw std::invalid_argument("SiteSet: non-finite coordinate");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        if (ids[i] == ids[j]) {
          throw std::invalid_argument("SiteSet: duplicate id '" + ids[i] + "'");
        }
      }
    }
  }
};

struct AnisotropyParams {
  double alpha = 0.0;  // rotation angle, radians in [0, pi/2)
  double ratio = 1.0;  // principal-axes ratio r > 0
};

// h = || diag(1, 1/r) * Rot(alpha) * (x1 - x2) ||
inline double aniso_distance(const Eigen::Vector2d& x1, const Eigen::Vector2d& x2,
                             const AnisotropyParams& aniso) {
  Eigen::Vector2d d = x1 - x2;
  double c = std::cos(aniso.alpha), s = std::sin(aniso.alpha);
  double u = c * d[0] + s * d[1];
  double v = (-s * d[0] + c * d[1]) / aniso.ratio;
  return std::sqrt(u * u + v * v);
}

inline double euclidean_distance(const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  return (x1 - x2).norm();
}

struct SitePair {
  std::size_t i, j;  // i < j
};

inline std::vector<SitePair> enumerate_pairs(std::size_t n_sites) {
  std::vector<SitePair> pairs;
  for (std::size_t i = 0; i < n_sites; ++i) {
    for (std::size_t j = i + 1; j < n_sites; ++j) pairs.push_back({i, j});
  }
  return pairs;
}

struct SiteTriplet {
  std::size_t i, j, k;  // i < j < k
};

inline std::vector<SiteTriplet> enumerate_triplets(std::size_t n_sites) {
  std::vector<SiteTriplet> triplets;
  for (std::size_t i = 0; i < n_sites; ++i) {
    for (std::size_t j = i + 1; j < n_sites; ++j) {
      for (std::size_t k = j + 1; k < n_sites; ++k) triplets.push_back({i, j, k});
    }
  }
  return triplets;
}

inline std::vector<double> pairwise_euclidean(const SiteSet& sites) {
  auto pairs = enumerate_pairs(sites.size());
  std::vector<double> d(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    d[p] = euclidean_distance(sites.coords.row(pairs[p].i), sites.coords.row(pairs[p].j));
  }
  return d;
}

struct PairBinning {
  std::vector<double> edges;            // B+1 breakpoints, strictly increasing
  std::vector<std::size_t> membership;  // pair index -> bin index
  std::size_t n_bins() const { return edges.empty() ? 0 : edges.size() - 1; }
};

// Bins all site pairs by Euclidean distance.  Default edges are empirical
// quantile cuts giving approximately equal-sized groups; explicit edges are
// honored verbatim with intervals (e_j, e_{j+1}].
inline PairBinning make_pair_bins(const SiteSet& sites, std::size_t n_bins,
                                  const std::vector<double>& edges = {}) {
  sites.validate();
  auto dist = pairwise_euclidean(sites);
  PairBinning binning;

  if (!edges.empty()) {
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i] > edges[i - 1])) {
        throw std::invalid_argument("make_pair_bins: edges must be strictly increasing");
      }
    }
    binning.edges = edges;
  } else {
    if (n_bins < 1) throw std::invalid_argument("make_pair_bins: need B >= 1");
    std::vector<double> sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    std::vector<double> e;
    e.push_back(0.0);
    for (std::size_t b = 1; b < n_bins; ++b) {
      std::size_t cut = b * n / n_bins;  // rank-based cut for balanced groups
      if (cut == 0 || cut >= n) continue;
      double mid = 0.5 * (sorted[cut - 1] + sorted[cut]);
      if (mid > e.back()) e.push_back(mid);
    }
    e.push_back(sorted.back() * (1.0 + 1e-12) + 1e-300);
    binning.edges = e;
  }

  binning.membership.resize(dist.size());
  std::vector<std::size_t> uncovered;
  for (std::size_t p = 0; p < dist.size(); ++p) {
    double d = dist[p];
    bool found = false;
    for (std::size_t b = 0; b + 1 < binning.edges.size(); ++b) {
      bool lower_ok = (b == 0) ? d >= binning.edges[0] : d > binning.edges[b];
      if (lower_ok && d <= binning.edges[b + 1]) {
        binning.membership[p] = b;
        found = true;
        break;
      }
    }
    if (!found) uncovered.push_back(p);
  }
  if (!uncovered.empty()) {
    std::string msg = "make_pair_bins: edges do not cover pairs:";
    for (auto p : uncovered) msg += " " + std::to_string(p);
    throw std::invalid_argument(msg);
  }
  return binning;
}

struct TripletClustering {
  std::size_t n_clusters = 0;
  Eigen::MatrixX3d centroids;           // G x 3 sorted-distance features
  std::vector<std::size_t> membership;  // triplet index -> cluster
  double objective = 0.0;               // total L1 distance to centroids
};

namespace detail {

inline double l1(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return (a - b).cwiseAbs().sum();
}

inline double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// k-median clustering of location triplets on their sorted pairwise-distance
// features.  Runs `restarts` seeded initializations and keeps the lowest L1
// objective, so the result is deterministic for fixed (sites, G, seed).
inline TripletClustering make_triplet_clusters(const SiteSet& sites, std::size_t G,
                                               std::uint64_t seed,
                                               int restarts = 10) {
  sites.validate();
  auto triplets = enumerate_triplets(sites.size());
  const std::size_t T = triplets.size();
  if (G < 1 || G > T) {
    throw std::invalid_argument("make_triplet_clusters: G must be in [1, C(H,3)]");
  }

  std::vector<Eigen::Vector3d> features(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& tr = triplets[t];
    std::array<double, 3> d = {
        euclidean_distance(sites.coords.row(tr.i), sites.coords.row(tr.j)),
        euclidean_distance(sites.coords.row(tr.i), sites.coords.row(tr.k)),
        euclidean_distance(sites.coords.row(tr.j), sites.coords.row(tr.k))};
    std::sort(d.begin(), d.end());
    features[t] = Eigen::Vector3d(d[0], d[1], d[2]);
  }

  TripletClustering best;
  best.objective = std::numeric_limits<double>::infinity();
  Rng rng(seed);

  for (int run = 0; run < restarts; ++run) {
    Rng r = rng.split(run);
    // init: distinct random features as centroids
    std::vector<std::size_t> pool(T);
    for (std::size_t t = 0; t < T; ++t) pool[t] = t;
    for (std::size_t g = 0; g < G; ++g) {
      std::size_t pick = g + r.index(T - g);
      std::swap(pool[g], pool[pick]);
    }
    std::vector<Eigen::Vector3d> centroids(G);
    for (std::size_t g = 0; g < G; ++g) centroids[g] = features[pool[g]];

    std::vector<std::size_t> member(T, 0);
    double objective = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      objective = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        double bestd = std::numeric_limits<double>::infinity();
        std::size_t bestg = 0;
        for (std::size_t g = 0; g < G; ++g) {
          double d = detail::l1(features[t], centroids[g]);
          if (d < bestd) {
            bestd = d;
            bestg = g;
          }
        }
        if (member[t] != bestg) {
          member[t] = bestg;
          changed = true;
        }
        objective += bestd;
      }
      if (!changed && iter > 0) break;
      for (std::size_t g = 0; g < G; ++g) {
        std::array<std::vector<double>, 3> coords;
        for (std::size_t t = 0; t < T; ++t) {
          if (member[t] != g) continue;
          for (int c = 0; c < 3; ++c) coords[c].push_back(features[t][c]);
        }
        if (coords[0].empty()) continue;  // empty cluster keeps its centroid
        for (int c = 0; c < 3; ++c) centroids[g][c] = detail::median_of(coords[c]);
      }
    }

    if (objective < best.objective) {
      best.n_clusters = G;
      best.centroids.resize(G, 3);
      for (std::size_t g = 0; g < G; ++g) best.centroids.row(g) = centroids[g];
      best.membership = member;
      best.objective = objective;
    }
  }
  return best;
}

}  // namespace spatex
