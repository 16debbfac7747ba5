#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spatex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using Objective = std::function<double(const Vector&)>;
using Gradient = std::function<Vector(const Vector&)>;

struct MinimizeResult {
  Vector argmin;
  double min = std::numeric_limits<double>::infinity();
  bool converged = false;
  int evaluations = 0;
  std::string diagnostic;
};

struct MinimizeOptions {
  double tol = 1e-8;          // simplex size / projected gradient norm
  int max_evaluations = 20000;
};

// Central finite differences per coordinate.
inline Vector finite_difference_gradient(const Objective& f, const Vector& x,
                                         double step) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    double fp = f(xp), fm = f(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error(
          "finite_difference_gradient: non-finite value at coordinate " +
          std::to_string(i));
    }
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

namespace detail {

inline Vector clamp_to_box(Vector x, const Vector& lower, const Vector& upper) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = std::clamp(x[i], lower[i], upper[i]);
  }
  return x;
}

// Nelder-Mead on the box; candidate points are clamped to the bounds.
inline MinimizeResult nelder_mead(const Objective& objective,
                                  const Vector& lower, const Vector& upper,
                                  const Vector& start,
                                  const MinimizeOptions& opts) {
  const Eigen::Index n = start.size();
  MinimizeResult result;
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Vector> simplex;
  std::vector<double> fvals;
  simplex.push_back(start);
  fvals.push_back(eval(start));
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector v = start;
    double span = upper[i] - lower[i];
    double h = std::max(0.05 * span, 1e-4);
    v[i] = (v[i] + h <= upper[i]) ? v[i] + h : v[i] - h;
    v = clamp_to_box(v, lower, upper);
    simplex.push_back(v);
    fvals.push_back(eval(v));
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(simplex.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
    std::vector<Vector> s2;
    std::vector<double> f2;
    for (auto i : idx) {
      s2.push_back(simplex[i]);
      f2.push_back(fvals[i]);
    }
    simplex.swap(s2);
    fvals.swap(f2);
  };

  while (evals < opts.max_evaluations) {
    order();
    // simplex diameter as the convergence measure
    double diam = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      diam = std::max(diam, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
    }
    double fspread = std::abs(fvals.back() - fvals.front());
    if (diam < opts.tol && fspread < std::max(1.0, std::abs(fvals[0])) * 1e-10) {
      result.converged = true;
      break;
    }

    Vector centroid = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j + 1 < simplex.size(); ++j) centroid[i] += simplex[j][i];
      centroid[i] /= static_cast<double>(n);
    }
    const Vector& worst = simplex.back();
    Vector refl = clamp_to_box(centroid + (centroid - worst), lower, upper);
    double frefl = eval(refl);
    if (frefl < fvals[0]) {
      Vector expd = clamp_to_box(centroid + 2.0 * (centroid - worst), lower, upper);
      double fexp = eval(expd);
      if (fexp < frefl) {
        simplex.back() = expd;
        fvals.back() = fexp;
      } else {
        simplex.back() = refl;
        fvals.back() = frefl;
      }
    } else if (frefl < fvals[fvals.size() - 2]) {
      simplex.back() = refl;
      fvals.back() = frefl;
    } else {
      Vector contr = clamp_to_box(centroid + 0.5 * (worst - centroid), lower, upper);
      double fcon = eval(contr);
      if (fcon < fvals.back()) {
        simplex.back() = contr;
        fvals.back() = fcon;
      } else {
        // shrink toward the best vertex
        for (std::size_t j = 1; j < simplex.size(); ++j) {
          simplex[j] = clamp_to_box(
              simplex[0] + 0.5 * (simplex[j] - simplex[0]), lower, upper);
          fvals[j] = eval(simplex[j]);
        }
      }
    }
  }
  order();
  result.argmin = simplex[0];
  result.min = fvals[0];
  result.evaluations = evals;
  if (!std::isfinite(result.min)) {
    result.converged = false;
    result.diagnostic = "objective non-finite at best simplex vertex";
  }
  return result;
}

// Projected-gradient BFGS with backtracking line search.
inline MinimizeResult projected_bfgs(const Objective& objective,
                                     const Gradient& gradient,
                                     const Vector& lower, const Vector& upper,
                                     const Vector& start,
                                     const MinimizeOptions& opts) {
  const Eigen::Index n = start.size();
  MinimizeResult result;
  int evals = 0;

  Vector x = clamp_to_box(start, lower, upper);
  double fx = objective(x);
  ++evals;
  if (!std::isfinite(fx)) {
    result.argmin = x;
    result.min = fx;
    result.diagnostic = "objective non-finite at start";
    return result;
  }
  Vector g = gradient(x);
  Matrix Hinv = Matrix::Identity(n, n);

  auto projected_grad_norm = [&](const Vector& xx, const Vector& gg) {
    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double step = xx[i] - gg[i];
      step = std::clamp(step, lower[i], upper[i]);
      norm = std::max(norm, std::abs(xx[i] - step));
    }
    return norm;
  };

  for (int iter = 0; iter < 500 && evals < opts.max_evaluations; ++iter) {
    if (!g.allFinite()) {
      result.diagnostic = "non-finite gradient";
      break;
    }
    if (projected_grad_norm(x, g) < opts.tol) {
      result.converged = true;
      break;
    }
    Vector dir = -(Hinv * g);
    if (dir.dot(g) > 0.0) {  // not a descent direction, reset
      Hinv = Matrix::Identity(n, n);
      dir = -g;
    }
    double t = 1.0;
    Vector xnew;
    double fnew = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xnew = clamp_to_box(x + t * dir, lower, upper);
      fnew = objective(xnew);
      ++evals;
      double decrease = 1e-4 * g.dot(xnew - x);
      if (std::isfinite(fnew) && fnew <= fx + decrease) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || (x - xnew).cwiseAbs().maxCoeff() < 1e-14) {
      // line search stalled; treat the current point as the answer
      result.converged = projected_grad_norm(x, g) < std::sqrt(opts.tol);
      break;
    }
    Vector gnew = gradient(xnew);
    Vector s = xnew - x;
    Vector y = gnew - g;
    double sy = s.dot(y);
    if (sy > 1e-12) {
      Matrix I = Matrix::Identity(n, n);
      Matrix V = I - (s * y.transpose()) / sy;
      Hinv = V * Hinv * V.transpose() + (s * s.transpose()) / sy;
    }
    x = xnew;
    fx = fnew;
    g = gnew;
  }
  result.argmin = x;
  result.min = fx;
  result.evaluations = evals;
  return result;
}

}  // namespace detail

// Box-constrained minimization.  Uses quasi-Newton steps when a gradient is
// supplied and a Nelder-Mead simplex otherwise.  A non-finite objective during
// the search is reported through converged=false, never as an abort.
inline MinimizeResult minimize_bounded(const Objective& objective,
                                       const Gradient& gradient,
                                       const Vector& lower, const Vector& upper,
                                       const Vector& start,
                                       const MinimizeOptions& opts = {}) {
  if (lower.size() != upper.size() || lower.size() != start.size()) {
    throw std::invalid_argument("minimize_bounded: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      throw std::invalid_argument("minimize_bounded: lower must be < upper");
    }
  }
  try {
    if (gradient) {
      return detail::projected_bfgs(objective, gradient, lower, upper,
                                    detail::clamp_to_box(start, lower, upper),
                                    opts);
    }
    return detail::nelder_mead(objective, lower, upper,
                               detail::clamp_to_box(start, lower, upper), opts);
  } catch (const std::exception& e) {
    MinimizeResult r;
    r.argmin = start;
    r.diagnostic = e.what();
    return r;
  }
}

inline MinimizeResult minimize_bounded(const Objective& objective,
                                       const Vector& lower, const Vector& upper,
                                       const Vector& start,
                                       const MinimizeOptions& opts = {}) {
  return minimize_bounded(objective, Gradient(), lower, upper, start, opts);
}

}  // namespace spatex
