#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "fqmps/core/errors.hpp"

namespace fqmps::app {

/// One particle number of an equation-of-state scan.
///
/// With the grand-canonical energy E(N) + mu*N, N is the ground state for
/// mu in [mu_low, mu_high]. Points above the lower convex hull never are and
/// carry an empty interval (mu_low > mu_high, both NaN).
struct EosRow {
  int N = 0;
  double energy = 0.0;
  bool on_hull = false;
  bool vertex = false;
  double mu_low = std::numeric_limits<double>::quiet_NaN();
  double mu_high = std::numeric_limits<double>::quiet_NaN();
  /// E(N+1) + E(N-1) - 2E(N) when both neighbours exist.
  std::optional<double> charge_gap;
};

struct EosTable {
  int L = 0;
  std::vector<EosRow> rows;  // ascending N

  /// Filling N*/L of the minimizer of E + mu*N; non-increasing in mu.
  double density(double mu) const {
    for (const auto& r : rows) {
      if (r.vertex && mu >= r.mu_low && mu <= r.mu_high) return double(r.N) / L;
    }
    throw DomainError("EosTable::density: mu outside the table");
  }

  /// Hull breakpoints in increasing mu, each with the filling just below and above it.
  struct Step {
    double mu;
    double rho_below, rho_above;
  };
  std::vector<Step> steps() const {
    std::vector<Step> out;
    std::vector<const EosRow*> v;
    for (const auto& r : rows)
      if (r.vertex) v.push_back(&r);
    // Vertices in descending N have increasing mu intervals.
    for (std::size_t i = v.size(); i-- > 1;) {
      out.push_back({v[i]->mu_high, double(v[i]->N) / L, double(v[i - 1]->N) / L});
    }
    return out;
  }
};

/// Lower convex hull of {(N, E(N))} and the mu intervals of its vertices.
inline EosTable eos_maxwell(const std::map<int, double>& energies, int L, double rel_tol = 1e-12) {
  if (energies.size() < 2) throw DomainError("eos_maxwell: need at least two particle numbers");
  if (L < 1) throw DomainError("eos_maxwell: L must be >= 1");
  int prev = energies.begin()->first - 1;
  double scale = 0.0;
  for (const auto& [n, e] : energies) {
    if (n != prev + 1) throw DomainError("eos_maxwell: particle numbers must be contiguous");
    if (!std::isfinite(e)) throw DomainError("eos_maxwell: energies must be finite");
    prev = n;
    scale = std::max(scale, std::abs(e));
  }
  const double tol = rel_tol * std::max(scale, 1.0);
  std::vector<std::pair<int, double>> pts(energies.begin(), energies.end());
  // Monotone chain, keeping only strict vertices.
  std::vector<std::size_t> hull;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    return double(pts[a].first - pts[o].first) * (pts[b].second - pts[o].second) -
           (pts[a].second - pts[o].second) * double(pts[b].first - pts[o].first);
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= tol) hull.pop_back();
    hull.push_back(i);
  }
  EosTable t;
  t.L = L;
  t.rows.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.rows[i].N = pts[i].first;
    t.rows[i].energy = pts[i].second;
    if (i > 0 && i + 1 < pts.size()) {
      t.rows[i].charge_gap = pts[i + 1].second + pts[i - 1].second - 2.0 * pts[i].second;
    }
  }
  auto slope = [&](std::size_t a, std::size_t b) {
    return (pts[b].second - pts[a].second) / double(pts[b].first - pts[a].first);
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < hull.size(); ++k) {
    auto& r = t.rows[hull[k]];
    r.vertex = r.on_hull = true;
    r.mu_high = k == 0 ? inf : -slope(hull[k - 1], hull[k]);
    r.mu_low = k + 1 == hull.size() ? -inf : -slope(hull[k], hull[k + 1]);
  }
  // Points between vertices: on the hull if collinear, then optimal only at the segment's mu.
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const double s = slope(hull[k], hull[k + 1]);
    for (std::size_t i = hull[k] + 1; i < hull[k + 1]; ++i) {
      const double line = pts[hull[k]].second + s * double(pts[i].first - pts[hull[k]].first);
      if (pts[i].second - line <= tol) {
        t.rows[i].on_hull = true;
        t.rows[i].mu_low = t.rows[i].mu_high = -s;
      }
    }
  }
  return t;
}

}  // namespace fqmps::app
