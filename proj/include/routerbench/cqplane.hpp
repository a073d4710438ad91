#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "routerbench/errors.hpp"
#include "routerbench/records.hpp"

namespace routerbench {

// A model or router as coordinates on the cost-quality plane: mean dollar
// cost on the x axis, mean quality in [0,1] on the y axis.
struct CostQualityPoint {
  double cost = 0.0;
  double quality = 0.0;
  std::string label;

  friend bool operator==(const CostQualityPoint& a, const CostQualityPoint& b) {
    return a.cost == b.cost && a.quality == b.quality && a.label == b.label;
  }
};

inline void check_point(const CostQualityPoint& p) {
  if (!std::isfinite(p.cost) || p.cost < 0.0)
    throw ConfigError("cost-quality point: cost must be finite and >= 0 (label '" + p.label + "')");
  if (!std::isfinite(p.quality) || p.quality < 0.0 || p.quality > 1.0)
    throw ConfigError("cost-quality point: quality must be in [0,1] (label '" + p.label + "')");
}

// Probability weight of a two-way mixture. t is the weight of the FIRST
// component.
class MixtureWeight {
 public:
  explicit MixtureWeight(double t) : t_(t) {
    if (!(t >= 0.0 && t <= 1.0))
      throw ConfigError("mixture weight must be in [0,1]");
  }
  double t() const { return t_; }

 private:
  double t_;
};

// Expected point of a router that picks p1 with probability t and p2
// otherwise. Exact by linearity of expectation; never simulated.
inline CostQualityPoint interpolate(const CostQualityPoint& p1, const CostQualityPoint& p2,
                                    MixtureWeight w) {
  const double t = w.t();
  return {t * p1.cost + (1.0 - t) * p2.cost, t * p1.quality + (1.0 - t) * p2.quality, ""};
}

// Mix with the null router (zero cost, zero quality) to reach a cheaper
// operating point on the segment from (0,0) to p.
inline CostQualityPoint extrapolate_down(const CostQualityPoint& p, double target_cost) {
  if (!(target_cost >= 0.0))
    throw ConfigError("extrapolate_down: target cost must be >= 0");
  if (target_cost > p.cost)
    throw ConfigError("extrapolate_down: target cost exceeds the point's cost; use extrapolate_up");
  if (target_cost == p.cost) return p;
  return {target_cost, p.quality * (target_cost / p.cost), ""};
}

// Spend more without gaining quality: flat extension to a higher cost.
inline CostQualityPoint extrapolate_up(const CostQualityPoint& p, double target_cost) {
  if (target_cost < p.cost)
    throw ConfigError("extrapolate_up: target cost below the point's cost; use extrapolate_down");
  if (target_cost == p.cost) return p;
  return {target_cost, p.quality, ""};
}

// A deterministic-or-mixed choice between two points. low/high are the
// bracketing vertices; expected point = t*low + (1-t)*high componentwise.
struct MixturePolicy {
  CostQualityPoint low;
  CostQualityPoint high;
  MixtureWeight t;

  CostQualityPoint expected_point() const { return interpolate(low, high, t); }
  bool degenerate() const { return t.t() == 1.0 && low == high; }
};

// The best quality reachable at each cost in [c_min, c_max] using mixtures
// and extrapolations of a point set. Stored as the vertices of the
// non-decreasing convex hull, clipped to the domain:
//   - costs strictly increasing, qualities nondecreasing,
//   - concave (strictly right-turning; collinear vertices are dropped),
//   - piecewise-linear in between.
class Frontier {
 public:
  static Frontier from_vertices(std::vector<CostQualityPoint> vertices) {
    Frontier f;
    f.vertices_ = std::move(vertices);
    f.validate();
    return f;
  }

  const std::vector<CostQualityPoint>& vertices() const { return vertices_; }
  double c_min() const { return vertices_.front().cost; }
  double c_max() const { return vertices_.back().cost; }
  bool degenerate_domain() const { return vertices_.size() == 1; }

  // Piecewise-linear evaluation at cost c within the domain.
  double value(double c) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(c_max()));
    if (c < c_min() - slack || c > c_max() + slack)
      throw ConfigError("frontier value: cost outside the frontier domain");
    c = std::clamp(c, c_min(), c_max());
    const std::size_t hi = upper_vertex(c);
    if (vertices_[hi].cost == c) return vertices_[hi].quality;
    const CostQualityPoint& a = vertices_[hi - 1];
    const CostQualityPoint& b = vertices_[hi];
    return a.quality + (c - a.cost) * (b.quality - a.quality) / (b.cost - a.cost);
  }

  // The two bracketing vertices and the weight whose expected cost is
  // exactly c. Degenerates to a single vertex when c sits on one.
  MixturePolicy mixture_for_cost(double c) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(c_max()));
    if (c < c_min() - slack || c > c_max() + slack)
      throw ConfigError("mixture_for_cost: cost outside the frontier domain");
    c = std::clamp(c, c_min(), c_max());
    const std::size_t hi = upper_vertex(c);
    if (vertices_[hi].cost == c)
      return {vertices_[hi], vertices_[hi], MixtureWeight(1.0)};
    const CostQualityPoint& a = vertices_[hi - 1];
    const CostQualityPoint& b = vertices_[hi];
    return {a, b, MixtureWeight((b.cost - c) / (b.cost - a.cost))};
  }

  friend bool operator==(const Frontier& a, const Frontier& b) {
    return a.vertices_ == b.vertices_;
  }

 private:
  friend Frontier ndch(std::vector<CostQualityPoint>, double, double);

  Frontier() = default;

  // Index of the first vertex with cost >= c (c inside domain).
  std::size_t upper_vertex(double c) const {
    std::size_t lo = 0, hi = vertices_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (vertices_[mid].cost < c)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo == 0 ? (vertices_.size() > 1 ? 1 : 0) : lo;
  }

  void validate() const {
    if (vertices_.empty())
      throw std::logic_error("frontier: no vertices");
    for (const auto& v : vertices_) check_point(v);
    for (std::size_t i = 1; i < vertices_.size(); ++i) {
      if (!(vertices_[i].cost > vertices_[i - 1].cost))
        throw std::logic_error("frontier: vertex costs must be strictly increasing");
      if (vertices_[i].quality < vertices_[i - 1].quality)
        throw std::logic_error("frontier: vertex qualities must be nondecreasing");
    }
    for (std::size_t i = 1; i + 1 < vertices_.size(); ++i) {
      if (cross(vertices_[i - 1], vertices_[i], vertices_[i + 1]) >= 0.0)
        throw std::logic_error("frontier: vertices must be strictly concave");
    }
  }

  static double cross(const CostQualityPoint& o, const CostQualityPoint& a,
                      const CostQualityPoint& b) {
    return (a.cost - o.cost) * (b.quality - o.quality) -
           (a.quality - o.quality) * (b.cost - o.cost);
  }

  std::vector<CostQualityPoint> vertices_;
};

namespace detail {

inline double cq_cross(const CostQualityPoint& o, const CostQualityPoint& a,
                       const CostQualityPoint& b) {
  return (a.cost - o.cost) * (b.quality - o.quality) -
         (a.quality - o.quality) * (b.cost - o.cost);
}

// Monotone-chain upper hull over points sorted by strictly increasing cost.
// Pops collinear triples too, so surviving vertices are extreme points.
inline std::vector<CostQualityPoint> upper_chain(const std::vector<CostQualityPoint>& pts) {
  std::vector<CostQualityPoint> hull;
  hull.reserve(pts.size());
  for (const auto& p : pts) {
    while (hull.size() >= 2 && cq_cross(hull[hull.size() - 2], hull.back(), p) >= 0.0)
      hull.pop_back();
    hull.push_back(p);
  }
  return hull;
}

inline double chain_value(const std::vector<CostQualityPoint>& chain, double c) {
  std::size_t hi = 1;
  while (hi < chain.size() && chain[hi].cost < c) ++hi;
  if (hi == chain.size()) return chain.back().quality;
  if (chain[hi].cost == c) return chain[hi].quality;
  if (hi == 0) return chain.front().quality;
  const auto& a = chain[hi - 1];
  const auto& b = chain[hi];
  return a.quality + (c - a.cost) * (b.quality - a.quality) / (b.cost - a.cost);
}

}  // namespace detail

// Non-decreasing convex hull of a point set, clipped to [c_min, c_max].
//
// Construction: dedupe cost ties keeping the best quality, add the null
// point (0,0) when the domain starts below the cheapest input, take the
// upper convex hull, cut everything after the apex (negative-slope
// segments are replaced by a flat extension), then clip both ends to the
// domain by interpolation/extrapolation.
inline Frontier ndch(std::vector<CostQualityPoint> points, double c_min, double c_max) {
  if (points.empty()) throw ConfigError("ndch: empty point set");
  if (!std::isfinite(c_min) || !std::isfinite(c_max))
    throw ConfigError("ndch: domain bounds must be finite");
  if (c_min < 0.0) throw ConfigError("ndch: domain must start at cost >= 0");
  if (c_max < c_min) throw ConfigError("ndch: domain upper bound below lower bound");
  for (const auto& p : points) check_point(p);

  // Cost ties: anything but the max-quality point is dominated.
  std::sort(points.begin(), points.end(), [](const CostQualityPoint& a, const CostQualityPoint& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.quality != b.quality) return a.quality > b.quality;
    return a.label < b.label;
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const CostQualityPoint& a, const CostQualityPoint& b) {
                             return a.cost == b.cost;
                           }),
               points.end());

  if (c_min < points.front().cost)
    points.insert(points.begin(), CostQualityPoint{0.0, 0.0, ""});

  std::vector<CostQualityPoint> chain = detail::upper_chain(points);

  // Keep the rising part only; the first apex covers any plateau.
  std::size_t apex = 0;
  for (std::size_t i = 1; i < chain.size(); ++i)
    if (chain[i].quality > chain[apex].quality) apex = i;
  chain.resize(apex + 1);

  // Clip to the requested domain.
  if (c_min < chain.front().cost)
    throw std::logic_error("ndch: domain start below reachable range");
  std::vector<CostQualityPoint> clipped;
  for (const auto& v : chain) {
    if (v.cost < c_min || v.cost > c_max) continue;
    clipped.push_back(v);
  }
  if (clipped.empty() || clipped.front().cost != c_min)
    clipped.insert(clipped.begin(), CostQualityPoint{c_min, detail::chain_value(chain, c_min), ""});
  if (c_max > c_min && clipped.back().cost != c_max)
    clipped.push_back(CostQualityPoint{c_max, detail::chain_value(chain, c_max), ""});

  // Clipping can leave a degenerate (collinear) triple at either end; a
  // final chain pass restores the canonical extreme-vertex form.
  std::vector<CostQualityPoint> final_chain =
      clipped.size() >= 3 ? detail::upper_chain(clipped) : clipped;

  Frontier f;
  f.vertices_ = std::move(final_chain);
  f.validate();
  return f;
}

// The Zero router baseline: the non-decreasing convex hull of the
// individual models' (mean cost, mean quality) points. Any router worth
// running has to beat this mixture-only strategy.
inline Frontier zero_router(const std::vector<ModelStats>& stats, double c_min, double c_max) {
  if (stats.empty()) throw ConfigError("zero router: no model stats");
  std::vector<CostQualityPoint> points;
  points.reserve(stats.size());
  for (const auto& s : stats) points.push_back({s.mean_cost, s.mean_quality, s.model_name});
  return ndch(std::move(points), c_min, c_max);
}

// Average height of the frontier over its domain: the exact trapezoid
// integral divided by the domain width. For a degenerate single-vertex
// domain this is the frontier value there; check degenerate_domain().
inline double aiq(const Frontier& f) {
  const auto& v = f.vertices();
  if (v.size() == 1) return v.front().quality;
  double area = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i)
    area += (v[i].cost - v[i - 1].cost) * (v[i].quality + v[i - 1].quality) * 0.5;
  return area / (f.c_max() - f.c_min());
}

}  // namespace routerbench
