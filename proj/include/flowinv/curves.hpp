#pragma once

// Sampled closed space curves, links, and the orbit-closure construction.

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowinv/vec3.hpp"

namespace flowinv::curves {

struct PolyCurve {
  std::vector<Vec3> points;
  bool closed = true;
  std::vector<double> cumulative_arclength;  // per vertex; [0] = 0

  int size() const { return static_cast<int>(points.size()); }
  int segment_count() const { return closed ? size() : size() - 1; }

  const Vec3& point(int i) const { return points[static_cast<size_t>(i % size())]; }
  Vec3 segment_start(int i) const { return points[static_cast<size_t>(i)]; }
  Vec3 segment_end(int i) const { return points[static_cast<size_t>((i + 1) % size())]; }

  double length() const {
    if (cumulative_arclength.empty()) return 0;
    double L = cumulative_arclength.back();
    if (closed && size() >= 2) L += distance(points.back(), points.front());
    return L;
  }

  Vec3 centroid() const {
    Vec3 c{};
    for (const auto& p : points) c += p;
    return c / static_cast<double>(size());
  }

  double diameter() const {
    // bounding-box diagonal: cheap and adequate for tolerances
    Vec3 lo = points.front(), hi = points.front();
    for (const auto& p : points) {
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    return (hi - lo).norm();
  }
};

inline PolyCurve make_curve(std::vector<Vec3> pts, bool closed = true) {
  PolyCurve c;
  c.points = std::move(pts);
  c.closed = closed;
  if (closed && c.size() < 3) throw std::invalid_argument("closed curve needs >= 3 points");
  if (c.size() < 2) throw std::invalid_argument("curve needs >= 2 points");
  c.cumulative_arclength.resize(c.points.size());
  c.cumulative_arclength[0] = 0;
  for (size_t i = 1; i < c.points.size(); ++i) {
    double d = distance(c.points[i], c.points[i - 1]);
    if (d == 0.0) throw std::invalid_argument("consecutive points must be distinct");
    c.cumulative_arclength[i] = c.cumulative_arclength[i - 1] + d;
  }
  return c;
}

/// Samples a parametric closed curve on [0, 2*pi).
inline PolyCurve sample_closed(const std::function<Vec3(double)>& f, int n,
                               double period = 6.283185307179586476925287) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pts.push_back(f(period * i / n));
  return make_curve(std::move(pts), true);
}

inline PolyCurve make_circle(double radius = 1.0, const Vec3& center = {}, int n = 256) {
  return sample_closed(
      [&](double t) {
        return center + Vec3{radius * std::cos(t), radius * std::sin(t), 0.0};
      },
      n);
}

inline PolyCurve make_trefoil(int n = 512) {
  return sample_closed(
      [](double t) {
        return Vec3{std::sin(t) + 2 * std::sin(2 * t), std::cos(t) - 2 * std::cos(2 * t),
                    -std::sin(3 * t)};
      },
      n);
}

inline PolyCurve make_figure_eight(int n = 512) {
  return sample_closed(
      [](double t) {
        return Vec3{(2 + std::cos(2 * t)) * std::cos(3 * t),
                    (2 + std::cos(2 * t)) * std::sin(3 * t), std::sin(4 * t)};
      },
      n);
}

/// (p,q) torus knot/link component on the torus (major 2, minor 1), with a
/// phase offset for multi-component torus links.
inline PolyCurve make_torus_knot(int p, int q, int n = 512, double phase = 0.0) {
  return sample_closed(
      [&](double t) {
        double u = p * t, v = q * t + phase;
        return Vec3{(2 + std::cos(v)) * std::cos(u), (2 + std::cos(v)) * std::sin(u),
                    std::sin(v)};
      },
      n);
}

/// Connected sum of two trefoils (granny knot), concatenated parametrization:
/// two open trefoil arcs joined by clearance bridges, one routed above both
/// summands and one below, so the result is embedded.
inline PolyCurve make_granny(int n_per_summand = 400) {
  std::vector<Vec3> pts;
  double lo = 0.08, hi = 6.283185307179586 - 0.08;
  Vec3 shift{9.0, 0.0, 0.0};
  auto tref = [](double t) {
    return Vec3{std::sin(t) + 2 * std::sin(2 * t), std::cos(t) - 2 * std::cos(2 * t),
                -std::sin(3 * t)};
  };
  for (int i = 0; i < n_per_summand; ++i)
    pts.push_back(tref(lo + (hi - lo) * i / (n_per_summand - 1)));
  Vec3 a_end = pts.back(), a_start = pts.front();
  Vec3 b_start = tref(lo) + shift;
  // both bridges run over the top as a flat parallel band (no clasp)
  pts.push_back(a_end + Vec3{0, -0.2, 2.26});
  pts.push_back(b_start + Vec3{0, -0.2, 2.74});
  for (int i = 0; i < n_per_summand; ++i)
    pts.push_back(tref(lo + (hi - lo) * i / (n_per_summand - 1)) + shift);
  Vec3 b_end = pts.back();
  pts.push_back(b_end + Vec3{0, 0.2, 2.66});
  pts.push_back(a_start + Vec3{0, 0.2, 3.14});
  return make_curve(std::move(pts), true);
}

struct Link {
  std::vector<PolyCurve> components;
};

/// Minimum vertex-to-vertex distance between two curves.
inline double min_distance(const PolyCurve& a, const PolyCurve& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a.points)
    for (const auto& q : b.points) best = std::min(best, (p - q).norm2());
  return std::sqrt(best);
}

/// Components must be pairwise disjoint beyond eps_sep = 1e-9 * diameter:
/// Gauss integrands blow up on the diagonal, so touching inputs are rejected.
inline Link make_link(std::vector<PolyCurve> comps) {
  Link l;
  l.components = std::move(comps);
  double diam = 0;
  for (const auto& c : l.components) diam = std::max(diam, c.diameter());
  double eps = 1e-9 * diam;
  for (size_t i = 0; i < l.components.size(); ++i)
    for (size_t j = i + 1; j < l.components.size(); ++j)
      if (min_distance(l.components[i], l.components[j]) <= eps)
        throw std::invalid_argument("link components intersect within eps_sep");
  return l;
}

// ---------------------------------------------------------------------------
// Operations

/// Arclength-uniform resampling to m points, anchored at the first point.
inline PolyCurve resample(const PolyCurve& c, int m) {
  if (m < 3) throw std::invalid_argument("resample: need m >= 3");
  double L = c.length();
  if (L <= 0) throw std::invalid_argument("resample: degenerate curve");
  int nseg = c.segment_count();
  std::vector<double> cum(static_cast<size_t>(nseg) + 1);
  cum[0] = 0;
  for (int i = 0; i < nseg; ++i)
    cum[static_cast<size_t>(i) + 1] =
        cum[static_cast<size_t>(i)] + distance(c.segment_start(i), c.segment_end(i));
  std::vector<Vec3> pts;
  pts.reserve(static_cast<size_t>(m));
  double denom = c.closed ? m : m - 1;
  int seg = 0;
  for (int i = 0; i < m; ++i) {
    double s = L * i / denom;
    while (seg + 1 < nseg && cum[static_cast<size_t>(seg) + 1] < s) ++seg;
    double seg_len = cum[static_cast<size_t>(seg) + 1] - cum[static_cast<size_t>(seg)];
    double t = seg_len > 0 ? (s - cum[static_cast<size_t>(seg)]) / seg_len : 0.0;
    Vec3 a = c.segment_start(seg), b = c.segment_end(seg);
    pts.push_back(a + (b - a) * t);
  }
  return make_curve(std::move(pts), c.closed);
}

/// Unit direction of segment i.
inline Vec3 tangent(const PolyCurve& c, int i) {
  if (i < 0 || i >= c.segment_count()) throw std::out_of_range("tangent: bad segment index");
  return (c.segment_end(i) - c.segment_start(i)).normalized();
}

/// Central-difference unit tangent at vertex i, for smooth curves.
inline Vec3 tangent_central(const PolyCurve& c, int i) {
  int n = c.size();
  if (i < 0 || i >= n) throw std::out_of_range("tangent_central: bad vertex index");
  const Vec3& prev = c.points[static_cast<size_t>((i + n - 1) % n)];
  const Vec3& next = c.points[static_cast<size_t>((i + 1) % n)];
  return (next - prev).normalized();
}

// ---------------------------------------------------------------------------
// Short paths and orbit closure

/// Uniformly bounded arcs closing an orbit segment into a knot. The default
/// straight rule is the Euclidean geodesic; the dogleg rule bends through a
/// waypoint offset from the chord midpoint, for short-path sensitivity runs.
struct ShortPathSystem {
  enum class Rule { straight, dogleg };
  Rule rule = Rule::straight;
  double dogleg_offset = 0.25;  // waypoint offset as a fraction of chord scale

  static ShortPathSystem straight() { return {}; }
  static ShortPathSystem dogleg(double offset = 0.25) {
    ShortPathSystem s;
    s.rule = Rule::dogleg;
    s.dogleg_offset = offset;
    return s;
  }

  /// Arc from a to b (exclusive of both endpoints), subdivided to step h.
  std::vector<Vec3> arc(const Vec3& a, const Vec3& b, double h) const {
    std::vector<Vec3> out;
    auto subdivide = [&](const Vec3& p, const Vec3& q, bool include_q) {
      double d = (q - p).norm();
      int n = std::max(1, static_cast<int>(std::ceil(d / h)));
      for (int i = 1; i < n; ++i) out.push_back(p + (q - p) * (double(i) / n));
      if (include_q) out.push_back(q);
    };
    if (rule == Rule::straight) {
      subdivide(a, b, false);
    } else {
      Vec3 chord = b - a;
      double d = chord.norm();
      Vec3 ref = std::abs(chord.z) < 0.9 * d ? Vec3{0, 0, 1} : Vec3{0, 1, 0};
      Vec3 perp = d > 0 ? cross(chord, ref).normalized() : Vec3{1, 0, 0};
      Vec3 mid = (a + b) * 0.5 + perp * (dogleg_offset * std::max(d, h));
      subdivide(a, mid, true);
      subdivide(mid, b, false);
    }
    return out;
  }
};

/// Time-T orbit segment closed into a knot by a short arc.
struct OrbitKnot {
  Vec3 seed;
  double T = 0;
  double dt = 0;
  PolyCurve orbit_points;  // open
  std::vector<Vec3> closure;
  PolyCurve closed_curve;
  double closure_length = 0;
};

/// Closes an open orbit with the short-path rule; the arc is subdivided to
/// match the orbit's local sample density.
inline OrbitKnot close_orbit(const PolyCurve& orbit, const ShortPathSystem& sp,
                             Vec3 seed = {}, double T = 0, double dt = 0) {
  if (orbit.size() < 2) throw std::invalid_argument("close_orbit: orbit needs >= 2 points");
  OrbitKnot k;
  k.seed = seed;
  k.T = T;
  k.dt = dt;
  k.orbit_points = orbit;
  const Vec3& last = orbit.points.back();
  const Vec3& first = orbit.points.front();
  double local_h = orbit.length() / std::max(1, orbit.segment_count());
  double gap = (first - last).norm();
  if (gap > 0) {
    k.closure = sp.arc(last, first, std::max(local_h, 1e-12));
    k.closure_length = 0;
    Vec3 prev = last;
    for (const auto& p : k.closure) {
      k.closure_length += (p - prev).norm();
      prev = p;
    }
    k.closure_length += (first - prev).norm();
  }
  std::vector<Vec3> all = orbit.points;
  all.insert(all.end(), k.closure.begin(), k.closure.end());
  k.closed_curve = make_curve(std::move(all), true);
  return k;
}

// ---------------------------------------------------------------------------
// Knot file format: one `x y z` per line, blank line between link components.

inline void write_knot_file(std::ostream& os, const Link& link) {
  os.precision(17);
  bool first = true;
  for (const auto& c : link.components) {
    if (!first) os << "\n";
    first = false;
    for (const auto& p : c.points) os << p.x << " " << p.y << " " << p.z << "\n";
  }
}

inline void write_knot_file(const std::string& path, const Link& link) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write knot file: " + path);
  write_knot_file(os, link);
}

inline Link read_knot_file(std::istream& is) {
  std::vector<PolyCurve> comps;
  std::vector<Vec3> cur;
  std::string line;
  int lineno = 0;
  auto flush = [&] {
    if (!cur.empty()) {
      comps.push_back(make_curve(cur, true));
      cur.clear();
    }
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x)) {
      flush();
      continue;
    }
    if (!(ls >> p.y >> p.z))
      throw std::runtime_error("knot file line " + std::to_string(lineno) +
                               ": expected three coordinates");
    cur.push_back(p);
  }
  flush();
  if (comps.empty()) throw std::runtime_error("knot file contains no points");
  return make_link(std::move(comps));
}

inline Link read_knot_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read knot file: " + path);
  return read_knot_file(is);
}

}  // namespace flowinv::curves
