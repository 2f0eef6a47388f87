#pragma once

// Trivalent diagrams and weight systems. A diagram of degree n is a connected
// graph on an oriented circle with k circle vertices (one incident edge each)
// and s free vertices (three each), k + s = 2n. Diagrams are stored in a
// canonical labeling; weight systems store values on chord diagrams and
// evaluate everything else through iterated STU expansion.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowinv::diagrams {

using Edge = std::pair<int, int>;  // (i, j) with i < j; oriented low -> high

struct RawDiagram {
  int degree = 0;
  std::vector<int> circle;      // labels in cyclic order
  std::vector<int> free_verts;  // labels
  std::vector<Edge> edges;
};

namespace detail {
struct Factory;
}

class TrivalentDiagram {
 public:
  TrivalentDiagram() = default;

  int degree() const { return degree_; }
  int circle_count() const { return k_; }
  int free_count() const { return 2 * degree_ - k_; }
  bool is_chord_diagram() const { return free_count() == 0; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Canonical labels: circle vertices are 1..k in cyclic order, free vertices
  // are k+1..2n.
  bool is_circle_vertex(int v) const { return v >= 1 && v <= k_; }

  std::string encode() const {
    std::ostringstream os;
    os << degree_ << ";" << k_ << ";";
    for (const auto& [a, b] : edges_) os << "(" << a << "," << b << ")";
    return os.str();
  }

  friend bool operator<(const TrivalentDiagram& x, const TrivalentDiagram& y) {
    if (x.degree_ != y.degree_) return x.degree_ < y.degree_;
    if (x.k_ != y.k_) return x.k_ < y.k_;
    return x.edges_ < y.edges_;
  }
  friend bool operator==(const TrivalentDiagram& x, const TrivalentDiagram& y) {
    return x.degree_ == y.degree_ && x.k_ == y.k_ && x.edges_ == y.edges_;
  }

 private:
  friend struct detail::Factory;
  int degree_ = 0, k_ = 0;
  std::vector<Edge> edges_;
};

struct ValidationResult {
  std::optional<TrivalentDiagram> diagram;
  std::vector<std::string> errors;
  bool ok() const { return diagram.has_value(); }
};

/// Linear combination of same-degree diagrams; zero coefficients are pruned.
class DiagramSum {
 public:
  DiagramSum() = default;
  explicit DiagramSum(const TrivalentDiagram& d, double c = 1.0) { add(d, c); }

  void add(const TrivalentDiagram& d, double c) {
    if (c == 0.0) return;
    if (!terms_.empty() && terms_.begin()->first.degree() != d.degree())
      throw std::invalid_argument("DiagramSum: mixed degrees");
    double& v = terms_[d];
    v += c;
    if (v == 0.0) terms_.erase(d);
  }
  void add(const DiagramSum& o, double scale = 1.0) {
    for (const auto& [d, c] : o.terms_) add(d, c * scale);
  }
  const std::map<TrivalentDiagram, double>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  int degree() const { return terms_.empty() ? 0 : terms_.begin()->first.degree(); }

 private:
  std::map<TrivalentDiagram, double> terms_;
};

// ---------------------------------------------------------------------------
// Internals: working diagrams with explicit vertex orientations.
//
// STU needs more than the bare graph: expanding the stem edge of a free
// vertex produces T and U, and which resolution is which depends on the
// cyclic order of edges at that vertex. We assign a convention orientation
// (neighbors in ascending canonical label order) on entry, carry cyclic
// orders through expansions, and track the +-1 a relabeling costs (the AS
// relation). Classes equal to minus themselves canonicalize to sign 0.

namespace detail {

struct WorkDiagram {
  int degree = 0;
  std::vector<int> circle;                   // ids in cyclic order
  std::vector<int> free_ids;                 // sorted ids
  std::vector<Edge> edges;                   // normalized, sorted
  std::map<int, std::array<int, 3>> orient;  // free id -> neighbors, cyclic
};

inline Edge mk_edge(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// +1 if some rotation of the triple is strictly increasing, else -1.
inline int cyclic_parity(int a, int b, int c) {
  if ((a < b && b < c) || (b < c && c < a) || (c < a && a < b)) return 1;
  return -1;
}

struct Factory {
  static TrivalentDiagram make(int degree, int k, std::vector<Edge> edges) {
    TrivalentDiagram d;
    d.degree_ = degree;
    d.k_ = k;
    d.edges_ = std::move(edges);
    return d;
  }
};

struct CanonicalResult {
  TrivalentDiagram diagram;
  double sign = 1.0;
};

inline CanonicalResult canonicalize(const WorkDiagram& w) {
  int k = static_cast<int>(w.circle.size());
  int s = static_cast<int>(w.free_ids.size());
  std::vector<Edge> best;
  std::vector<int> best_parities;
  bool have = false;

  std::vector<int> pidx(s);
  for (int i = 0; i < s; ++i) pidx[i] = i;

  do {
    for (int r = 0; r < std::max(k, 1); ++r) {
      std::map<int, int> relabel;
      for (int i = 0; i < k; ++i) relabel[w.circle[(r + i) % k]] = i + 1;
      for (int j = 0; j < s; ++j) relabel[w.free_ids[pidx[j]]] = k + 1 + j;
      std::vector<Edge> enc;
      enc.reserve(w.edges.size());
      for (const auto& [a, b] : w.edges) enc.push_back(mk_edge(relabel[a], relabel[b]));
      std::sort(enc.begin(), enc.end());
      if (have && best < enc) continue;
      int parity = 1;
      for (int f : w.free_ids) {
        const auto& tr = w.orient.at(f);
        parity *= cyclic_parity(relabel[tr[0]], relabel[tr[1]], relabel[tr[2]]);
      }
      if (!have || enc < best) {
        best = std::move(enc);
        best_parities.assign(1, parity);
        have = true;
      } else {
        best_parities.push_back(parity);
      }
    }
  } while (std::next_permutation(pidx.begin(), pidx.end()));

  CanonicalResult res;
  bool mixed = false;
  for (int p : best_parities)
    if (p != best_parities.front()) mixed = true;
  res.sign = mixed ? 0.0 : static_cast<double>(best_parities.front());
  res.diagram = Factory::make(w.degree, k, std::move(best));
  return res;
}

inline WorkDiagram to_work(const TrivalentDiagram& d) {
  WorkDiagram w;
  w.degree = d.degree();
  int k = d.circle_count(), n2 = 2 * d.degree();
  for (int i = 1; i <= k; ++i) w.circle.push_back(i);
  for (int i = k + 1; i <= n2; ++i) w.free_ids.push_back(i);
  w.edges = d.edges();
  for (int f : w.free_ids) {
    std::array<int, 3> nb{};
    int cnt = 0;
    for (const auto& [a, b] : w.edges) {
      if (a == f && cnt < 3) nb[cnt++] = b;
      else if (b == f && cnt < 3) nb[cnt++] = a;
    }
    std::sort(nb.begin(), nb.end());  // convention orientation
    w.orient[f] = nb;
  }
  return w;
}

struct ExpandResult {
  WorkDiagram t, u;  // S = T - U with inherited orientations
};

// Expand the STU stem (p, u_vert): p circle, u_vert free. The free vertex and
// p disappear; two adjacent circle vertices take p's place, and the two arms
// of u_vert attach to them in the order given by u_vert's orientation (T) or
// swapped (U).
inline ExpandResult expand_stu(const WorkDiagram& w, int p, int u_vert) {
  std::array<int, 3> tri = w.orient.at(u_vert);
  while (tri[0] != p) std::rotate(tri.begin(), tri.begin() + 1, tri.end());
  int arm_a = tri[1], arm_b = tri[2];

  int max_id = 0;
  for (int v : w.circle) max_id = std::max(max_id, v);
  for (int v : w.free_ids) max_id = std::max(max_id, v);
  int na = max_id + 1, nb = max_id + 2;

  WorkDiagram base;
  base.degree = w.degree;
  for (int v : w.circle) {
    if (v == p) {
      base.circle.push_back(na);
      base.circle.push_back(nb);
    } else {
      base.circle.push_back(v);
    }
  }
  for (int v : w.free_ids)
    if (v != u_vert) base.free_ids.push_back(v);
  for (const auto& e : w.edges)
    if (e.first != u_vert && e.second != u_vert) base.edges.push_back(e);
  for (const auto& [f, tr] : w.orient)
    if (f != u_vert) base.orient[f] = tr;

  auto attach = [&](int c_for_a, int c_for_b) {
    WorkDiagram d = base;
    d.edges.push_back(mk_edge(arm_a, c_for_a));
    d.edges.push_back(mk_edge(arm_b, c_for_b));
    std::sort(d.edges.begin(), d.edges.end());
    if (d.orient.count(arm_a))
      for (int& x : d.orient[arm_a])
        if (x == u_vert) x = c_for_a;
    if (d.orient.count(arm_b))
      for (int& x : d.orient[arm_b])
        if (x == u_vert) x = c_for_b;
    return d;
  };

  return {attach(na, nb), attach(nb, na)};
}

// First edge joining the circle to a free vertex, in sorted edge order.
inline std::optional<Edge> first_stem(const WorkDiagram& w) {
  auto on_circle = [&](int v) {
    return std::find(w.circle.begin(), w.circle.end(), v) != w.circle.end();
  };
  for (const auto& e : w.edges) {
    bool a_c = on_circle(e.first), b_c = on_circle(e.second);
    if (a_c != b_c) return e;
  }
  return std::nullopt;
}

using ChordMap = std::map<TrivalentDiagram, double>;

inline ChordMap& chord_cache() {
  static ChordMap dummy;
  return dummy;
}

// Reduce a working diagram to chord diagrams through STU; memoized per
// canonical class (cache stores the reduction of the convention orientation).
inline ChordMap reduce_to_chords(const WorkDiagram& w,
                                 std::map<TrivalentDiagram, ChordMap>& cache) {
  auto [canon, sign] = canonicalize(w);
  ChordMap out;
  if (sign == 0.0) return out;
  auto it = cache.find(canon);
  if (it == cache.end()) {
    ChordMap base;
    if (canon.is_chord_diagram()) {
      base[canon] = 1.0;
    } else {
      WorkDiagram wc = to_work(canon);
      auto stem = first_stem(wc);
      if (!stem) throw std::logic_error("free vertices but no stem edge");
      int p = wc.orient.count(stem->first) ? stem->second : stem->first;
      int u = wc.orient.count(stem->first) ? stem->first : stem->second;
      ExpandResult ex = expand_stu(wc, p, u);
      for (const auto& [d, c] : reduce_to_chords(ex.t, cache)) base[d] += c;
      for (const auto& [d, c] : reduce_to_chords(ex.u, cache)) base[d] -= c;
      for (auto i = base.begin(); i != base.end();)
        i = (i->second == 0.0) ? base.erase(i) : std::next(i);
    }
    it = cache.emplace(canon, std::move(base)).first;
  }
  for (const auto& [d, c] : it->second) out[d] = sign * c;
  return out;
}

inline std::map<TrivalentDiagram, ChordMap>& global_reduce_cache() {
  static std::map<TrivalentDiagram, ChordMap> cache;
  return cache;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations

/// Checks every structural invariant; returns the canonical diagram or the
/// complete list of violations.
inline ValidationResult validate(const RawDiagram& raw) {
  ValidationResult res;
  auto fail = [&](const std::string& m) { res.errors.push_back(m); };

  int k = static_cast<int>(raw.circle.size());
  int s = static_cast<int>(raw.free_verts.size());
  int n = raw.degree;
  if (n < 1) fail("wrong vertex count: degree must be a positive integer");
  if (k + s != 2 * n)
    fail("wrong vertex count: k + s = " + std::to_string(k + s) + ", expected " +
         std::to_string(2 * n));

  std::map<int, int> valence;
  bool labels_ok = true;
  {
    std::vector<int> all = raw.circle;
    all.insert(all.end(), raw.free_verts.begin(), raw.free_verts.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < static_cast<int>(all.size()); ++i) {
      if (i > 0 && all[i] == all[i - 1]) {
        fail("wrong vertex count: duplicate label " + std::to_string(all[i]));
        labels_ok = false;
      }
    }
    if (k + s == 2 * n) {
      for (int i = 0; i < static_cast<int>(all.size()); ++i)
        if (all[i] != i + 1) {
          fail("wrong vertex count: labels must be exactly {1..2n}");
          labels_ok = false;
          break;
        }
    }
    for (int v : all) valence[v] = 0;
  }

  std::vector<Edge> edges;
  for (const auto& [a, b] : raw.edges) {
    if (a == b) {
      fail("non-trivalent vertex: self-loop at " + std::to_string(a));
      continue;
    }
    if (!valence.count(a) || !valence.count(b)) {
      fail("edge-count mismatch: edge (" + std::to_string(a) + "," + std::to_string(b) +
           ") uses unknown label");
      continue;
    }
    Edge e = detail::mk_edge(a, b);
    if (std::find(edges.begin(), edges.end(), e) != edges.end()) {
      fail("edge-count mismatch: repeated edge (" + std::to_string(e.first) + "," +
           std::to_string(e.second) + ")");
      continue;
    }
    edges.push_back(e);
    valence[a]++;
    valence[b]++;
  }

  if (labels_ok && res.errors.empty()) {
    for (int v : raw.circle)
      if (valence[v] != 1)
        fail("non-trivalent vertex: circle vertex " + std::to_string(v) + " has " +
             std::to_string(valence[v]) + " edges (needs 1)");
    for (int v : raw.free_verts)
      if (valence[v] != 3)
        fail("non-trivalent vertex: free vertex " + std::to_string(v) + " has " +
             std::to_string(valence[v]) + " edges (needs 3)");
    int expected = (k + 3 * s) / 2;
    if (static_cast<int>(edges.size()) != expected)
      fail("edge-count mismatch: " + std::to_string(edges.size()) + " edges, expected " +
           std::to_string(expected));
  }

  if (res.errors.empty()) {
    // connectivity, counting the circle arcs as edges
    std::map<int, std::vector<int>> adj;
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    for (int i = 0; i < k; ++i) {
      int a = raw.circle[i], b = raw.circle[(i + 1) % k];
      if (k > 1) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    }
    std::vector<int> stack{raw.circle.empty() ? raw.free_verts.front() : raw.circle.front()};
    std::map<int, bool> seen;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      if (seen[v]) continue;
      seen[v] = true;
      for (int w : adj[v]) stack.push_back(w);
    }
    if (static_cast<int>(seen.size()) != 2 * n) fail("disconnected graph");
    if (raw.circle.empty()) fail("disconnected graph: no circle vertices");
  }

  if (!res.errors.empty()) return res;

  detail::WorkDiagram w;
  w.degree = n;
  w.circle = raw.circle;
  w.free_ids = raw.free_verts;
  std::sort(w.free_ids.begin(), w.free_ids.end());
  w.edges = edges;
  std::sort(w.edges.begin(), w.edges.end());
  for (int f : w.free_ids) {
    std::array<int, 3> nb{};
    int cnt = 0;
    for (const auto& [a, b] : w.edges) {
      if (a == f) nb[cnt++] = b;
      else if (b == f) nb[cnt++] = a;
    }
    std::sort(nb.begin(), nb.end());
    w.orient[f] = nb;
  }
  res.diagram = detail::canonicalize(w).diagram;
  return res;
}

inline int degree(const TrivalentDiagram& d) { return d.degree(); }

/// S = T - U at the given stem edge. Coefficients carry the relabeling signs,
/// so iterated expansion is well defined modulo STU.
inline DiagramSum stu_expand(const TrivalentDiagram& d, const Edge& e) {
  if (d.free_count() == 0) throw std::invalid_argument("stu_expand: no free vertex");
  const auto& edges = d.edges();
  if (std::find(edges.begin(), edges.end(), e) == edges.end())
    throw std::invalid_argument("stu_expand: edge not in diagram");
  bool a_circ = d.is_circle_vertex(e.first), b_circ = d.is_circle_vertex(e.second);
  if (a_circ == b_circ)
    throw std::invalid_argument("stu_expand: edge not in S-configuration");
  int p = a_circ ? e.first : e.second;
  int u = a_circ ? e.second : e.first;

  detail::WorkDiagram w = detail::to_work(d);
  detail::ExpandResult ex = detail::expand_stu(w, p, u);
  auto [dt, st] = detail::canonicalize(ex.t);
  auto [du, su] = detail::canonicalize(ex.u);
  DiagramSum out;
  out.add(dt, st);
  out.add(du, -su);
  return out;
}

/// True iff the diagram is a connected sum: the circle can be cut into two
/// arcs, and the free vertices split, with no edge crossing the cut.
inline bool is_reducible(const TrivalentDiagram& d) {
  int k = d.circle_count(), n2 = 2 * d.degree();
  if (k < 2) return false;
  // components of the free-free subgraph, and their circle attachments
  std::vector<int> comp(n2 + 1, -1);
  int nc = 0;
  for (int f = k + 1; f <= n2; ++f) {
    if (comp[f] != -1) continue;
    std::vector<int> stack{f};
    comp[f] = nc;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (const auto& [a, b] : d.edges()) {
        int o = (a == v) ? b : (b == v ? a : 0);
        if (o > k && comp[o] == -1) {
          comp[o] = nc;
          stack.push_back(o);
        }
      }
    }
    ++nc;
  }
  // arc split: positions i..j-1 vs the rest (cuts in gaps before i and j)
  for (int i = 1; i <= k; ++i) {
    for (int j = i + 1; j <= k; ++j) {
      auto side = [&](int circle_v) { return circle_v >= i && circle_v < j; };
      bool ok = true;
      // chords must not cross the cut
      for (const auto& [a, b] : d.edges()) {
        if (a <= k && b <= k && side(a) != side(b)) { ok = false; break; }
      }
      if (!ok) continue;
      // each free component must attach to circle vertices on one side only
      std::vector<int> comp_side(nc, -1);
      for (const auto& [a, b] : d.edges()) {
        int cv = 0, fv = 0;
        if (a <= k && b > k) { cv = a; fv = b; }
        else if (b <= k && a > k) { cv = b; fv = a; }
        else continue;
        int cs = side(cv) ? 1 : 0;
        int& slot = comp_side[comp[fv]];
        if (slot == -1) slot = cs;
        else if (slot != cs) { ok = false; break; }
      }
      if (!ok) continue;
      // both arcs are nonempty by construction (i..j-1 and the complement)
      if (j - i >= 1 && k - (j - i) >= 1) return true;
    }
  }
  return false;
}

/// All isomorphism classes of degree n diagrams (n <= 3), canonical form.
inline std::vector<TrivalentDiagram> enumerate_diagrams(int n) {
  if (n < 1 || n > 3)
    throw std::invalid_argument("enumerate_diagrams: degree must be 1, 2, or 3");
  std::vector<TrivalentDiagram> out;
  std::vector<TrivalentDiagram> seen_sorted;
  int n2 = 2 * n;
  std::vector<Edge> all_pairs;
  for (int i = 1; i <= n2; ++i)
    for (int j = i + 1; j <= n2; ++j) all_pairs.push_back({i, j});

  for (int k = 1; k <= n2; ++k) {
    int s = n2 - k;
    int m = (k + 3 * s) / 2;
    if ((k + 3 * s) % 2 != 0 || m > static_cast<int>(all_pairs.size())) continue;
    std::vector<int> idx(m);
    // enumerate m-subsets with early valence pruning
    std::vector<Edge> chosen;
    std::vector<int> val(n2 + 1, 0);
    auto target = [&](int v) { return v <= k ? 1 : 3; };
    std::function<void(int, int)> rec = [&](int start, int left) {
      if (left == 0) {
        RawDiagram raw;
        raw.degree = n;
        for (int i = 1; i <= k; ++i) raw.circle.push_back(i);
        for (int i = k + 1; i <= n2; ++i) raw.free_verts.push_back(i);
        raw.edges = chosen;
        ValidationResult v2 = validate(raw);
        if (v2.ok()) {
          const TrivalentDiagram& c = *v2.diagram;
          auto it = std::lower_bound(seen_sorted.begin(), seen_sorted.end(), c);
          if (it == seen_sorted.end() || !(*it == c)) {
            seen_sorted.insert(it, c);
            out.push_back(c);
          }
        }
        return;
      }
      for (int i = start; i <= static_cast<int>(all_pairs.size()) - left; ++i) {
        const Edge& e = all_pairs[i];
        if (val[e.first] >= target(e.first) || val[e.second] >= target(e.second)) continue;
        val[e.first]++;
        val[e.second]++;
        chosen.push_back(e);
        rec(i + 1, left - 1);
        chosen.pop_back();
        val[e.first]--;
        val[e.second]--;
      }
    };
    rec(0, m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Weight systems

/// Linear functional on diagrams modulo STU; values are stored on chord
/// diagrams (where no orientation data exists) and everything else is
/// evaluated by expansion.
class WeightSystem {
 public:
  int degree() const { return degree_; }
  bool primitive() const { return primitive_; }
  const std::map<TrivalentDiagram, double>& chord_values() const { return values_; }

  double eval(const TrivalentDiagram& d) const {
    if (d.degree() != degree_)
      throw std::invalid_argument("eval_weight: degree mismatch");
    if (d.is_chord_diagram()) {
      auto it = values_.find(d);
      return it == values_.end() ? 0.0 : it->second;
    }
    detail::ChordMap red =
        detail::reduce_to_chords(detail::to_work(d), detail::global_reduce_cache());
    double v = 0;
    for (const auto& [cd, c] : red) {
      auto it = values_.find(cd);
      if (it != values_.end()) v += c * it->second;
    }
    return v;
  }

  double eval(const DiagramSum& x) const {
    double v = 0;
    for (const auto& [d, c] : x.terms()) v += c * eval(d);
    return v;
  }

  /// Weight system from chord-diagram values; rejects values that violate the
  /// four-term relation (generated here from STU on one-free-vertex diagrams).
  static WeightSystem from_chord_values(int n, std::map<TrivalentDiagram, double> values,
                                        double tol = 1e-9) {
    WeightSystem w;
    w.degree_ = n;
    w.values_ = std::move(values);
    for (const DiagramSum& rel : four_term_relations(n)) {
      double v = 0;
      for (const auto& [d, c] : rel.terms()) {
        auto it = w.values_.find(d);
        if (it != w.values_.end()) v += c * it->second;
      }
      if (std::abs(v) > tol)
        throw std::invalid_argument("weight system violates a 4T relation");
    }
    w.primitive_ = w.vanishes_on_reducibles();
    return w;
  }

  /// The degree-2 weight system of the Casson knot invariant: 1 on the
  /// crossed chord diagram, 0 on the parallel one.
  static WeightSystem v2() {
    std::map<TrivalentDiagram, double> vals;
    for (const auto& d : enumerate_diagrams(2)) {
      if (!d.is_chord_diagram()) continue;
      vals[d] = is_reducible(d) ? 0.0 : 1.0;
    }
    return from_chord_values(2, std::move(vals));
  }

  /// The primitive weight system of degree n (n <= 3), normalized to 1 on the
  /// lexicographically smallest irreducible chord diagram. Found by solving
  /// the 4T relations plus vanishing on reducible chord diagrams.
  static WeightSystem primitive(int n);

 private:
  bool vanishes_on_reducibles() const {
    for (const auto& d : enumerate_diagrams(degree_))
      if (is_reducible(d) && std::abs(eval(d)) > 1e-9) return false;
    return true;
  }

  static std::vector<DiagramSum> four_term_relations(int n) {
    std::vector<DiagramSum> rels;
    for (const auto& d : enumerate_diagrams(n)) {
      if (d.free_count() != 1) continue;
      std::vector<Edge> stems;
      for (const auto& e : d.edges())
        if (d.is_circle_vertex(e.first) != d.is_circle_vertex(e.second)) stems.push_back(e);
      for (size_t i = 0; i < stems.size(); ++i)
        for (size_t j = i + 1; j < stems.size(); ++j) {
          DiagramSum rel = stu_expand(d, stems[i]);
          rel.add(stu_expand(d, stems[j]), -1.0);
          if (!rel.empty()) rels.push_back(std::move(rel));
        }
    }
    return rels;
  }

  int degree_ = 0;
  bool primitive_ = false;
  std::map<TrivalentDiagram, double> values_;
};

inline double eval_weight(const WeightSystem& w, const DiagramSum& x) { return w.eval(x); }
inline double eval_weight(const WeightSystem& w, const TrivalentDiagram& d) { return w.eval(d); }

inline WeightSystem WeightSystem::primitive(int n) {
  std::vector<TrivalentDiagram> chords;
  for (const auto& d : enumerate_diagrams(n))
    if (d.is_chord_diagram()) chords.push_back(d);
  int m = static_cast<int>(chords.size());
  auto index_of = [&](const TrivalentDiagram& d) {
    return static_cast<int>(std::lower_bound(chords.begin(), chords.end(), d) - chords.begin());
  };

  // constraint rows: 4T relations and reducible -> 0
  std::vector<std::vector<double>> rows;
  for (const DiagramSum& rel : four_term_relations(n)) {
    std::vector<double> row(m, 0.0);
    for (const auto& [d, c] : rel.terms()) row[index_of(d)] += c;
    rows.push_back(std::move(row));
  }
  for (int i = 0; i < m; ++i) {
    if (is_reducible(chords[i])) {
      std::vector<double> row(m, 0.0);
      row[i] = 1.0;
      rows.push_back(std::move(row));
    }
  }

  // nullspace by Gaussian elimination
  int nr = static_cast<int>(rows.size());
  std::vector<int> pivot_col;
  int r = 0;
  for (int c = 0; c < m && r < nr; ++c) {
    int p = -1;
    double bestv = 1e-12;
    for (int i = r; i < nr; ++i)
      if (std::abs(rows[i][c]) > bestv) { bestv = std::abs(rows[i][c]); p = i; }
    if (p < 0) continue;
    std::swap(rows[r], rows[p]);
    double d0 = rows[r][c];
    for (double& x : rows[r]) x /= d0;
    for (int i = 0; i < nr; ++i) {
      if (i == r) continue;
      double f = rows[i][c];
      if (f != 0.0)
        for (int j = 0; j < m; ++j) rows[i][j] -= f * rows[r][j];
    }
    pivot_col.push_back(c);
    ++r;
  }
  std::vector<int> free_cols;
  for (int c = 0; c < m; ++c)
    if (std::find(pivot_col.begin(), pivot_col.end(), c) == pivot_col.end())
      free_cols.push_back(c);
  if (free_cols.size() != 1)
    throw std::logic_error("primitive weight space has dimension " +
                           std::to_string(free_cols.size()) + ", expected 1");
  std::vector<double> sol(m, 0.0);
  sol[free_cols[0]] = 1.0;
  for (int i = 0; i < r; ++i) sol[pivot_col[i]] = -rows[i][free_cols[0]];

  // normalize on the smallest irreducible chord diagram
  double scale = 0;
  for (int i = 0; i < m; ++i)
    if (!is_reducible(chords[i])) { scale = sol[i]; break; }
  std::map<TrivalentDiagram, double> vals;
  for (int i = 0; i < m; ++i) {
    double v = sol[i] / scale;
    if (std::abs(v) < 1e-12) v = 0.0;
    vals[chords[i]] = v;
  }
  WeightSystem w = from_chord_values(n, std::move(vals));
  if (!w.primitive_) throw std::logic_error("primitive() produced a non-primitive system");
  return w;
}

// ---------------------------------------------------------------------------
// Text format: `n; circle=[1,2,3]; free=[4]; edges=[(1,4),(2,4),(3,4)]`

inline std::string format_diagram(const TrivalentDiagram& d) {
  std::ostringstream os;
  os << d.degree() << "; circle=[";
  for (int i = 1; i <= d.circle_count(); ++i) os << (i > 1 ? "," : "") << i;
  os << "]; free=[";
  for (int i = d.circle_count() + 1; i <= 2 * d.degree(); ++i)
    os << (i > d.circle_count() + 1 ? "," : "") << i;
  os << "]; edges=[";
  bool first = true;
  for (const auto& [a, b] : d.edges()) {
    os << (first ? "" : ",") << "(" << a << "," << b << ")";
    first = false;
  }
  os << "]";
  return os.str();
}

struct DiagramParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses one diagram line; whitespace-insensitive. Throws DiagramParseError
/// on malformed syntax; invariant violations come back via validate().
inline ValidationResult parse_diagram(const std::string& line) {
  std::string s;
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);

  auto parse_int_list = [](const std::string& body) {
    std::vector<int> out;
    std::string cur;
    for (char c : body) {
      if (c == ',') {
        if (!cur.empty()) out.push_back(std::stoi(cur));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(std::stoi(cur));
    return out;
  };

  RawDiagram raw;
  try {
    size_t semi = s.find(';');
    if (semi == std::string::npos) throw DiagramParseError("missing ';' after degree");
    raw.degree = std::stoi(s.substr(0, semi));

    auto section = [&](const std::string& key) -> std::string {
      size_t at = s.find(key + "=[");
      if (at == std::string::npos) throw DiagramParseError("missing section '" + key + "'");
      size_t open = at + key.size() + 1;
      size_t close = s.find(']', open);
      if (close == std::string::npos) throw DiagramParseError("unterminated '" + key + "'");
      return s.substr(open + 1, close - open - 1);
    };

    raw.circle = parse_int_list(section("circle"));
    raw.free_verts = parse_int_list(section("free"));

    std::string eb = section("edges");
    size_t pos = 0;
    while (pos < eb.size()) {
      if (eb[pos] == ',') { ++pos; continue; }
      if (eb[pos] != '(') throw DiagramParseError("expected '(' in edges");
      size_t close = eb.find(')', pos);
      if (close == std::string::npos) throw DiagramParseError("unterminated edge pair");
      std::vector<int> pr = parse_int_list(eb.substr(pos + 1, close - pos - 1));
      if (pr.size() != 2) throw DiagramParseError("edge pair needs two labels");
      raw.edges.push_back(detail::mk_edge(pr[0], pr[1]));
      pos = close + 1;
    }
  } catch (const std::invalid_argument&) {
    throw DiagramParseError("malformed integer in diagram line");
  } catch (const std::out_of_range&) {
    throw DiagramParseError("integer out of range in diagram line");
  }
  return validate(raw);
}

}  // namespace flowinv::diagrams
