#include "flowinv/diagrams.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace flowinv::diagrams;

namespace {

RawDiagram chord_crossed() {
  return {2, {1, 2, 3, 4}, {}, {{1, 3}, {2, 4}}};
}
RawDiagram chord_parallel() {
  return {2, {1, 2, 3, 4}, {}, {{1, 2}, {3, 4}}};
}
RawDiagram tripod() {
  return {2, {1, 2, 3}, {4}, {{1, 4}, {2, 4}, {3, 4}}};
}

TrivalentDiagram valid(const RawDiagram& r) {
  ValidationResult v = validate(r);
  EXPECT_TRUE(v.ok());
  return *v.diagram;
}

// Independent reducibility oracle: try every vertex bipartition, require both
// sides nonempty, no crossing edge, and each side's circle vertices contiguous
// in the cyclic order.
bool reducible_brute(const TrivalentDiagram& d) {
  int n2 = 2 * d.degree(), k = d.circle_count();
  for (int mask = 1; mask < (1 << n2) - 1; ++mask) {
    auto side = [&](int v) { return (mask >> (v - 1)) & 1; };
    bool ok = true;
    for (const auto& [a, b] : d.edges())
      if (side(a) != side(b)) { ok = false; break; }
    if (!ok) continue;
    // each side must own at least one vertex (mask range ensures that) and
    // the circle labels 1..k of each side must form one contiguous cyclic arc
    auto contiguous = [&](int want) {
      int transitions = 0;
      int cnt = 0;
      for (int i = 1; i <= k; ++i) {
        if (side(i) == want) ++cnt;
        int j = i % k + 1;
        if ((side(i) == want) != (side(j) == want)) ++transitions;
      }
      return cnt == 0 || transitions <= 2;
    };
    if (!contiguous(0) || !contiguous(1)) continue;
    bool has0 = false, has1 = false;
    for (int i = 1; i <= k; ++i) (side(i) ? has1 : has0) = true;
    if (has0 && has1) return true;
  }
  return false;
}

TEST(Validate, MinimalChordDiagram) {
  ValidationResult v = validate(chord_crossed());
  ASSERT_TRUE(v.ok());
  EXPECT_EQ(v.diagram->circle_count(), 4);
  EXPECT_EQ(v.diagram->free_count(), 0);
  EXPECT_EQ(v.diagram->degree(), 2);
}

TEST(Validate, TripodEdgeCount) {
  ValidationResult v = validate(tripod());
  ASSERT_TRUE(v.ok());
  EXPECT_EQ(static_cast<int>(v.diagram->edges().size()), 3);  // (3+3)/2
  EXPECT_EQ(v.diagram->circle_count(), 3);
  EXPECT_EQ(v.diagram->free_count(), 1);
}

TEST(Validate, NonTrivalentVertexRejected) {
  RawDiagram r{3, {1, 2, 3, 4, 5}, {6},
               {{1, 6}, {2, 6}, {3, 6}, {4, 6}, {5, 1}}};  // free vertex 6 has 4 edges
  ValidationResult v = validate(r);
  EXPECT_FALSE(v.ok());
  bool found = false;
  for (const auto& e : v.errors)
    if (e.find("non-trivalent vertex") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(Validate, DisconnectedRejected) {
  // two circle vertices chorded together, plus a floating triangle of frees
  RawDiagram r{3, {1, 2}, {3, 4, 5, 6}, {{1, 2}, {3, 4}, {4, 5}, {3, 5}, {3, 6}, {4, 6}, {5, 6}}};
  ValidationResult v = validate(r);
  ASSERT_FALSE(v.ok());
  bool found = false;
  for (const auto& e : v.errors)
    if (e.find("disconnected") != std::string::npos) found = true;
  EXPECT_TRUE(found);
}

TEST(Validate, ErrorListIsComplete) {
  RawDiagram r{2, {1, 2, 3, 4}, {}, {{1, 2}}};
  ValidationResult v = validate(r);
  EXPECT_FALSE(v.ok());
  EXPECT_GE(v.errors.size(), 1u);
}

TEST(Degree, Values) {
  EXPECT_EQ(degree(valid(chord_crossed())), 2);
  EXPECT_EQ(degree(valid(tripod())), 2);  // (3+1)/2
}

TEST(StuExpand, TripodGivesCrossedMinusParallel) {
  TrivalentDiagram t = valid(tripod());
  TrivalentDiagram x = valid(chord_crossed());
  TrivalentDiagram p = valid(chord_parallel());
  for (const auto& e : t.edges()) {
    DiagramSum s = stu_expand(t, e);
    ASSERT_EQ(s.terms().size(), 2u);
    EXPECT_DOUBLE_EQ(s.terms().at(x), 1.0);
    EXPECT_DOUBLE_EQ(s.terms().at(p), -1.0);
  }
}

TEST(StuExpand, ChordDiagramRejected) {
  TrivalentDiagram x = valid(chord_crossed());
  EXPECT_THROW(stu_expand(x, {1, 3}), std::invalid_argument);
}

TEST(StuExpand, EachStepShedsOneFreeVertexAndTerminates) {
  // Every term of an expansion has one fewer free vertex, so a surviving
  // branch reaches chord diagrams in exactly s steps. Branches may die early:
  // T and U can be isomorphic, in which case the diagram vanishes mod STU.
  for (int n = 1; n <= 3; ++n) {
    for (const auto& d : enumerate_diagrams(n)) {
      std::vector<TrivalentDiagram> frontier{d};
      int level = 0;
      while (!frontier.empty() && level < d.free_count()) {
        std::vector<TrivalentDiagram> next;
        for (const auto& f : frontier) {
          ASSERT_EQ(f.free_count(), d.free_count() - level);
          for (const auto& e : f.edges()) {
            bool a_c = f.is_circle_vertex(e.first), b_c = f.is_circle_vertex(e.second);
            if (a_c == b_c) continue;
            DiagramSum ex = stu_expand(f, e);
            for (const auto& [t, c] : ex.terms()) {
              EXPECT_EQ(t.degree(), f.degree());
              EXPECT_EQ(t.free_count(), f.free_count() - 1);
              next.push_back(t);
            }
            break;  // one stem per level is enough for the depth count
          }
        }
        frontier = std::move(next);
        ++level;
      }
      for (const auto& f : frontier) EXPECT_TRUE(f.is_chord_diagram());
    }
  }
}

TEST(IsReducible, SpecExamples) {
  EXPECT_TRUE(is_reducible(valid(chord_parallel())));
  EXPECT_FALSE(is_reducible(valid(chord_crossed())));
  EXPECT_FALSE(is_reducible(valid(tripod())));
}

TEST(IsReducible, MatchesBruteForceUpToDegree3) {
  for (int n = 1; n <= 3; ++n)
    for (const auto& d : enumerate_diagrams(n))
      EXPECT_EQ(is_reducible(d), reducible_brute(d)) << format_diagram(d);
}

TEST(Enumerate, Degree1IsSingleChord) {
  auto v = enumerate_diagrams(1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].is_chord_diagram());
  EXPECT_EQ(v[0].circle_count(), 2);
}

TEST(Enumerate, Degree2HasBothChordsAndTripod) {
  auto v = enumerate_diagrams(2);
  EXPECT_EQ(v.size(), 3u);
  bool has_x = false, has_p = false, has_t = false;
  TrivalentDiagram x = valid(chord_crossed()), p = valid(chord_parallel()), t = valid(tripod());
  for (const auto& d : v) {
    if (d == x) has_x = true;
    if (d == p) has_p = true;
    if (d == t) has_t = true;
  }
  EXPECT_TRUE(has_x && has_p && has_t);
}

TEST(Enumerate, OutputsPassValidateAndAreDistinct) {
  for (int n = 1; n <= 3; ++n) {
    auto v = enumerate_diagrams(n);
    for (size_t i = 0; i < v.size(); ++i) {
      RawDiagram raw;
      raw.degree = v[i].degree();
      for (int c = 1; c <= v[i].circle_count(); ++c) raw.circle.push_back(c);
      for (int f = v[i].circle_count() + 1; f <= 2 * n; ++f) raw.free_verts.push_back(f);
      raw.edges = v[i].edges();
      EXPECT_TRUE(validate(raw).ok());
      for (size_t j = i + 1; j < v.size(); ++j) EXPECT_FALSE(v[i] == v[j]);
    }
  }
}

TEST(Enumerate, RejectsOutOfRange) {
  EXPECT_THROW(enumerate_diagrams(0), std::invalid_argument);
  EXPECT_THROW(enumerate_diagrams(4), std::invalid_argument);
}

TEST(Canonical, RelabelingInvariance) {
  std::mt19937 gen(12345);
  for (int n = 1; n <= 3; ++n) {
    for (const auto& d : enumerate_diagrams(n)) {
      int n2 = 2 * n, k = d.circle_count();
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> perm(n2);
        for (int i = 0; i < n2; ++i) perm[i] = i + 1;
        std::shuffle(perm.begin(), perm.end(), gen);
        int rot = std::uniform_int_distribution<int>(0, k - 1)(gen);
        RawDiagram raw;
        raw.degree = n;
        for (int i = 0; i < k; ++i) raw.circle.push_back(perm[(i + rot) % k]);
        for (int f = k; f < n2; ++f) raw.free_verts.push_back(perm[f]);
        for (const auto& [a, b] : d.edges())
          raw.edges.push_back(detail::mk_edge(perm[a - 1], perm[b - 1]));
        ValidationResult v = validate(raw);
        ASSERT_TRUE(v.ok());
        EXPECT_TRUE(*v.diagram == d) << format_diagram(d);
      }
    }
  }
}

TEST(WeightSystem, StuTripleVanishesForAllStoredSystems) {
  // eval_weight(W, S - T + U) == 0 on every degree <= 3 expandable edge
  std::vector<WeightSystem> systems{WeightSystem::primitive(1), WeightSystem::v2(),
                                    WeightSystem::primitive(3)};
  for (const WeightSystem& w : systems) {
    for (const auto& d : enumerate_diagrams(w.degree())) {
      for (const auto& e : d.edges()) {
        bool a_c = d.is_circle_vertex(e.first), b_c = d.is_circle_vertex(e.second);
        if (a_c == b_c) continue;
        DiagramSum triple(d, 1.0);
        triple.add(stu_expand(d, e), -1.0);  // S - (T - U)
        EXPECT_NEAR(eval_weight(w, triple), 0.0, 1e-12)
            << format_diagram(d) << " @ (" << e.first << "," << e.second << ")";
      }
    }
  }
}

TEST(WeightSystem, V2Values) {
  WeightSystem w = WeightSystem::v2();
  TrivalentDiagram x = valid(chord_crossed()), p = valid(chord_parallel()), t = valid(tripod());
  EXPECT_DOUBLE_EQ(w.eval(x), 1.0);
  EXPECT_DOUBLE_EQ(w.eval(p), 0.0);
  EXPECT_DOUBLE_EQ(w.eval(DiagramSum(x)), 1.0);
  // tripod value forced by STU: crossed - parallel
  EXPECT_DOUBLE_EQ(w.eval(t), 1.0);
  EXPECT_TRUE(w.primitive());
}

TEST(WeightSystem, DegreeMismatchRejected) {
  WeightSystem w = WeightSystem::v2();
  EXPECT_THROW(w.eval(enumerate_diagrams(3).front()), std::invalid_argument);
}

TEST(WeightSystem, FromChordValuesRejects4TViolations) {
  // random values on degree-3 chord diagrams almost surely violate 4T
  std::map<TrivalentDiagram, double> vals;
  int i = 0;
  for (const auto& d : enumerate_diagrams(3))
    if (d.is_chord_diagram()) vals[d] = (i++ % 3 == 0) ? 1.0 : 0.25;
  EXPECT_THROW(WeightSystem::from_chord_values(3, vals), std::invalid_argument);
}

TEST(TextFormat, RoundTrip) {
  for (int n = 1; n <= 3; ++n)
    for (const auto& d : enumerate_diagrams(n)) {
      ValidationResult v = parse_diagram(format_diagram(d));
      ASSERT_TRUE(v.ok());
      EXPECT_TRUE(*v.diagram == d);
    }
}

TEST(TextFormat, WhitespaceInsensitive) {
  ValidationResult v =
      parse_diagram(" 2 ; circle = [ 1 , 2 , 3 ] ; free = [ 4 ] ; edges = [ (1,4) , (2,4) , (3,4) ] ");
  ASSERT_TRUE(v.ok());
  EXPECT_TRUE(*v.diagram == valid(tripod()));
}

TEST(TextFormat, MalformedRejected) {
  EXPECT_THROW(parse_diagram("2 circle=[1]"), DiagramParseError);
  EXPECT_THROW(parse_diagram("x; circle=[1,2]; free=[]; edges=[(1,2)]"), DiagramParseError);
  ValidationResult v = parse_diagram("2; circle=[1,2,3,4]; free=[]; edges=[(1,2)]");
  EXPECT_FALSE(v.ok());
}

}  // namespace
