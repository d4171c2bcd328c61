#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "forestkit/tree.hpp"

using namespace forestkit;

namespace {

// Independent counting oracle.  A tree with e >= 1 edges is either the
// bare edge (e == 1) or a capped root with a multiset of subtrees
// totalling e-1 edges, so
//   tau(e) = [e == 1] + multisets(e-1)
// where multisets(n) counts multisets of smaller trees with n edges in
// total; multisets(0) = 1 covers the stump.  Forests with n edges are
// exactly such multisets.

long long binom(long long n, long long k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (long long i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

struct CountOracle {
  std::vector<long long> tau;  // tau[e] = tree classes with e edges

  explicit CountOracle(int maxEdges) : tau(maxEdges + 1, 0) {
    if (maxEdges >= 1) tau[1] = 2;  // bare edge and stump
    for (int e = 2; e <= maxEdges; ++e) tau[e] = multisets(e - 1, e - 1);
  }

  // multisets of trees, each with at most maxSize edges, totalling n
  long long multisets(int maxSize, int n) const {
    std::vector<long long> dp(n + 1, 0);
    dp[0] = 1;
    for (int s = 1; s <= maxSize; ++s) {
      std::vector<long long> nd(n + 1, 0);
      for (int m = 0; m <= n; ++m) {
        if (!dp[m]) continue;
        for (int j = 0; m + j * s <= n; ++j)
          nd[m + j * s] += dp[m] * binom(tau[s] + j - 1, j);
      }
      dp = std::move(nd);
    }
    return dp[n];
  }

  long long forests_up_to(int maxEdges) const {
    long long total = 0;
    for (int n = 0; n <= maxEdges; ++n) total += multisets(n, n);
    return total;
  }
};

}  // namespace

TEST_CASE("codes of the basic shapes") {
  CHECK(Tree::eta().code() == "L");
  CHECK(Tree::corolla(0).code() == "()");
  CHECK(Tree::corolla(1).code() == "(L)");
  CHECK(Tree::corolla(2).code() == "(LL)");
  CHECK(Tree::linear(0).code() == "L");
  CHECK(Tree::linear(1).code() == "(L)");
  CHECK(Tree::linear(2).code() == "((L))");
  CHECK(Tree::corolla(3).edge_count() == 4);
  CHECK(Tree::corolla(3).vertex_count() == 1);
  CHECK(Tree::linear(3).vertex_count() == 3);
}

TEST_CASE("canonical code ignores edge labelling and input order") {
  // root vertex with a leaf and a once-capped child, in both input orders
  Tree a = Tree::from_parents({-1, 0, 0, 2}, {1, 0, 1, 0});
  Tree b = Tree::from_parents({-1, 0, 1, 0}, {1, 1, 0, 0});
  CHECK(a.code() == b.code());
  CHECK(a.code() == "((L)L)");

  // same tree under an arbitrary relabelling, root last
  Tree c = Tree::from_parents({3, 3, 0, -1}, {1, 0, 0, 1});
  CHECK(c.code() == a.code());
}

TEST_CASE("from_parents relabel output tracks input edges") {
  std::vector<int> relabel;
  Tree t = Tree::from_parents({3, 3, 0, -1}, {1, 0, 0, 1}, &relabel);
  REQUIRE(relabel.size() == 4);
  CHECK(relabel[3] == 0);  // input root becomes canonical root
  // every input edge keeps its subtree shape
  Tree direct = Tree::from_parents({-1, 0, 0, 2}, {1, 0, 1, 0});
  CHECK(t == direct);
  for (int e = 0; e < 4; ++e) CHECK(relabel[e] >= 0);
}

TEST_CASE("from_parents rejects malformed input") {
  CHECK_THROWS_AS(Tree::from_parents({-1, -1}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(Tree::from_parents({0}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(Tree::from_parents({-1, 5}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tree::from_parents({-1, 1}, {1, 1}), std::invalid_argument);
  // child hanging off an uncapped edge
  CHECK_THROWS_AS(Tree::from_parents({-1, 0}, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tree::from_parents({}, {}), std::invalid_argument);
}

TEST_CASE("edge classification on a mixed tree") {
  // root vertex with inputs: leaf, stump-capped edge, unary-capped edge
  Tree t = Tree::from_parents({-1, 0, 0, 0, 3}, {1, 0, 1, 1, 0});
  CHECK(t.code() == "(()(L)L)");
  CHECK(t.edge_count() == 5);
  CHECK(t.vertex_count() == 3);

  const std::vector<int> leafV = t.leaf_edges(), innerV = t.inner_edges(),
                         vertV = t.vertices();
  std::set<int> leaves(leafV.begin(), leafV.end());
  std::set<int> inner(innerV.begin(), innerV.end());
  std::set<int> verts(vertV.begin(), vertV.end());
  CHECK(leaves.size() == 2);
  CHECK(inner.size() == 2);
  CHECK(verts.size() == 3);
  CHECK(verts.count(t.root()) == 1);
  for (int e : inner) CHECK(verts.count(e) == 1);
  for (int e : leaves) CHECK(verts.count(e) == 0);

  // the root is below everything
  for (int e = 0; e < t.edge_count(); ++e) {
    CHECK(t.leq(0, e));
    CHECK(t.leq(e, e));
  }
}

TEST_CASE("leaf vertices: stumps and all-input-leaf vertices") {
  Tree t = Tree::from_parents({-1, 0, 0, 2}, {1, 0, 1, 0});  // ((L)L)
  CHECK_FALSE(t.is_leaf_vertex(t.root()));
  // the unary vertex above a leaf is a leaf vertex
  int unary = -1;
  for (int v : t.vertices())
    if (v != t.root()) unary = v;
  CHECK(t.is_leaf_vertex(unary));

  Tree stump = Tree::corolla(0);
  CHECK(stump.is_leaf_vertex(stump.root()));
  CHECK(Tree::corolla(2).is_leaf_vertex(0));
}

TEST_CASE("tree counts match the multiset recursion") {
  CountOracle oracle(7);
  const std::vector<long long> frozen = {2, 2, 5, 13, 37, 108, 332};
  for (int e = 1; e <= 7; ++e) {
    CHECK(oracle.tau[e] == frozen[e - 1]);
    CHECK((long long)trees_with_edge_count(e).size() == frozen[e - 1]);
  }
}

TEST_CASE("tree enumeration is duplicate-free and ordered") {
  std::vector<Tree> all = enumerate_trees(6);
  std::set<std::string> codes;
  for (const Tree& t : all) CHECK(codes.insert(t.code()).second);
  for (size_t i = 1; i < all.size(); ++i) {
    const bool ordered =
        all[i - 1].edge_count() < all[i].edge_count() ||
        (all[i - 1].edge_count() == all[i].edge_count() &&
         all[i - 1].code() < all[i].code());
    CHECK(ordered);
  }
  // round trip: every enumerated tree canonicalizes to itself
  for (const Tree& t : all) CHECK(Tree::from_raw(t.raw()) == t);
}

TEST_CASE("forest counts match the multiset recursion") {
  CountOracle oracle(7);
  CHECK(oracle.forests_up_to(3) == 21);
  CHECK(oracle.forests_up_to(4) == 58);
  CHECK(oracle.forests_up_to(5) == 166);
  CHECK(oracle.forests_up_to(6) == 498);
  CHECK(oracle.forests_up_to(7) == 1540);
  CHECK(enumerate_forests(3).size() == 21);
  CHECK(enumerate_forests(4).size() == 58);
  CHECK(enumerate_forests(5).size() == 166);
  CHECK(enumerate_forests(6).size() == 498);
  CHECK(enumerate_forests(7).size() == 1540);
}

TEST_CASE("forest enumeration starts at the empty forest and is ordered") {
  std::vector<Forest> all = enumerate_forests(4);
  REQUIRE(!all.empty());
  CHECK(all[0].empty());
  CHECK(all[0].code() == "0");
  std::set<std::string> codes;
  for (const Forest& f : all) CHECK(codes.insert(f.code()).second);
  for (size_t i = 1; i < all.size(); ++i) {
    const bool ordered =
        all[i - 1].total_edges() < all[i].total_edges() ||
        (all[i - 1].total_edges() == all[i].total_edges() &&
         all[i - 1].code() < all[i].code());
    CHECK(ordered);
  }
}

TEST_CASE("concatenation is commutative on codes") {
  std::vector<Forest> all = enumerate_forests(3);
  for (const Forest& f : all)
    for (const Forest& g : all) {
      CHECK(f.concat(g).code() == g.concat(f).code());
      CHECK(f.concat(g).total_edges() == f.total_edges() + g.total_edges());
    }
  CHECK(Forest().concat(Forest()).code() == "0");
}

TEST_CASE("forest codes join sorted component codes") {
  Forest f = Forest::of({Tree::corolla(2), Tree::eta(), Tree::corolla(0)});
  CHECK(f.code() == "()+(LL)+L");
  CHECK(f.component_count() == 3);
  CHECK(f.component(0).code() == "()");
  CHECK(f.component(2).code() == "L");
  CHECK(f.total_edges() == 5);
  CHECK(f.total_vertices() == 2);
  CHECK(Forest::etas(3).code() == "L+L+L");
  CHECK(Forest::etas(0).code() == "0");
}

TEST_CASE("restrict keeps the selected components") {
  Forest f = Forest::of({Tree::corolla(0), Tree::corolla(2), Tree::eta()});
  CHECK(f.restrict({0, 2}).code() == "()+L");
  CHECK(f.restrict({1}).code() == "(LL)");
  CHECK(f.restrict({}).code() == "0");
}

TEST_CASE("build_forest reports canonical positions and edge maps") {
  RawTree eta = Tree::eta().raw();
  RawTree scrambled;  // (L) with the root listed second
  scrambled.parent = {1, -1};
  scrambled.capped = {0, 1};
  BuiltForest b = build_forest({scrambled, eta});
  CHECK(b.forest.code() == "(L)+L");
  CHECK(b.comp[0] == 0);
  CHECK(b.comp[1] == 1);
  // scrambled root (input edge 1) becomes canonical root edge 0
  CHECK(b.edge[0][1] == 0);
  CHECK(b.edge[0][0] == 1);
  CHECK(b.edge[1][0] == 0);
}

TEST_CASE("build_forest keeps input order between equal components") {
  // two copies of eta: first input stays component 0
  BuiltForest b = build_forest({Tree::eta().raw(), Tree::eta().raw()});
  CHECK(b.forest.code() == "L+L");
  CHECK(b.comp[0] == 0);
  CHECK(b.comp[1] == 1);
}

TEST_CASE("parse_forest_code inverts canonical codes") {
  CHECK(parse_forest_code("0").empty());
  CHECK(parse_forest_code("L").code() == "L");
  CHECK(parse_forest_code("(LL)").code() == "(LL)");
  CHECK(parse_forest_code("()+L+L").code() == "()+L+L");
  // non-canonical spellings canonicalize
  CHECK(parse_forest_code("L+(LL)").code() == "(LL)+L");
  CHECK(parse_forest_code("(L()L)").code() == "(()LL)");
  for (const Forest& f : enumerate_forests(5)) {
    CHECK(parse_forest_code(f.code()) == f);
  }
  CHECK_THROWS_AS(parse_forest_code(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_forest_code("(L"), std::invalid_argument);
  CHECK_THROWS_AS(parse_forest_code("L)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_forest_code("LL"), std::invalid_argument);
  CHECK_THROWS_AS(parse_forest_code("L+"), std::invalid_argument);
  CHECK_THROWS_AS(parse_forest_code("x"), std::invalid_argument);
}
