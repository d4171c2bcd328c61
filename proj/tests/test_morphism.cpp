#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "forestkit/morphism.hpp"

using namespace forestkit;

namespace {

ForestMorphism make(const Forest& src, const Forest& dst, std::vector<int> comp,
                    std::vector<std::vector<int>> edge) {
  ForestMorphism m;
  m.src = src;
  m.dst = dst;
  m.comp = std::move(comp);
  m.edge = std::move(edge);
  return m;
}

int count_kind(const std::vector<ElementaryFace>& faces, FaceKind k) {
  int n = 0;
  for (const ElementaryFace& f : faces)
    if (f.kind == k) ++n;
  return n;
}

}  // namespace

TEST_CASE("subtree witnesses on a corolla") {
  Tree c2 = Tree::corolla(2);
  auto full = subtree_operation(c2, 0, {1, 2});
  REQUIRE(full.has_value());
  CHECK(full->regionVertices == std::vector<int>{0});
  CHECK(full->regionEdges == std::vector<int>{0, 1, 2});
  CHECK_FALSE(full->identity());

  auto ident = subtree_operation(c2, 1, {1});
  REQUIRE(ident.has_value());
  CHECK(ident->identity());

  CHECK_FALSE(subtree_operation(c2, 0, {1}).has_value());
  CHECK_FALSE(subtree_operation(c2, 0, {1, 1}).has_value());
  CHECK_FALSE(subtree_operation(c2, 0, {1, 2, 2}).has_value());
  CHECK_FALSE(subtree_operation(c2, 1, {2}).has_value());
}

TEST_CASE("subtree witnesses through a chain and at a stump") {
  Tree lin = Tree::linear(2);
  auto both = subtree_operation(lin, 0, {2});
  REQUIRE(both.has_value());
  CHECK(both->regionVertices == std::vector<int>{0, 1});

  Tree stump = Tree::corolla(0);
  auto whole = subtree_operation(stump, 0, {});
  REQUIRE(whole.has_value());
  CHECK(whole->regionVertices == std::vector<int>{0});
  // the empty leaf set is not an identity witness
  CHECK_FALSE(whole->identity());

  // a stump region inside a larger tree: (()L), region above edge 1
  Tree t = Tree::from_parents({-1, 0, 0}, {1, 1, 0});
  auto sub = subtree_operation(t, 1, {});
  REQUIRE(sub.has_value());
  CHECK(sub->regionEdges == std::vector<int>{1});
}

TEST_CASE("hom sets of small shapes have the pinned sizes") {
  Forest eta = Forest::single(Tree::eta());
  Forest c2 = Forest::single(Tree::corolla(2));
  Forest c0 = Forest::single(Tree::corolla(0));
  Forest empty;

  CHECK(hom_set(eta, eta).size() == 1);
  CHECK(hom_set(eta, c2).size() == 3);  // one per edge
  for (int k = 0; k <= 4; ++k)
    CHECK(hom_set(eta, Forest::single(Tree::corolla(k))).size() ==
          (size_t)(k + 1));
  CHECK(hom_set(eta, c0).size() == 1);
  CHECK(hom_set(c0, c2).empty());  // no leafless region in a corolla
  CHECK(hom_set(c0, c0).size() == 1);

  CHECK(hom_set(empty, c2).size() == 1);
  CHECK(hom_set(empty, empty).size() == 1);
  CHECK(hom_set(eta, empty).empty());

  // chains embed the simplex category: monotone maps count binomially
  CHECK(hom_set(Forest::single(Tree::linear(1)),
                Forest::single(Tree::linear(2))).size() == 6);
  CHECK(hom_set(Forest::single(Tree::linear(2)),
                Forest::single(Tree::linear(2))).size() == 10);
}

TEST_CASE("hom sets are sorted, valid and closed under composition") {
  std::vector<Forest> shapes = enumerate_forests(3);
  for (const Forest& f : shapes)
    for (const Forest& g : shapes) {
      std::vector<ForestMorphism> hom = hom_set(f, g);
      for (size_t i = 0; i < hom.size(); ++i) {
        CHECK(validate(hom[i]));
        if (i) CHECK(hom[i - 1] < hom[i]);
      }
    }
  // spot-check closure under composition
  Forest eta = Forest::single(Tree::eta());
  Forest c2 = Forest::single(Tree::corolla(2));
  std::vector<ForestMorphism> upper = hom_set(c2, c2);
  std::vector<ForestMorphism> lower = hom_set(eta, c2);
  std::vector<ForestMorphism> all = hom_set(eta, c2);
  for (const ForestMorphism& a : upper)
    for (const ForestMorphism& b : lower) {
      ForestMorphism c = compose(a, b);
      CHECK(std::find(all.begin(), all.end(), c) != all.end());
    }
}

TEST_CASE("composition is associative on a three-step chain") {
  Forest eta = Forest::single(Tree::eta());
  Forest c1 = Forest::single(Tree::corolla(1));
  Forest lin2 = Forest::single(Tree::linear(2));
  for (const ForestMorphism& a : hom_set(c1, lin2))
    for (const ForestMorphism& b : hom_set(eta, c1))
      for (const ForestMorphism& c : hom_set(eta, eta))
        CHECK(compose(compose(a, b), c) == compose(a, compose(b, c)));
}

TEST_CASE("isomorphisms and automorphisms") {
  Forest c2 = Forest::single(Tree::corolla(2));
  std::vector<ForestMorphism> autos = automorphisms(c2);
  CHECK(autos.size() == 2);  // identity and the input swap
  for (const ForestMorphism& a : autos) {
    CHECK(is_isomorphism(a));
    auto inv = inverse(a);
    REQUIRE(inv.has_value());
    CHECK(compose(a, *inv) == identity_morphism(c2));
    CHECK(compose(*inv, a) == identity_morphism(c2));
  }

  CHECK(automorphisms(Forest::single(Tree::linear(2))).size() == 1);
  CHECK(automorphisms(Forest::etas(2)).size() == 2);  // swap the components
  CHECK(automorphisms(Forest::single(Tree::corolla(3))).size() == 6);

  // collapses are not isomorphisms
  Forest c1 = Forest::single(Tree::corolla(1));
  Forest eta = Forest::single(Tree::eta());
  ForestMorphism collapse = make(c1, eta, {0}, {{0, 0}});
  CHECK(validate(collapse));
  CHECK_FALSE(is_isomorphism(collapse));
  CHECK_FALSE(inverse(collapse).has_value());
}

TEST_CASE("validation rejects broken structures") {
  Forest eta = Forest::single(Tree::eta());
  Forest c2 = Forest::single(Tree::corolla(2));
  std::string why;

  // vertex image is not a subtree operation: root of C2 sent to a leaf set
  // that misses an input
  ForestMorphism bad = make(c2, c2, {0}, {{0, 1, 1}});
  CHECK_FALSE(validate(bad, &why));
  CHECK_FALSE(why.empty());

  // component map out of range
  ForestMorphism oob = make(eta, c2, {1}, {{0}});
  CHECK_FALSE(validate(oob));

  // non-injective without a unit vertex: two eta components onto
  // comparable edges of the same corolla
  ForestMorphism dep = make(Forest::etas(2), c2, {0, 0}, {{0}, {1}});
  CHECK_FALSE(validate(dep, &why));

  // but incomparable edges are fine
  ForestMorphism ind = make(Forest::etas(2), c2, {0, 0}, {{1}, {2}});
  CHECK(validate(ind));
}

TEST_CASE("elementary faces of the pinned shapes") {
  Forest eta = Forest::single(Tree::eta());
  std::vector<ElementaryFace> fe = elementary_faces(eta);
  REQUIRE(fe.size() == 1);
  CHECK(fe[0].kind == FaceKind::Root);
  CHECK(fe[0].map.src.empty());

  Forest c2 = Forest::single(Tree::corolla(2));
  std::vector<ElementaryFace> fc = elementary_faces(c2);
  REQUIRE(fc.size() == 2);
  CHECK(count_kind(fc, FaceKind::Leaf) == 1);
  CHECK(count_kind(fc, FaceKind::Root) == 1);
  for (const ElementaryFace& f : fc) {
    if (f.kind == FaceKind::Leaf) CHECK(f.map.src.code() == "L");
    if (f.kind == FaceKind::Root) CHECK(f.map.src.code() == "L+L");
  }

  Forest c0 = Forest::single(Tree::corolla(0));
  std::vector<ElementaryFace> f0 = elementary_faces(c0);
  REQUIRE(f0.size() == 2);
  for (const ElementaryFace& f : f0) {
    if (f.kind == FaceKind::Leaf) CHECK(f.map.src.code() == "L");
    if (f.kind == FaceKind::Root) CHECK(f.map.src.code() == "0");
  }

  Forest lin2 = Forest::single(Tree::linear(2));
  std::vector<ElementaryFace> fl = elementary_faces(lin2);
  REQUIRE(fl.size() == 3);
  CHECK(count_kind(fl, FaceKind::Inner) == 1);
  CHECK(count_kind(fl, FaceKind::Leaf) == 1);
  CHECK(count_kind(fl, FaceKind::Root) == 1);
  for (const ElementaryFace& f : fl) CHECK(f.map.src.code() == "(L)");

  // root face of a tree with a branching root: one component per input
  Forest c2c0 = Forest::single(Tree::from_parents({-1, 0, 0, 1}, {1, 1, 0, 0}));
  for (const ElementaryFace& f : elementary_faces(c2c0))
    if (f.kind == FaceKind::Root) CHECK(f.map.src.code() == "(L)+L");
}

TEST_CASE("faces of a multi-component forest") {
  std::vector<ElementaryFace> f2 = elementary_faces(Forest::etas(2));
  REQUIRE(f2.size() == 2);
  for (const ElementaryFace& f : f2) {
    CHECK(f.kind == FaceKind::Root);
    CHECK(f.map.src.code() == "L");
  }

  Forest mixed = Forest::of({Tree::corolla(0), Tree::eta()});
  std::vector<ElementaryFace> fm = elementary_faces(mixed);
  CHECK(fm.size() == 3);  // stump leaf, stump root, eta root
  std::multiset<std::string> srcs;
  for (const ElementaryFace& f : fm) srcs.insert(f.map.src.code());
  CHECK(srcs == std::multiset<std::string>{"()", "L", "L+L"});
}

TEST_CASE("all faces and degeneracies are valid elementary arrows") {
  for (const Forest& f : enumerate_forests(4)) {
    for (const ElementaryFace& d : elementary_faces(f)) {
      CHECK(validate(d.map));
      CHECK(d.map.dst == f);
      CHECK_FALSE(is_isomorphism(d.map));
      // stump-removal faces keep the edge count; all others shrink it
      CHECK(d.map.src.total_edges() + d.map.src.total_vertices() <
            f.total_edges() + f.total_vertices());
    }
    for (const ElementaryDegeneracy& s : elementary_degeneracies(f)) {
      CHECK(validate(s.map));
      CHECK(s.map.dst == f);
      CHECK(s.map.src.total_edges() == f.total_edges() + 1);
      CHECK(s.map.src.total_vertices() == f.total_vertices() + 1);
    }
  }
  CHECK(elementary_degeneracies(Forest::single(Tree::eta())).size() == 1);
  CHECK(elementary_degeneracies(Forest::single(Tree::corolla(2))).size() == 3);
  CHECK(elementary_degeneracies(Forest()).empty());
}

TEST_CASE("factor_through finds the unique factor inside a face") {
  Forest eta = Forest::single(Tree::eta());
  Forest lin2 = Forest::single(Tree::linear(2));
  std::vector<ElementaryFace> faces = elementary_faces(lin2);
  const ElementaryFace* leaf = nullptr;
  const ElementaryFace* root = nullptr;
  for (const ElementaryFace& f : faces) {
    if (f.kind == FaceKind::Leaf) leaf = &f;
    if (f.kind == FaceKind::Root) root = &f;
  }
  REQUIRE(leaf);
  REQUIRE(root);

  // edge 0 lies in the leaf face but not the root face; edge 2 conversely
  ForestMorphism hit0 = make(eta, lin2, {0}, {{0}});
  ForestMorphism hit2 = make(eta, lin2, {0}, {{2}});
  auto f0 = factor_through(hit0, leaf->map);
  REQUIRE(f0.has_value());
  CHECK(compose(leaf->map, *f0) == hit0);
  CHECK_FALSE(factor_through(hit0, root->map).has_value());
  auto f2 = factor_through(hit2, root->map);
  REQUIRE(f2.has_value());
  CHECK(compose(root->map, *f2) == hit2);
  CHECK_FALSE(factor_through(hit2, leaf->map).has_value());
}

TEST_CASE("factorize: pure cases") {
  Forest eta = Forest::single(Tree::eta());
  Forest c1 = Forest::single(Tree::corolla(1));
  Forest c2 = Forest::single(Tree::corolla(2));

  Factorization idf = factorize(identity_morphism(c2));
  CHECK(idf.degeneracySteps.empty());
  CHECK(idf.faceSteps.empty());
  CHECK(is_isomorphism(idf.iso));

  // collapsing the unit vertex is a single degeneracy step
  ForestMorphism collapse = make(c1, eta, {0}, {{0, 0}});
  Factorization df = factorize(collapse);
  CHECK(df.degeneracySteps.size() == 1);
  CHECK(df.faceSteps.empty());
  CHECK(is_isomorphism(df.iso));

  // a leaf inclusion is a composite of faces only
  ForestMorphism leafIn = make(eta, c2, {0}, {{1}});
  Factorization ff = factorize(leafIn);
  CHECK(ff.degeneracySteps.empty());
  CHECK_FALSE(ff.faceSteps.empty());
}

TEST_CASE("factorize recomposes and lands on elementary pieces") {
  std::vector<Forest> shapes = enumerate_forests(3);
  for (const Forest& f : shapes)
    for (const Forest& g : shapes)
      for (const ForestMorphism& m : hom_set(f, g)) {
        Factorization fz = factorize(m);
        CHECK(compose(fz.face, compose(fz.iso, fz.degeneracy)) == m);
        CHECK(is_isomorphism(fz.iso));
        for (const ElementaryFace& step : fz.faceSteps) {
          CHECK(validate(step.map));
          CHECK(step.map.src.total_edges() + step.map.src.total_vertices() <
                step.map.dst.total_edges() + step.map.dst.total_vertices());
        }
        for (const ElementaryDegeneracy& step : fz.degeneracySteps) {
          CHECK(validate(step.map));
          CHECK(step.map.src.total_edges() == step.map.dst.total_edges() + 1);
        }
      }
}

TEST_CASE("encode/decode round trip") {
  Forest eta = Forest::single(Tree::eta());
  Forest c2 = Forest::single(Tree::corolla(2));
  for (const ForestMorphism& m : hom_set(eta, c2)) {
    ForestMorphism back = decode_morphism(m.encode(), eta, c2);
    CHECK(back == m);
  }
  CHECK_THROWS(decode_morphism("9:0", eta, c2));
}
