#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "forestkit/presheaf.hpp"
#include "forestkit/util.hpp"

using namespace forestkit;

namespace {

const Forest kEmpty;
const Forest kEta = Forest::single(Tree::eta());
const Forest kEta2 = Forest::etas(2);
const Forest kC0 = Forest::single(Tree::corolla(0));
const Forest kC2 = Forest::single(Tree::corolla(2));
const Forest kLin2 = Forest::single(Tree::linear(2));

ForestMorphism edge_hit(const Forest& dst, int edge) {
  ForestMorphism m;
  m.src = kEta;
  m.dst = dst;
  m.comp = {0};
  m.edge = {{edge}};
  require_valid(m, "edge_hit");
  return m;
}

}  // namespace

TEST_CASE("representable levels and actions") {
  PresheafPtr y = representable(kC2);
  CHECK(y->level(kEta).size() == 3);
  CHECK(y->level(kEmpty).size() == 1);
  CHECK(y->level(kC2).size() == 2);
  CHECK(y->level(kC0).empty());

  // action = precomposition
  const Elem id = identity_morphism(kC2).encode();
  for (int e = 0; e < 3; ++e)
    CHECK(y->act(edge_hit(kC2, e), id) == edge_hit(kC2, e).encode());
}

TEST_CASE("the point presheaf is terminal-shaped") {
  PresheafPtr pt = point_presheaf();
  CHECK(pt->level(kEmpty) == std::vector<Elem>{"*"});
  CHECK(pt->level(kC2) == std::vector<Elem>{"*"});
  CHECK(pt->act(edge_hit(kC2, 1), "*") == "*");
}

TEST_CASE("root inclusion hits exactly the root edges") {
  ForestMorphism r = root_inclusion(kC2);
  CHECK(r.src == kEta);
  CHECK(r.edge[0][0] == 0);
  ForestMorphism r2 = root_inclusion(Forest::of({Tree::corolla(1), Tree::eta()}));
  CHECK(r2.src == kEta2);
  CHECK(r2.comp == std::vector<int>{0, 1});
}

TEST_CASE("boundary of the bare edge") {
  auto b = subobject(SieveKind::Boundary, kEta);
  CHECK(b->level(kEta).empty());
  CHECK(b->level(kEmpty).size() == 1);
  CHECK(b->member(identity_morphism(kEta)) == false);
}

TEST_CASE("boundary of a corolla") {
  auto b = subobject(SieveKind::Boundary, kC2);
  CHECK(b->level(kEta).size() == 3);   // every edge inclusion is a face point
  CHECK(b->level(kC2).empty());        // no isomorphism lies in the boundary
  CHECK(b->level(kEta2).size() == 2);  // both pairings onto the two leaves
  CHECK(b->generators().size() == 2);
}

TEST_CASE("inner horn of the 2-chain omits only the inner face") {
  Tree lin2 = Tree::linear(2);
  auto whole = subobject(SieveKind::Boundary, kLin2);
  REQUIRE(lin2.inner_edges() == std::vector<int>{1});
  auto horn = subobject(SieveKind::InnerHorn, kLin2, {0, 1});
  CHECK(horn->generators().size() == 2);

  // the inner face itself is a boundary element but not a horn element
  ForestMorphism innerFace;
  for (const ElementaryFace& f : elementary_faces(kLin2))
    if (f.kind == FaceKind::Inner) innerFace = f.map;
  CHECK(whole->member(innerFace));
  CHECK_FALSE(horn->member(innerFace));
  // every horn element is a boundary element
  for (const Forest& L : enumerate_forests(3))
    for (const Elem& e : horn->level(L))
      CHECK(contains(whole->level(L), e));

  CHECK_THROWS_AS(subobject(SieveKind::InnerHorn, kLin2, {0, 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(subobject(SieveKind::InnerHorn, kC2, {0, 0}),
                  std::invalid_argument);
}

TEST_CASE("root horn of a corolla") {
  auto horn = subobject(SieveKind::RootHorn, kC2, {0});
  // only the leaf face remains, so the bare-edge level sees one element
  CHECK(horn->level(kEta).size() == 1);
  CHECK(horn->level(kEta)[0] == edge_hit(kC2, 0).encode());
  CHECK(horn->level(kEta2).empty());
  CHECK_THROWS_AS(subobject(SieveKind::RootHorn, kC2, {1}), std::invalid_argument);
}

TEST_CASE("generalized root horn equals root horn for one component") {
  auto a = subobject(SieveKind::RootHorn, kC2, {0});
  auto b = subobject(SieveKind::GeneralizedRootHorn, kC2, {0});
  for (const Forest& L : enumerate_forests(2))
    CHECK(a->level(L) == b->level(L));
  CHECK_THROWS_AS(subobject(SieveKind::GeneralizedRootHorn, kC2, {}),
                  std::invalid_argument);
}

TEST_CASE("generalized root horn on a two-component forest") {
  Forest f = Forest::of({Tree::corolla(1), Tree::corolla(1)});
  auto both = subobject(SieveKind::GeneralizedRootHorn, f, {0, 1});
  auto one = subobject(SieveKind::GeneralizedRootHorn, f, {0});
  // dropping more root faces can only shrink the sieve
  for (const Forest& L : enumerate_forests(3)) {
    for (const Elem& e : both->level(L)) CHECK(contains(one->level(L), e));
  }
  CHECK(both->generators().size() + 1 == one->generators().size());
}

TEST_CASE("spine membership on corollas and chains") {
  auto spc = subobject(SieveKind::Spine, kC2);
  CHECK(spc->member(identity_morphism(kC2)));  // corolla spine is everything

  auto spl = subobject(SieveKind::Spine, kLin2);
  CHECK_FALSE(spl->member(identity_morphism(kLin2)));
  Forest c1 = Forest::single(Tree::corolla(1));
  // the two unary-vertex corollas lie in the spine, the long edge pair
  // does not
  auto in_spine = [&](int a, int b) {
    ForestMorphism m;
    m.src = c1;
    m.dst = kLin2;
    m.comp = {0};
    m.edge = {{a, b}};
    require_valid(m, "chord");
    return spl->member(m);
  };
  CHECK(in_spine(0, 1));
  CHECK(in_spine(1, 2));
  CHECK_FALSE(in_spine(0, 2));
  CHECK(in_spine(0, 0));  // degenerate chords land in the first corolla
  CHECK(in_spine(1, 1));
  CHECK(spl->member(edge_hit(kLin2, 0)));
  CHECK(spl->member(edge_hit(kLin2, 2)));
}

TEST_CASE("spine of a two-component forest contains joint elements") {
  Forest f = Forest::of({Tree::corolla(2), Tree::corolla(0)});
  auto sp = subobject(SieveKind::Spine, f);
  // both components are corollas: the whole representable is the spine
  CHECK(sp->member(identity_morphism(f)));

  Forest g = Forest::of({Tree::linear(2), Tree::corolla(0)});
  auto spg = subobject(SieveKind::Spine, g);
  CHECK_FALSE(spg->member(identity_morphism(g)));
  // restricting to the stump component alone stays inside
  ForestMorphism stumpIn;
  stumpIn.src = kC0;
  stumpIn.dst = g;
  stumpIn.comp = {g.component(0) == Tree::corolla(0) ? 0 : 1};
  stumpIn.edge = {{0}};
  require_valid(stumpIn, "stumpIn");
  CHECK(spg->member(stumpIn));
}

TEST_CASE("sieves are closed under the presheaf action") {
  auto horn = subobject(SieveKind::RootHorn, kLin2, {0});
  for (const Forest& L : enumerate_forests(3))
    for (const Elem& e : horn->level(L))
      for (const ElementaryFace& d : elementary_faces(L))
        CHECK(contains(horn->level(d.map.src), horn->act(d.map, e)));
}

TEST_CASE("truncation agrees with the original presheaf") {
  PresheafPtr y = representable(kC2);
  auto t = TruncatedPresheaf::truncate(y, 3);
  for (const Forest& f : enumerate_forests(3)) {
    CHECK(t->level(f) == y->level(f));
    for (const Forest& g : enumerate_forests(3))
      for (const ForestMorphism& a : hom_set_cached(f, g))
        for (const Elem& x : y->level(g))
          CHECK(t->act(a, x) == y->act(a, x));
  }
  CHECK_THROWS_AS(t->level(enumerate_forests(4).back()), std::out_of_range);
}

TEST_CASE("naturality holds for truncation inclusions and fails for junk") {
  PresheafPtr y = representable(kLin2);
  PresheafMap good = identity_map(y);
  CHECK(check_naturality(good, 3));

  // cyclically shifting one level breaks a square against a face
  PresheafMap bad{y, y,
                  [y](const Forest& f, const Elem& e) {
                    if (!(f == kEta)) return e;
                    const std::vector<Elem> lv = y->level(kEta);
                    for (size_t i = 0; i < lv.size(); ++i)
                      if (lv[i] == e) return lv[(i + 1) % lv.size()];
                    return e;
                  },
                  "shift"};
  std::string why;
  CHECK_FALSE(check_naturality(bad, 3, &why));
  CHECK_FALSE(why.empty());
}

TEST_CASE("normal monos: boundary inclusion yes, global sections no") {
  auto b = subobject(SieveKind::Boundary, kC2);
  PresheafMap inc{b, representable(kC2),
                  [](const Forest&, const Elem& e) { return e; }, "inc"};
  CHECK(is_normal_mono(inc, 3));

  // the empty representable into the point: the swap fixes the target
  // point lying outside the image
  PresheafMap sections{representable(kEmpty), point_presheaf(),
                       [](const Forest&, const Elem&) { return std::string("*"); },
                       "sections"};
  std::string why;
  CHECK_FALSE(is_normal_mono(sections, 2, &why));
  CHECK(why.find("fixes") != std::string::npos);

  PresheafMap collapse{representable(kC2), point_presheaf(),
                       [](const Forest&, const Elem&) { return std::string("*"); },
                       "collapse"};
  CHECK_FALSE(is_normal_mono(collapse, 2, &why));
  CHECK(why.find("injective") != std::string::npos);
}

TEST_CASE("pushout glues two edges along their boundary") {
  auto b = subobject(SieveKind::Boundary, kEta);
  PresheafPtr y = representable(kEta);
  PresheafMap f{b, y, [](const Forest&, const Elem& e) { return e; }, "inc1"};
  PresheafMap g{b, y, [](const Forest&, const Elem& e) { return e; }, "inc2"};
  PushoutResult p = pushout(f, g, 2);
  // two distinct edges, one shared empty level; no two-component
  // element maps into a single edge (independence)
  CHECK(p.object->level(kEta).size() == 2);
  CHECK(p.object->level(kEmpty).size() == 1);
  CHECK(p.object->level(kEta2).empty());
  CHECK(check_naturality(p.fromB, 2));
  CHECK(check_naturality(p.fromC, 2));

  PresheafSquare s{f, g, p.fromB, p.fromC};
  CHECK(is_pushout(s, 2));

  // gluing both copies to a single edge is not a pushout
  PresheafSquare wrong{f, g, identity_map(y), identity_map(y)};
  std::string why;
  CHECK_FALSE(is_pushout(wrong, 2, &why));
  CHECK_FALSE(why.empty());
}

TEST_CASE("a commuting square need not be a pushout") {
  auto b = subobject(SieveKind::Boundary, kC2);
  PresheafPtr y = representable(kC2);
  PresheafMap inc{b, y, [](const Forest&, const Elem& e) { return e; }, "inc"};
  PresheafSquare s{inc, inc, identity_map(y), identity_map(y)};
  // B = C = D = Y(C2) over the boundary: commutes, but at the corolla's
  // own level the honest pushout has two copies of the interior
  std::string why;
  CHECK(is_pushout(s, 2));  // too shallow to see the interior
  CHECK_FALSE(is_pushout(s, 3, &why));
  CHECK_FALSE(why.empty());
}

TEST_CASE("u_star is the product over components") {
  PresheafPtr y = representable(kC2);
  PresheafPtr p = u_star(y);
  CHECK(p->level(kEmpty).size() == 1);
  CHECK(p->level(kEta).size() == 3);
  CHECK(p->level(kEta2).size() == 9);
  Forest mixed = Forest::of({Tree::eta(), Tree::corolla(2)});
  CHECK(p->level(mixed).size() == 6);

  // the component swap permutes tuple entries
  ForestMorphism swap;
  swap.src = kEta2;
  swap.dst = kEta2;
  swap.comp = {1, 0};
  swap.edge = {{0}, {0}};
  require_valid(swap, "swap");
  for (const Elem& e : p->level(kEta2)) {
    Elem moved = p->act(swap, e);
    CHECK(p->act(swap, moved) == e);
  }
}

TEST_CASE("concatenation product of two bare-edge representables") {
  PresheafPtr x = representable(kEta);
  PresheafPtr prod = concat_product(x, x);
  CHECK(prod->level(kEta2).size() == 2);  // pinned: which component is which
  // one factor can absorb everything while the other takes the empty part
  CHECK(prod->level(kEta).size() == 2);
  CHECK(prod->level(kEmpty).size() == 1);
}

TEST_CASE("concatenation of representables is the concatenated representable") {
  struct Pair {
    Forest a, b;
  };
  const std::vector<Pair> pairs = {
      {kEta, kEta}, {kEta, kC2}, {kC0, kC2}, {kEta2, kC0}};
  for (const Pair& pr : pairs) {
    PresheafPtr prod = concat_product(representable(pr.a), representable(pr.b));
    PresheafPtr whole = representable(pr.a.concat(pr.b));
    for (const Forest& L : enumerate_forests(3))
      CHECK(prod->level(L).size() == whole->level(L).size());
  }
}

TEST_CASE("concatenation product action is natural") {
  PresheafPtr prod = concat_product(representable(kEta), representable(kC2));
  for (const Forest& L : enumerate_forests(3))
    for (const ElementaryFace& d : elementary_faces(L))
      for (const Elem& e : prod->level(L))
        CHECK(contains(prod->level(d.map.src), prod->act(d.map, e)));
}

TEST_CASE("coend oracle matches the direct formula on small shapes") {
  PresheafPtr x = representable(kEta);
  PresheafPtr y = representable(kC0);
  PresheafPtr prod = concat_product(x, y);
  for (const Forest& f : enumerate_forests(2)) {
    std::vector<Elem> direct = prod->level(f);
    std::vector<Elem> viaCoend = concat_oracle(x, y, f, 1);
    CHECK(direct == viaCoend);
  }
}

TEST_CASE("boundary of a concatenation decomposes as a union") {
  CHECK(boundary_concat_check(kEta, kEta));
  CHECK(boundary_concat_check(kEta, kC0));
  CHECK(boundary_concat_check(kC0, kC2));
  std::string why;
  CHECK(boundary_concat_check(kEmpty, kC2, &why));
}

TEST_CASE("tracked concatenation remembers component provenance") {
  TrackedConcat tc = concat_tracked(Forest::single(Tree::corolla(1)), kEta2);
  CHECK(tc.forest.code() == "(L)+L+L");
  CHECK(tc.fComp.size() == 1);
  CHECK(tc.gComp.size() == 2);
  CHECK(tc.forest.component(tc.fComp[0]).code() == "(L)");

  // two equal components: the first argument claims the earlier slot
  TrackedConcat same = concat_tracked(kEta, kEta);
  CHECK(same.fComp == std::vector<int>{0});
  CHECK(same.gComp == std::vector<int>{1});
}

TEST_CASE("restrict_morphism keeps the components over a target subset") {
  // canonical orders: source () + L + L, target () + (LL)
  Forest src = Forest::of({Tree::eta(), Tree::eta(), Tree::corolla(0)});
  Forest dst = Forest::of({Tree::corolla(2), Tree::corolla(0)});
  REQUIRE(src.code() == "()+L+L");
  REQUIRE(dst.code() == "()+(LL)");

  ForestMorphism m;
  m.src = src;
  m.dst = dst;
  m.comp = {0, 1, 1};  // stump -> stump, each eta -> a corolla leaf
  m.edge = {{0}, {1}, {2}};
  require_valid(m, "restrict test");

  ForestMorphism onlyCor = restrict_morphism(m, {1});
  CHECK(onlyCor.src.code() == "L+L");
  CHECK(onlyCor.dst.code() == "(LL)");
  CHECK(onlyCor.comp == std::vector<int>{0, 0});
  ForestMorphism onlyStump = restrict_morphism(m, {0});
  CHECK(onlyStump.src.code() == "()");
  CHECK(onlyStump.dst.code() == "()");
  ForestMorphism nothing = restrict_morphism(m, {});
  CHECK(nothing.src.empty());
}

TEST_CASE("sieve map enumeration: maximal elements and matchings") {
  // spine of the 2-chain into its own representable: one map per
  // composable pair of edge chords
  auto sp = subobject(SieveKind::Spine, kLin2);
  SieveMapSet maps = sieve_maps(*sp, *representable(kLin2));
  CHECK(maps.maximal.size() == 2);
  CHECK(maps.maps.size() == 10);

  // boundary of the bare edge into the point: a single map
  auto b = subobject(SieveKind::Boundary, kEta);
  SieveMapSet single = sieve_maps(*b, *point_presheaf());
  CHECK(single.maximal.size() == 1);
  CHECK(single.maps.size() == 1);

  // root horn of a corolla into a representable misses no fillers
  auto horn = subobject(SieveKind::RootHorn, kC2, {0});
  SieveMapSet hm = sieve_maps(*horn, *representable(kEta));
  CHECK(hm.maximal.size() == 1);
  // values: all maps eta -> eta from the single maximal element
  CHECK(hm.maps.size() == 1);
}
