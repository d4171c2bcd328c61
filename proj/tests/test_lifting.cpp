#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "forestkit/lifting.hpp"
#include "forestkit/operad.hpp"
#include "forestkit/presheaf.hpp"
#include "forestkit/util.hpp"

using namespace forestkit;

namespace {

Forest fc(const std::string& code) { return parse_forest_code(code); }

PresheafMap to_point(const PresheafPtr& x) {
  PresheafMap m;
  m.src = x;
  m.dst = point_presheaf();
  m.component = [](const Forest&, const Elem&) { return Elem("*"); };
  m.name = x->name() + "->point";
  return m;
}

std::vector<std::string> step_kinds(const AnodyneCertificate& c) {
  std::vector<std::string> out;
  for (const CertificateStep& s : c.steps) out.push_back(s.kind);
  return out;
}

}  // namespace

TEST_CASE("spec_sieve resolves every subobject kind") {
  const Forest f = fc("((L)L)");
  CHECK(spec_sieve({"full", {}}, f) == nullptr);
  CHECK(spec_sieve({"roots", {}}, f)->kind() == SieveKind::Roots);
  CHECK(spec_sieve({"spine", {}}, f)->kind() == SieveKind::Spine);
  CHECK(spec_sieve({"boundary", {}}, f)->kind() == SieveKind::Boundary);
  CHECK(spec_sieve({"inner", {0, 1}}, f)->kind() == SieveKind::InnerHorn);
  CHECK(spec_sieve({"root", {0}}, f)->kind() == SieveKind::RootHorn);
  CHECK(spec_sieve({"generalized", {0}}, f)->kind() ==
        SieveKind::GeneralizedRootHorn);
  CHECK_THROWS_AS(spec_sieve({"mystery", {}}, f), std::invalid_argument);
}

TEST_CASE("presheaf_levels tabulates a representable") {
  const LevelMap lv = presheaf_levels(*representable(fc("(LL)")), 3);
  CHECK(lv.at("0").size() == 1);     // only the empty morphism
  CHECK(lv.at("L").size() == 3);     // one per edge
  CHECK(lv.at("(LL)").size() == 2);  // identity and the leaf swap
  CHECK(lv.count("(LLL)") == 0);     // beyond the bound
}

TEST_CASE("root-to-spine decomposition: single corolla is one pure step") {
  const AnodyneCertificate cert = root_spine_decomposition(fc("(LL)"));
  REQUIRE(cert.steps.size() == 1);
  CHECK(cert.steps[0].kind == "roots");
  CHECK(cert.steps[0].shape.code() == "(LL)");
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("root-to-spine decomposition: bare forests need no steps") {
  for (const char* code : {"0", "L", "L+L", "L+L+L"}) {
    const AnodyneCertificate cert = root_spine_decomposition(fc(code));
    CHECK(cert.steps.empty());
    const VerifyResult r = verify_certificate(cert);
    INFO(code, ": ", r.reason);
    CHECK(r.ok);
  }
}

TEST_CASE("root-to-spine decomposition: two-level tree gives two pure steps") {
  const AnodyneCertificate cert = root_spine_decomposition(fc("((L)L)"));
  REQUIRE(cert.steps.size() == 2);
  CHECK(step_kinds(cert) == std::vector<std::string>{"roots", "roots"});
  // the root corolla attaches before the deeper transversal
  CHECK(cert.steps[0].shape.code() == "(LL)");
  CHECK(cert.steps[1].shape.code() == "(L)+L");
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("root-to-spine decomposition: linear tree gives two pure steps") {
  const AnodyneCertificate cert = root_spine_decomposition(fc("((L))"));
  REQUIRE(cert.steps.size() == 2);
  CHECK(step_kinds(cert) == std::vector<std::string>{"roots", "roots"});
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("root-to-spine decomposition: mixed-depth forest needs a glued cell") {
  // one deep component next to a stump: the deep transversal overlaps
  // previous stages in more than its roots
  const AnodyneCertificate cert = root_spine_decomposition(fc("((L))+()"));
  REQUIRE(cert.steps.size() == 2);
  CHECK(cert.steps[0].kind == "roots");
  CHECK(cert.steps[1].kind == "cell");
  CHECK(!cert.steps[1].boundary.empty());
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("root-to-spine decomposition verifies on every small forest") {
  for (const Forest& f : enumerate_forests(4)) {
    const AnodyneCertificate cert = root_spine_decomposition(f);
    const VerifyResult r = verify_certificate(cert);
    INFO(f.code(), ": ", r.reason);
    CHECK(r.ok);
  }
}

TEST_CASE("certificate verification rejects tampering") {
  const Forest f = fc("((L))+()");
  const AnodyneCertificate good = root_spine_decomposition(f);
  REQUIRE(verify_certificate(good).ok);

  SUBCASE("dropping the final step leaves the target unreached") {
    AnodyneCertificate cert = good;
    cert.steps.pop_back();
    const VerifyResult r = verify_certificate(cert);
    CHECK(!r.ok);
    CHECK(r.failedStep == -3);
  }
  SUBCASE("relabelling a glued step as a pure root step is caught") {
    AnodyneCertificate cert = good;
    REQUIRE(cert.steps[1].kind == "cell");
    cert.steps[1].kind = "roots";
    cert.steps[1].boundary.clear();
    const VerifyResult r = verify_certificate(cert);
    CHECK(!r.ok);
    CHECK(r.failedStep == 1);
  }
  SUBCASE("repeating a step is rejected as lack of progress") {
    AnodyneCertificate cert = good;
    cert.steps.push_back(cert.steps.back());
    const VerifyResult r = verify_certificate(cert);
    CHECK(!r.ok);
    CHECK(r.failedStep == 2);
  }
  SUBCASE("swapping the steps breaks the boundary containment") {
    AnodyneCertificate cert = root_spine_decomposition(fc("((L)L)"));
    REQUIRE(cert.steps.size() == 2);
    std::swap(cert.steps[0], cert.steps[1]);
    const VerifyResult r = verify_certificate(cert);
    CHECK(!r.ok);
    CHECK(r.failedStep == 0);
  }
  SUBCASE("a claimed target beyond the composite is refused") {
    AnodyneCertificate cert = good;
    cert.target = {"full", {}};
    const VerifyResult r = verify_certificate(cert);
    CHECK(!r.ok);
    CHECK(r.failedStep == -3);
  }
}

TEST_CASE("generalized horn certificate for two corollas") {
  const Forest f = fc("(L)+(L)");
  const AnodyneCertificate cert = generalized_horn_certificate(f, {0, 1});
  REQUIRE(cert.steps.size() == 2);
  CHECK(cert.steps[0].kind == "root");
  // the root face of the second corolla keeps its leaf edge
  CHECK(cert.steps[0].shape.code() == "(L)+L");
  CHECK(cert.steps[1].kind == "root");
  CHECK(cert.steps[1].shape.code() == "(L)+(L)");
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("generalized horn on childless vertices collapses to one step") {
  // the root face at a childless vertex factors through its uncap face,
  // so those roots never need a separate attachment
  const AnodyneCertificate cert =
      generalized_horn_certificate(fc("()+()"), {0, 1});
  REQUIRE(cert.steps.size() == 1);
  CHECK(cert.steps[0].shape.code() == "()+()");
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("generalized horn certificates verify on every small forest") {
  for (const Forest& f : enumerate_forests(3)) {
    if (f.empty()) continue;
    for (const std::vector<int>& rs : subsets_by_size(f.component_count())) {
      if (rs.empty()) continue;
      const AnodyneCertificate cert = generalized_horn_certificate(f, rs);
      CHECK(cert.steps.size() >= 1);
      CHECK(cert.steps.size() <= (size_t{1} << (rs.size() - 1)));
      const VerifyResult r = verify_certificate(cert);
      INFO(f.code(), " roots ", int_list(rs), ": ", r.reason);
      CHECK(r.ok);
    }
  }
}

TEST_CASE("generalized horn certificate spans deeper shapes") {
  const AnodyneCertificate cert =
      generalized_horn_certificate(fc("((L)L)+(L)+L"), {0, 1, 2});
  CHECK(cert.steps.size() == 4);
  const VerifyResult r = verify_certificate(cert);
  INFO(r.reason);
  CHECK(r.ok);
}

TEST_CASE("ambient attachment replays a representable certificate") {
  const Forest f = fc("((L)L)");
  const PresheafPtr amb = representable(f);
  const AnodyneCertificate cert = root_spine_decomposition(f);
  AmbientStage stage;
  const ForestMorphism rho = root_inclusion(f);
  stage.generators.emplace_back(rho.src, rho.encode());
  std::string why;
  for (const CertificateStep& st : cert.steps) {
    const bool ok = ambient_attach_step(*amb, stage, st, f.total_edges(), &why);
    INFO(why);
    REQUIRE(ok);
  }
  CHECK(ambient_stage_member(*amb, stage, f, identity_morphism(f).encode()) ==
        false);  // the spine never contains the identity of a deep tree
  // but it does contain every spine element, e.g. the root corolla
  ForestMorphism into;
  into.src = fc("(LL)");
  into.dst = f;
  into.comp = {0};
  into.edge = {{0, 1, 3}};
  require_valid(into, "root corolla into the forest");
  CHECK(ambient_stage_member(*amb, stage, into.src, into.encode()));
}

TEST_CASE("ambient attachment rejects a non-element cell") {
  const Forest f = fc("(LL)");
  const PresheafPtr amb = representable(fc("(L)"));
  AmbientStage stage;
  CertificateStep st;
  st.kind = "roots";
  st.shape = f;
  st.cell = identity_morphism(f).encode();
  std::string why;
  CHECK(!ambient_attach_step(*amb, stage, st, 2, &why));
  CHECK(why.find("ambient element") != std::string::npos);
}

TEST_CASE("identity lifting problem has exactly one lift") {
  const PresheafPtr x = representable(fc("(L)"));
  LiftingProblem q;
  q.i = identity_map(x);
  q.p = identity_map(x);
  q.top = identity_map(x);
  q.bottom = identity_map(x);
  const std::vector<Lift> lifts = enumerate_lifts(q, 2);
  REQUIRE(lifts.size() == 1);
  for (const auto& [code, tbl] : lifts[0])
    for (const auto& [b, vx] : tbl) CHECK(b == vx);
}

TEST_CASE("lifts against the point count the fibre") {
  // B = representable of the corolla, A = its root horn; X the
  // associative-orders nerve over the point.  Lifts of the square are
  // exactly the fillers of the horn family: the two linear orders.
  const Forest c2 = fc("(LL)");
  const PresheafPtr nv = nerve(uass_operad());
  REQUIRE(nv->level(c2).size() == 2);
  const std::shared_ptr<const Sieve> sub =
      subobject(SieveKind::RootHorn, c2, {0});
  const SieveMapSet fams = sieve_maps(*sub, *nv);
  REQUIRE(fams.maps.size() == 1);  // one colour: a unique leaf family

  LiftingProblem q;
  q.i.src = sub;
  q.i.dst = representable(c2);
  q.i.component = [](const Forest&, const Elem& e) { return e; };
  q.i.name = "horn include";
  q.p = to_point(nv);
  q.bottom = to_point(representable(c2));
  q.top.src = sub;
  q.top.dst = nv;
  const std::vector<ForestMorphism> maximal = fams.maximal;
  const std::vector<Elem> values = fams.maps[0];
  q.top.component = [maximal, values, nv, c2](const Forest& h, const Elem& e) {
    const ForestMorphism psi = decode_morphism(e, h, c2);
    for (size_t i = 0; i < maximal.size(); ++i)
      if (auto g = factor_through(psi, maximal[i]))
        return nv->act(*g, values[i]);
    throw std::logic_error("element outside the horn");
  };
  q.top.name = "family";

  const std::vector<Lift> lifts = enumerate_lifts(q, 3);
  CHECK(lifts.size() == 2);
  // each lift restricts to a distinct order on the top cell
  if (lifts.size() == 2)
    CHECK(lifts[0].at(c2.code()).at(identity_morphism(c2).encode()) !=
          lifts[1].at(c2.code()).at(identity_morphism(c2).encode()));
}

TEST_CASE("right fibration check passes for an identity map") {
  const PresheafPtr x = representable(fc("((L)L)"));
  const FibrationReport r = check_right_fibration(identity_map(x), 3);
  CHECK(r.ok);
  CHECK(r.hornsChecked > 0);
  CHECK(r.failures.empty());
}

TEST_CASE("operad nerves over the point are right fibrations") {
  for (const OperadPtr& p : {comm_operad(), uass_operad()}) {
    const FibrationReport r = check_right_fibration(to_point(nerve(p)), 3);
    INFO(p->name());
    CHECK(r.ok);
    CHECK(r.squaresChecked > 0);
  }
}

TEST_CASE("a representable over the point is not a right fibration") {
  const PresheafPtr y = representable(fc("(LL)"));
  const FibrationReport r = check_right_fibration(to_point(y), 2);
  CHECK(!r.ok);
  REQUIRE(!r.failures.empty());
  // a root horn family that does not extend to a map into the corolla
  CHECK(r.failures[0].horn.find("root") != std::string::npos);
}

TEST_CASE("strict root-pullback holds for nerves of closed operads") {
  const PullbackReport ok1 = check_strict_pullback(to_point(nerve(comm_operad())), 3);
  CHECK(ok1.ok);
  const PullbackReport ok2 = check_strict_pullback(identity_map(point_presheaf()), 3);
  CHECK(ok2.ok);
}

TEST_CASE("strict root-pullback fails for a bare representable") {
  const Forest c2 = fc("(LL)");
  // the corolla level has 2 elements but roots x base offers 3
  CHECK(hom_set_cached(c2, c2).size() == 2);
  CHECK(hom_set_cached(fc("L"), c2).size() == 3);
  const PullbackReport r = check_strict_pullback(to_point(representable(c2)), 3);
  CHECK(!r.ok);
  REQUIRE(!r.failures.empty());
}

TEST_CASE("strict root-pullback fails for the associative nerve") {
  // first failure at the binary corolla: two orders over a single root
  const PullbackReport r = check_strict_pullback(to_point(nerve(uass_operad())), 3);
  CHECK(!r.ok);
}

TEST_CASE("horn fillers exist against a verified fibration") {
  // soundness spot check: every root horn of a small forest has a
  // filler in a nerve that passes the fibration check
  const PresheafPtr nv = nerve(comm_operad());
  const PresheafMap p = to_point(nv);
  REQUIRE(check_right_fibration(p, 2).ok);
  for (const Forest& f : enumerate_forests(2)) {
    if (f.empty()) continue;
    for (int c = 0; c < f.component_count(); ++c) {
      const auto horn = subobject(SieveKind::RootHorn, f, {c});
      const SieveMapSet fams = sieve_maps(*horn, *nv);
      for (const std::vector<Elem>& fam : fams.maps) {
        bool filled = false;
        for (const Elem& x : nv->level(f)) {
          bool restricts = true;
          for (size_t i = 0; i < fams.maximal.size() && restricts; ++i)
            if (nv->act(fams.maximal[i], x) != fam[i]) restricts = false;
          if (restricts) filled = true;
        }
        INFO(f.code(), " component ", c);
        CHECK(filled);
      }
    }
  }
}
