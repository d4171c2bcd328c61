#include "forestkit/lifting.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "forestkit/util.hpp"

using nlohmann::json;

namespace forestkit {

LevelMap presheaf_levels(const Presheaf& x, int bound) {
  LevelMap out;
  for (const Forest& f : enumerate_forests(bound)) out[f.code()] = x.level(f);
  return out;
}

std::shared_ptr<const Sieve> spec_sieve(const SubobjectSpec& spec,
                                        const Forest& shape) {
  if (spec.kind == "full") return nullptr;
  if (spec.kind == "roots") return subobject(SieveKind::Roots, shape);
  if (spec.kind == "spine") return subobject(SieveKind::Spine, shape);
  if (spec.kind == "boundary") return subobject(SieveKind::Boundary, shape);
  if (spec.kind == "inner")
    return subobject(SieveKind::InnerHorn, shape, spec.data);
  if (spec.kind == "root")
    return subobject(SieveKind::RootHorn, shape, spec.data);
  if (spec.kind == "generalized")
    return subobject(SieveKind::GeneralizedRootHorn, shape, spec.data);
  throw std::invalid_argument("unknown subobject kind: " + spec.kind);
}

namespace {

// Monic means no two source edges share an image, even across source
// components (several source components may land in one target tree).
bool is_mono_arrow(const ForestMorphism& m) {
  std::set<std::pair<int, int>> seen;
  for (size_t i = 0; i < m.edge.size(); ++i)
    for (int e : m.edge[i])
      if (!seen.insert({m.comp[i], e}).second) return false;
  return true;
}

std::string mono_key(const ForestMorphism& m) {
  return m.src.code() + "|" + m.encode();
}

// Keep only the maximal monos under mutual factorization; within a
// class of mutually factoring ones keep the lexicographically least.
std::vector<ForestMorphism> dedupe_monos(const std::vector<ForestMorphism>& ms) {
  std::vector<ForestMorphism> out;
  for (size_t i = 0; i < ms.size(); ++i) {
    bool keep = true;
    for (size_t j = 0; j < ms.size() && keep; ++j) {
      if (i == j) continue;
      if (!factor_through(ms[i], ms[j])) continue;
      if (!factor_through(ms[j], ms[i])) keep = false;
      else if (mono_key(ms[j]) < mono_key(ms[i])) keep = false;
    }
    if (keep) out.push_back(ms[i]);
  }
  std::sort(out.begin(), out.end(),
            [](const ForestMorphism& a, const ForestMorphism& b) {
              return mono_key(a) < mono_key(b);
            });
  return out;
}

ForestMorphism empty_into(const Forest& dst) {
  ForestMorphism m;
  m.src = Forest();
  m.dst = dst;
  return m;
}

// ---------------------------------------------------------------------------
// cut cells: basic subforests of f whose parts are whole vertex regions
// (a capped edge with its inputs) or bare leaf edges, one transversal
// choice per component

struct TreeCut {
  std::vector<int> vertices;  // capped edges kept with their whole region
  std::vector<int> etas;      // uncapped edges kept bare
};

bool cut_is_bare_root(const TreeCut& c) {
  return c.vertices.empty() && c.etas.size() == 1 && c.etas[0] == 0;
}

// Transversals of the subtree at edge e.  A capped edge contributes its
// vertex region or any combination of child transversals; the
// combination taking the bare edge at every child is dropped because
// its image lies inside the vertex region, and there is no way past a
// childless vertex.
std::vector<TreeCut> cuts_at(const Tree& t, int e) {
  if (!t.capped(e)) return {TreeCut{{}, {e}}};
  std::vector<TreeCut> out;
  out.push_back(TreeCut{{e}, {}});
  const std::vector<int>& kids = t.children(e);
  if (kids.empty()) return out;
  std::vector<std::vector<TreeCut>> kd;
  for (int c : kids) kd.push_back(cuts_at(t, c));
  std::vector<size_t> idx(kids.size(), 0);
  while (true) {
    TreeCut combo;
    bool allBare = true;
    for (size_t i = 0; i < kids.size(); ++i) {
      const TreeCut& kc = kd[i][idx[i]];
      combo.vertices.insert(combo.vertices.end(), kc.vertices.begin(),
                            kc.vertices.end());
      combo.etas.insert(combo.etas.end(), kc.etas.begin(), kc.etas.end());
      if (!(kc.vertices.empty() && kc.etas.size() == 1 && kc.etas[0] == kids[i]))
        allBare = false;
    }
    if (!allBare) {
      std::sort(combo.vertices.begin(), combo.vertices.end());
      std::sort(combo.etas.begin(), combo.etas.end());
      out.push_back(std::move(combo));
    }
    size_t i = 0;
    while (i < kids.size() && ++idx[i] == kd[i].size()) idx[i++] = 0;
    if (i == kids.size()) break;
  }
  return out;
}

struct Part {
  int comp;                     // target component of f
  bool eta;                     // bare-edge part?
  int rootEdge;                 // target edge (capped for a vertex part)
  std::vector<int> childEdges;  // inputs of the vertex (empty for eta)
  int shapeComp = -1;           // position inside the cell shape
  int shapeRoot = -1;
  std::vector<int> shapeChild;
};

struct Cell {
  std::vector<Part> parts;
  ForestMorphism chi;  // cell shape -> f, monic
  int depthSum = 0;
};

int edge_depth(const Tree& t, int e) {
  int d = 0;
  while (t.parent(e) >= 0) {
    e = t.parent(e);
    ++d;
  }
  return d;
}

RawTree corolla_raw(int k) {
  RawTree r;
  r.parent.assign(1 + k, 0);
  r.parent[0] = -1;
  r.capped.assign(1 + k, 0);
  r.capped[0] = 1;
  return r;
}

RawTree eta_raw() { return RawTree{{-1}, {0}}; }

Cell make_cell(const Forest& f, const std::vector<TreeCut>& cuts) {
  Cell cell;
  for (int j = 0; j < f.component_count(); ++j) {
    const Tree& t = f.component(j);
    for (int v : cuts[j].vertices) {
      Part p{j, false, v, t.children(v), -1, -1, {}};
      cell.depthSum += edge_depth(t, v);
      cell.parts.push_back(std::move(p));
    }
    for (int e : cuts[j].etas) {
      cell.parts.push_back(Part{j, true, e, {}, -1, -1, {}});
      cell.depthSum += edge_depth(t, e);
    }
  }
  std::vector<RawTree> raws;
  for (const Part& p : cell.parts)
    raws.push_back(p.eta ? eta_raw()
                         : corolla_raw(static_cast<int>(p.childEdges.size())));
  const BuiltForest bf = build_forest(raws);
  ForestMorphism chi;
  chi.src = bf.forest;
  chi.dst = f;
  chi.comp.assign(bf.forest.component_count(), -1);
  chi.edge.assign(bf.forest.component_count(), {});
  for (size_t i = 0; i < cell.parts.size(); ++i) {
    Part& p = cell.parts[i];
    const int sc = bf.comp[i];
    p.shapeComp = sc;
    chi.comp[sc] = p.comp;
    chi.edge[sc].assign(raws[i].parent.size(), -1);
    p.shapeRoot = bf.edge[i][0];
    chi.edge[sc][p.shapeRoot] = p.rootEdge;
    for (size_t k = 0; k < p.childEdges.size(); ++k) {
      const int se = bf.edge[i][1 + k];
      p.shapeChild.push_back(se);
      chi.edge[sc][se] = p.childEdges[k];
    }
  }
  require_valid(chi, "cut cell");
  cell.chi = std::move(chi);
  return cell;
}

// A piece of one part: the whole part, or a single bare edge inside it.
struct SubPart {
  int part;
  bool whole;
  int edge;  // target edge when !whole
};

std::vector<SubPart> normalize_subparts(std::vector<SubPart> subs) {
  std::sort(subs.begin(), subs.end(), [](const SubPart& a, const SubPart& b) {
    if (a.part != b.part) return a.part < b.part;
    if (a.whole != b.whole) return a.whole;
    return a.edge < b.edge;
  });
  subs.erase(std::unique(subs.begin(), subs.end(),
                         [](const SubPart& a, const SubPart& b) {
                           return a.part == b.part && a.whole == b.whole &&
                                  a.edge == b.edge;
                         }),
             subs.end());
  // a whole part subsumes its single edges
  std::vector<SubPart> out;
  for (const SubPart& s : subs) {
    bool covered = false;
    for (const SubPart& w : subs)
      if (w.whole && w.part == s.part && !s.whole) covered = true;
    if (!covered) out.push_back(s);
  }
  return out;
}

ForestMorphism mono_from_subparts(const Cell& cell, const Forest& cellShape,
                                  const std::vector<SubPart>& subs) {
  if (subs.empty()) return empty_into(cellShape);
  std::vector<RawTree> raws;
  std::vector<int> tgtComp;
  std::vector<std::vector<int>> tgtEdges;  // into the cell shape
  for (const SubPart& s : subs) {
    const Part& p = cell.parts[s.part];
    if (s.whole && !p.eta) {
      raws.push_back(corolla_raw(static_cast<int>(p.childEdges.size())));
      std::vector<int> es = {p.shapeRoot};
      es.insert(es.end(), p.shapeChild.begin(), p.shapeChild.end());
      tgtComp.push_back(p.shapeComp);
      tgtEdges.push_back(std::move(es));
    } else {
      raws.push_back(eta_raw());
      int se;
      if (s.whole || s.edge == p.rootEdge) {
        se = p.shapeRoot;
      } else {
        se = -1;
        for (size_t k = 0; k < p.childEdges.size(); ++k)
          if (p.childEdges[k] == s.edge) se = p.shapeChild[k];
        if (se < 0) throw std::logic_error("meet edge outside its part");
      }
      tgtComp.push_back(p.shapeComp);
      tgtEdges.push_back({se});
    }
  }
  const BuiltForest bf = build_forest(raws);
  ForestMorphism m;
  m.src = bf.forest;
  m.dst = cellShape;
  m.comp.assign(bf.forest.component_count(), -1);
  m.edge.assign(bf.forest.component_count(), {});
  for (size_t i = 0; i < raws.size(); ++i) {
    const int sc = bf.comp[i];
    m.comp[sc] = tgtComp[i];
    m.edge[sc].assign(raws[i].parent.size(), -1);
    for (size_t e = 0; e < raws[i].parent.size(); ++e)
      m.edge[sc][bf.edge[i][e]] = tgtEdges[i][e];
  }
  require_valid(m, "cell overlap");
  return m;
}

// Overlap of the cell with the root inclusion: the bare root edges of
// the components whose root edge the cell touches.
std::vector<SubPart> meet_with_roots(const Cell& cell) {
  std::vector<SubPart> subs;
  for (size_t i = 0; i < cell.parts.size(); ++i) {
    const Part& p = cell.parts[i];
    if (p.rootEdge != 0) continue;
    if (p.eta) subs.push_back({static_cast<int>(i), true, -1});
    else subs.push_back({static_cast<int>(i), false, 0});
  }
  return normalize_subparts(std::move(subs));
}

// Pairwise region intersection of two cells over the same target:
// vertex regions meet in the whole region (same vertex) or a shared
// edge; a bare edge meets a region containing it.
std::vector<SubPart> meet_cells(const Cell& a, const Cell& b) {
  std::vector<SubPart> subs;
  for (size_t i = 0; i < a.parts.size(); ++i) {
    const Part& pa = a.parts[i];
    for (const Part& pb : b.parts) {
      if (pa.comp != pb.comp) continue;
      const int ia = static_cast<int>(i);
      if (!pa.eta && !pb.eta) {
        if (pa.rootEdge == pb.rootEdge) subs.push_back({ia, true, -1});
        else if (contains(pa.childEdges, pb.rootEdge))
          subs.push_back({ia, false, pb.rootEdge});
        else if (contains(pb.childEdges, pa.rootEdge))
          subs.push_back({ia, false, pa.rootEdge});
      } else if (!pa.eta && pb.eta) {
        if (pb.rootEdge == pa.rootEdge || contains(pa.childEdges, pb.rootEdge))
          subs.push_back({ia, false, pb.rootEdge});
      } else if (pa.eta && !pb.eta) {
        if (pa.rootEdge == pb.rootEdge || contains(pb.childEdges, pa.rootEdge))
          subs.push_back({ia, true, -1});
      } else {
        if (pa.rootEdge == pb.rootEdge) subs.push_back({ia, true, -1});
      }
    }
  }
  return normalize_subparts(std::move(subs));
}

Elem boundary_entry(const ForestMorphism& m) {
  return json{{"src", m.src.code()}, {"map", m.encode()}}.dump();
}

ForestMorphism decode_boundary_entry(const Elem& e, const Forest& shape) {
  const json j = json::parse(e);
  const Forest src = parse_forest_code(j.at("src").get<std::string>());
  return decode_morphism(j.at("map").get<std::string>(), src, shape);
}

}  // namespace

AnodyneCertificate root_spine_decomposition(const Forest& f) {
  AnodyneCertificate cert;
  cert.shape = f;
  cert.source = {"roots", {}};
  cert.target = {"spine", {}};
  cert.label = "roots->spine " + f.code();

  // one transversal choice per component
  std::vector<std::vector<TreeCut>> perComp;
  for (const Tree& t : f.components()) perComp.push_back(cuts_at(t, 0));
  std::vector<Cell> cells;
  if (!perComp.empty()) {
    std::vector<size_t> idx(perComp.size(), 0);
    while (true) {
      std::vector<TreeCut> choice;
      bool allBare = true;
      for (size_t j = 0; j < perComp.size(); ++j) {
        choice.push_back(perComp[j][idx[j]]);
        if (!cut_is_bare_root(choice.back())) allBare = false;
      }
      // the all-bare choice is the root inclusion itself
      if (!allBare) cells.push_back(make_cell(f, choice));
      size_t j = 0;
      while (j < perComp.size() && ++idx[j] == perComp[j].size()) idx[j++] = 0;
      if (j == perComp.size()) break;
    }
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    const int sa = a.chi.src.total_edges() + a.chi.src.total_vertices();
    const int sb = b.chi.src.total_edges() + b.chi.src.total_vertices();
    if (sa != sb) return sa < sb;
    if (a.depthSum != b.depthSum) return a.depthSum < b.depthSum;
    if (a.chi.src.code() != b.chi.src.code())
      return a.chi.src.code() < b.chi.src.code();
    return a.chi.encode() < b.chi.encode();
  });

  std::vector<const Cell*> placed;
  for (const Cell& cell : cells) {
    const Forest& shape = cell.chi.src;
    std::vector<ForestMorphism> meets;
    {
      const std::vector<SubPart> sub = meet_with_roots(cell);
      if (!sub.empty()) meets.push_back(mono_from_subparts(cell, shape, sub));
    }
    for (const Cell* earlier : placed) {
      const std::vector<SubPart> sub = meet_cells(cell, *earlier);
      if (!sub.empty()) meets.push_back(mono_from_subparts(cell, shape, sub));
    }
    meets = dedupe_monos(meets);
    if (meets.empty()) meets.push_back(empty_into(shape));

    const ForestMorphism rho = root_inclusion(shape);
    bool pure = false;
    for (const ForestMorphism& m : meets)
      if (factor_through(rho, m)) pure = true;
    for (const ForestMorphism& m : meets)
      if (!factor_through(m, rho)) pure = false;

    CertificateStep step;
    step.shape = shape;
    step.cell = cell.chi.encode();
    if (pure) {
      step.kind = "roots";
    } else {
      step.kind = "cell";
      for (const ForestMorphism& m : meets)
        step.boundary.push_back(boundary_entry(m));
    }
    cert.steps.push_back(std::move(step));
    placed.push_back(&cell);
  }
  return cert;
}

namespace {

void ghc_steps(const Forest& f, const std::vector<int>& roots,
               const std::optional<ForestMorphism>& post, const Forest& top,
               std::vector<CertificateStep>& out) {
  if (roots.size() == 1) {
    CertificateStep step;
    step.kind = "root";
    step.shape = f;
    step.data = roots;
    step.cell = (post ? *post : identity_morphism(f)).encode();
    out.push_back(std::move(step));
    return;
  }
  const int r = roots.back();
  std::vector<int> rest(roots.begin(), roots.end() - 1);

  // A childless vertex keeps an uncap face in every root horn, and the
  // component's root face factors through it, so dropping such a root
  // does not change the horn: recurse on the remaining roots directly.
  const Tree& rt = f.component(r);
  if (rt.capped(0) && rt.children(0).empty()) {
    ghc_steps(f, rest, post, top, out);
    return;
  }

  const ElementaryFace* rootFace = nullptr;
  const std::vector<ElementaryFace> faces = elementary_faces(f);
  for (const ElementaryFace& fc : faces)
    if (fc.kind == FaceKind::Root && fc.component == r) rootFace = &fc;
  if (!rootFace) throw std::logic_error("missing root face");

  // the untouched components of the face carry the remaining roots
  std::vector<int> restBelow;
  for (int c : rest) {
    int found = -1;
    for (size_t i = 0; i < rootFace->map.comp.size(); ++i)
      if (rootFace->map.comp[i] == c &&
          static_cast<int>(rootFace->map.edge[i].size()) ==
              f.component(c).edge_count())
        found = static_cast<int>(i);
    if (found < 0) throw std::logic_error("root face lost a horn component");
    restBelow.push_back(found);
  }
  std::sort(restBelow.begin(), restBelow.end());

  const ForestMorphism lifted =
      post ? compose(*post, rootFace->map) : rootFace->map;
  ghc_steps(rootFace->map.src, restBelow, lifted, top, out);
  ghc_steps(f, rest, post, top, out);
}

}  // namespace

AnodyneCertificate generalized_horn_certificate(const Forest& f,
                                                std::vector<int> roots) {
  sort_unique(roots);
  if (roots.empty()) throw std::invalid_argument("empty root set");
  for (int c : roots)
    if (c < 0 || c >= f.component_count())
      throw std::invalid_argument("root component out of range");
  AnodyneCertificate cert;
  cert.shape = f;
  cert.source = {"generalized", roots};
  cert.target = {"full", {}};
  cert.label = "horn->full " + f.code() + " roots " + int_list(roots);
  ghc_steps(f, roots, std::nullopt, f, cert.steps);
  return cert;
}

namespace {

class FixedLevels final : public Presheaf {
 public:
  FixedLevels(std::string name, LevelMap levels,
              std::function<Elem(const ForestMorphism&, const Elem&)> act)
      : name_(std::move(name)), levels_(std::move(levels)), act_(std::move(act)) {}
  std::string name() const override { return name_; }
  std::vector<Elem> level(const Forest& f) const override {
    auto it = levels_.find(f.code());
    if (it == levels_.end())
      throw std::out_of_range(name_ + ": no level " + f.code());
    return it->second;
  }
  Elem act(const ForestMorphism& arrow, const Elem& x) const override {
    return act_(arrow, x);
  }

 private:
  std::string name_;
  LevelMap levels_;
  std::function<Elem(const ForestMorphism&, const Elem&)> act_;
};

// morphism elements into `shape` restrict by composition
std::function<Elem(const ForestMorphism&, const Elem&)> compose_act(
    const Forest& shape) {
  return [shape](const ForestMorphism& arrow, const Elem& x) {
    return compose(decode_morphism(x, arrow.dst, shape), arrow).encode();
  };
}

struct StepContext {
  std::vector<ForestMorphism> bgens;  // boundary generators into the shape
  ForestMorphism chi;                 // shape -> ambient shape
};

bool factors_any(const ForestMorphism& psi,
                 const std::vector<ForestMorphism>& gens) {
  for (const ForestMorphism& g : gens)
    if (factor_through(psi, g)) return true;
  return false;
}

}  // namespace

VerifyResult verify_certificate(const AnodyneCertificate& cert,
                                const VerifyOptions& opts) {
  VerifyResult res;
  const Forest& F = cert.shape;
  const int bound = F.total_edges();

  std::vector<ForestMorphism> gens;
  try {
    auto sv = spec_sieve(cert.source, F);
    if (!sv) {
      res.failedStep = -2;
      res.reason = "source must be a generator-backed subobject";
      return res;
    }
    if (sv->kind() == SieveKind::Spine) {
      res.failedStep = -2;
      res.reason = "spine source is not generator-backed";
      return res;
    }
    gens = sv->generators();
  } catch (const std::exception& e) {
    res.failedStep = -2;
    res.reason = std::string("bad source: ") + e.what();
    return res;
  }

  auto stageMember = [&gens](const ForestMorphism& phi) {
    return factors_any(phi, gens);
  };

  for (size_t i = 0; i < cert.steps.size(); ++i) {
    const CertificateStep& st = cert.steps[i];
    auto fail = [&](const std::string& why) {
      res.failedStep = static_cast<int>(i);
      res.reason = "step " + std::to_string(i) + " (" + st.kind + " on " +
                   st.shape.code() + "): " + why;
      return res;
    };
    StepContext cx;
    try {
      cx.chi = decode_morphism(st.cell, st.shape, F);
      require_valid(cx.chi, "certificate cell");
      if (st.kind == "cell") {
        for (const Elem& e : st.boundary)
          cx.bgens.push_back(decode_boundary_entry(e, st.shape));
        for (const ForestMorphism& g : cx.bgens)
          require_valid(g, "boundary generator");
      } else {
        SieveKind k;
        if (st.kind == "inner") k = SieveKind::InnerHorn;
        else if (st.kind == "root") k = SieveKind::RootHorn;
        else if (st.kind == "generalized") k = SieveKind::GeneralizedRootHorn;
        else if (st.kind == "roots") k = SieveKind::Roots;
        else return fail("unknown step kind");
        cx.bgens = subobject(k, st.shape, st.data)->generators();
      }
    } catch (const std::exception& e) {
      return fail(std::string("malformed: ") + e.what());
    }
    if (!is_mono_arrow(cx.chi)) return fail("cell is not monic");
    if (stageMember(cx.chi)) return fail("cell already lies in the stage");

    // boundary maps into the stage (generators generate the sieve)
    for (const ForestMorphism& g : cx.bgens)
      if (!stageMember(compose(cx.chi, g)))
        return fail("boundary generator escapes the stage (source " +
                    g.src.code() + ")");

    // the declared boundary is exactly the preimage of the stage.
    // Levels up to the cell size decide this at every level: any test
    // arrow factors through one of these after a split-epi degeneracy,
    // and both sides are closed under precomposition.
    long long fresh = 0;
    const int stepBound = st.shape.total_edges();
    for (const Forest& H : enumerate_forests(stepBound)) {
      for (const ForestMorphism& psi : hom_set_cached(H, st.shape)) {
        const bool inStage = stageMember(compose(cx.chi, psi));
        const bool inBoundary = factors_any(psi, cx.bgens);
        if (inStage && !inBoundary)
          return fail("stage preimage exceeds the declared boundary at " +
                      H.code());
        if (inBoundary && !inStage)
          return fail("declared boundary escapes the stage at " + H.code());
        if (!inBoundary) ++fresh;
      }
    }

    // revalidate the step as a pushout square
    const int pb = std::min(opts.pushoutBound, stepBound);
    {
      LevelMap la, lb, lc, ld;
      for (const Forest& H : enumerate_forests(pb)) {
        std::vector<Elem> a, b;
        for (const ForestMorphism& psi : hom_set_cached(H, st.shape)) {
          b.push_back(psi.encode());
          if (factors_any(psi, cx.bgens)) a.push_back(psi.encode());
        }
        std::vector<Elem> c, d;
        for (const ForestMorphism& phi : hom_set_cached(H, F)) {
          const bool inStage = stageMember(phi);
          if (inStage) c.push_back(phi.encode());
          if (inStage || factor_through(phi, cx.chi)) d.push_back(phi.encode());
        }
        sort_unique(a);
        sort_unique(b);
        sort_unique(c);
        sort_unique(d);
        la[H.code()] = std::move(a);
        lb[H.code()] = std::move(b);
        lc[H.code()] = std::move(c);
        ld[H.code()] = std::move(d);
      }
      const Forest shape = st.shape;
      const ForestMorphism chi = cx.chi;
      auto A = std::make_shared<FixedLevels>("step-boundary", std::move(la),
                                             compose_act(shape));
      auto B = std::make_shared<FixedLevels>("step-shape", std::move(lb),
                                             compose_act(shape));
      auto C = std::make_shared<FixedLevels>("stage", std::move(lc),
                                             compose_act(F));
      auto D = std::make_shared<FixedLevels>("stage-after", std::move(ld),
                                             compose_act(F));
      auto attach = [chi, shape](const Forest& H, const Elem& x) {
        return compose(chi, decode_morphism(x, H, shape)).encode();
      };
      auto incl = [](const Forest&, const Elem& x) { return x; };
      PresheafSquare sq{{A, B, incl, "incl"},
                        {A, C, attach, "attach"},
                        {B, D, attach, "attach"},
                        {C, D, incl, "incl"}};
      std::string why;
      if (!is_pushout(sq, pb, &why)) return fail("pushout check: " + why);
    }

    gens.push_back(cx.chi);
    if (opts.logSteps)
      res.log.push_back(json{{"step", i},
                             {"kind", st.kind},
                             {"shape", st.shape.code()},
                             {"boundary", cx.bgens.size()},
                             {"fresh", fresh},
                             {"pushoutBound", pb}}
                            .dump());
  }

  // composite endpoint
  std::shared_ptr<const Sieve> target;
  try {
    target = spec_sieve(cert.target, F);
  } catch (const std::exception& e) {
    res.failedStep = -2;
    res.reason = std::string("bad target: ") + e.what();
    return res;
  }
  for (const ForestMorphism& g : gens)
    if (target && !target->member(g)) {
      res.failedStep = -3;
      res.reason = "stage generator " + g.src.code() +
                   " lies outside the claimed target";
      return res;
    }
  if (!target) {
    if (!stageMember(identity_morphism(F))) {
      res.failedStep = -3;
      res.reason = "composite does not reach the full representable";
      return res;
    }
  } else {
    for (const Forest& H : enumerate_forests(bound))
      for (const ForestMorphism& psi : hom_set_cached(H, F))
        if (target->member(psi) && !stageMember(psi)) {
          res.failedStep = -3;
          res.reason = "target element at " + H.code() +
                       " is not reached: " + psi.encode();
          return res;
        }
  }

  res.ok = true;
  res.failedStep = -1;
  return res;
}

// ---------------------------------------------------------------------------
// attachment steps in an arbitrary ambient presheaf

bool ambient_stage_member(const Presheaf& ambient, const AmbientStage& stage,
                          const Forest& at, const Elem& value) {
  for (const auto& [g, x] : stage.generators)
    for (const ForestMorphism& psi : hom_set_cached(at, g))
      if (ambient.act(psi, x) == value) return true;
  return false;
}

bool ambient_attach_step(const Presheaf& ambient, AmbientStage& stage,
                         const CertificateStep& step, int bound,
                         std::string* why) {
  auto fail = [&](const std::string& r) {
    if (why) *why = "step (" + step.kind + " on " + step.shape.code() + "): " + r;
    return false;
  };
  SieveKind k;
  if (step.kind == "inner") k = SieveKind::InnerHorn;
  else if (step.kind == "root") k = SieveKind::RootHorn;
  else if (step.kind == "generalized") k = SieveKind::GeneralizedRootHorn;
  else if (step.kind == "roots") k = SieveKind::Roots;
  else return fail("unsupported step kind in an ambient attachment");
  auto sieve = subobject(k, step.shape, step.data);

  const std::vector<Elem> lv = ambient.level(step.shape);
  if (!contains(lv, step.cell)) return fail("cell is not an ambient element");

  for (const ForestMorphism& g : sieve->generators())
    if (!ambient_stage_member(ambient, stage, g.src, ambient.act(g, step.cell)))
      return fail("boundary value at " + g.src.code() + " is not in the stage");

  for (const Forest& H : enumerate_forests(bound)) {
    // distinct attaching arrows must also produce distinct fresh values
    std::map<Elem, Elem> byValue;
    for (const ForestMorphism& psi : hom_set_cached(H, step.shape)) {
      const Elem a = ambient.act(psi, step.cell);
      if (sieve->member(psi)) {
        if (!ambient_stage_member(ambient, stage, H, a))
          return fail("horn value escapes the stage at " + H.code());
      } else {
        if (ambient_stage_member(ambient, stage, H, a))
          return fail("fresh value already in the stage at " + H.code());
        auto [it, inserted] = byValue.emplace(a, psi.encode());
        if (!inserted && it->second != psi.encode())
          return fail("attachment is not injective at " + H.code());
      }
    }
  }

  // pushout revalidation
  {
    LevelMap la, lb, lc, ld;
    for (const Forest& H : enumerate_forests(bound)) {
      std::vector<Elem> a, b;
      for (const ForestMorphism& psi : hom_set_cached(H, step.shape)) {
        b.push_back(psi.encode());
        if (sieve->member(psi)) a.push_back(psi.encode());
      }
      std::vector<Elem> c, d;
      for (const Elem& y : ambient.level(H)) {
        if (ambient_stage_member(ambient, stage, H, y)) {
          c.push_back(y);
          d.push_back(y);
        }
      }
      for (const ForestMorphism& psi : hom_set_cached(H, step.shape))
        if (!sieve->member(psi)) d.push_back(ambient.act(psi, step.cell));
      sort_unique(a);
      sort_unique(b);
      sort_unique(c);
      sort_unique(d);
      la[H.code()] = std::move(a);
      lb[H.code()] = std::move(b);
      lc[H.code()] = std::move(c);
      ld[H.code()] = std::move(d);
    }
    const Forest shape = step.shape;
    const Elem cell = step.cell;
    const Presheaf* amb = &ambient;
    auto A = std::make_shared<FixedLevels>("horn", std::move(la),
                                           compose_act(shape));
    auto B = std::make_shared<FixedLevels>("horn-shape", std::move(lb),
                                           compose_act(shape));
    auto ambAct = [amb](const ForestMorphism& arrow, const Elem& x) {
      return amb->act(arrow, x);
    };
    auto C = std::make_shared<FixedLevels>("stage", std::move(lc), ambAct);
    auto D = std::make_shared<FixedLevels>("stage-after", std::move(ld), ambAct);
    auto attach = [amb, cell, shape](const Forest& H, const Elem& x) {
      return amb->act(decode_morphism(x, H, shape), cell);
    };
    auto incl = [](const Forest&, const Elem& x) { return x; };
    PresheafSquare sq{{A, B, incl, "incl"},
                      {A, C, attach, "attach"},
                      {B, D, attach, "attach"},
                      {C, D, incl, "incl"}};
    std::string pwhy;
    if (!is_pushout(sq, bound, &pwhy)) return fail("pushout check: " + pwhy);
  }

  stage.generators.emplace_back(step.shape, step.cell);
  return true;
}

// ---------------------------------------------------------------------------
// lifting problems

std::vector<Lift> enumerate_lifts(const LiftingProblem& q, int bound) {
  const std::vector<Forest> reps = enumerate_forests(bound);

  struct CellRef {
    Forest shape;
    Elem b;
  };
  std::vector<CellRef> cells;
  for (const Forest& H : reps)
    for (const Elem& b : q.i.dst->level(H)) cells.push_back({H, b});

  // values forced by the top of the square
  std::map<std::string, std::map<Elem, Elem>> forced;
  for (const Forest& H : reps)
    for (const Elem& a : q.i.src->level(H)) {
      const Elem b = q.i.component(H, a);
      const Elem x = q.top.component(H, a);
      auto [it, fresh] = forced[H.code()].emplace(b, x);
      if (!fresh && it->second != x) return {};  // top disagrees through i
    }

  // elementary arrows between the kept levels, with the action of the
  // middle object tabulated for constraint propagation
  struct Arrow {
    ForestMorphism m;
    std::map<Elem, Elem> actB;                 // level(dst) -> level(src)
    std::map<Elem, std::vector<Elem>> preB;    // reverse of actB
  };
  std::vector<Arrow> arrows;
  std::map<std::string, std::vector<size_t>> byDst, bySrc;
  for (const Forest& H : reps) {
    std::vector<ForestMorphism> ms;
    for (const ElementaryFace& d : elementary_faces(H)) ms.push_back(d.map);
    for (const ElementaryDegeneracy& s : elementary_degeneracies(H))
      if (s.map.src.total_edges() <= bound) ms.push_back(s.map);
    const ForestMorphism id = identity_morphism(H);
    for (const ForestMorphism& a : automorphisms(H))
      if (!(a == id)) ms.push_back(a);
    for (ForestMorphism& m : ms) {
      Arrow ar;
      ar.m = std::move(m);
      for (const Elem& b : q.i.dst->level(H)) {
        const Elem bs = q.i.dst->act(ar.m, b);
        ar.actB[b] = bs;
        ar.preB[bs].push_back(b);
      }
      byDst[H.code()].push_back(arrows.size());
      bySrc[ar.m.src.code()].push_back(arrows.size());
      arrows.push_back(std::move(ar));
    }
  }

  Lift lift;
  for (const Forest& H : reps) lift[H.code()];  // all levels present
  std::vector<Lift> out;

  std::function<void(size_t)> rec = [&](size_t ci) {
    if (ci == cells.size()) {
      out.push_back(lift);
      return;
    }
    const CellRef& cell = cells[ci];
    const std::string code = cell.shape.code();

    std::vector<Elem> candidates;
    auto fit = forced[code].find(cell.b);
    if (fit != forced[code].end()) {
      candidates.push_back(fit->second);
    } else {
      candidates = q.p.src->level(cell.shape);
    }
    const Elem want = q.bottom.component(cell.shape, cell.b);

    for (const Elem& x : candidates) {
      if (q.p.component(cell.shape, x) != want) continue;
      bool ok = true;
      // arrows out of this level: compare with already-assigned smaller levels
      for (size_t ai : byDst[code]) {
        const Arrow& ar = arrows[ai];
        const std::string sc = ar.m.src.code();
        const auto& assigned = lift[sc];
        auto jt = assigned.find(ar.actB.at(cell.b));
        if (jt != assigned.end() &&
            q.p.src->act(ar.m, x) != jt->second) {
          ok = false;
          break;
        }
      }
      // arrows into this level from assigned ones
      if (ok)
        for (size_t ai : bySrc[code]) {
          const Arrow& ar = arrows[ai];
          auto pit = ar.preB.find(cell.b);
          if (pit == ar.preB.end()) continue;
          const auto& assigned = lift[ar.m.dst.code()];
          for (const Elem& bk : pit->second) {
            auto jt = assigned.find(bk);
            if (jt != assigned.end() &&
                q.p.src->act(ar.m, jt->second) != x) {
              ok = false;
              break;
            }
          }
          if (!ok) break;
        }
      if (!ok) continue;
      lift[code][cell.b] = x;
      rec(ci + 1);
      lift[code].erase(cell.b);
    }
  };
  rec(0);
  return out;
}

FibrationReport check_right_fibration(const PresheafMap& p, int edgeBound,
                                      bool rootHornsOnly, int maxFailures) {
  FibrationReport report;
  const Presheaf& X = *p.src;
  const Presheaf& V = *p.dst;
  for (const Forest& F : enumerate_forests(edgeBound)) {
    if (F.empty()) continue;
    std::vector<std::shared_ptr<const Sieve>> horns;
    for (int c = 0; c < F.component_count(); ++c) {
      // Root horns only where the root carries a vertex: a bare-edge
      // component has no root vertex to omit, so no horn is generated there.
      if (F.component(c).vertex_count() > 0)
        horns.push_back(subobject(SieveKind::RootHorn, F, {c}));
      if (!rootHornsOnly)
        for (int e : F.component(c).inner_edges())
          horns.push_back(subobject(SieveKind::InnerHorn, F, {c, e}));
    }
    for (const auto& horn : horns) {
      ++report.hornsChecked;
      const SieveMapSet fams = sieve_maps(*horn, X);
      const std::vector<Elem> base = V.level(F);
      const std::vector<Elem> total = X.level(F);
      for (const std::vector<Elem>& fam : fams.maps) {
        for (const Elem& y : base) {
          bool compatible = true;
          for (size_t i = 0; i < fams.maximal.size() && compatible; ++i)
            if (V.act(fams.maximal[i], y) !=
                p.component(fams.maximal[i].src, fam[i]))
              compatible = false;
          if (!compatible) continue;
          ++report.squaresChecked;
          bool filled = false;
          for (const Elem& x : total) {
            if (p.component(F, x) != y) continue;
            bool restricts = true;
            for (size_t i = 0; i < fams.maximal.size() && restricts; ++i)
              if (X.act(fams.maximal[i], x) != fam[i]) restricts = false;
            if (restricts) {
              filled = true;
              break;
            }
          }
          if (!filled) {
            report.ok = false;
            if (static_cast<int>(report.failures.size()) < maxFailures)
              report.failures.push_back({F, horn->name(), fam, y});
          }
        }
      }
    }
  }
  return report;
}

PullbackReport check_strict_pullback(const PresheafMap& p, int edgeBound,
                                     int maxFailures) {
  PullbackReport report;
  const Presheaf& X = *p.src;
  const Presheaf& V = *p.dst;
  auto note = [&](const Forest& F, const std::string& why) {
    report.ok = false;
    if (static_cast<int>(report.failures.size()) < maxFailures)
      report.failures.push_back({F, why});
  };
  for (const Forest& F : enumerate_forests(edgeBound)) {
    if (F.empty()) continue;
    const ForestMorphism r = root_inclusion(F);
    const Forest rho = r.src;
    std::map<Elem, int> seen;
    bool injective = true;
    for (const Elem& x : X.level(F)) {
      const Elem key =
          json{X.act(r, x), p.component(F, x)}.dump();
      if (++seen[key] > 1 && injective) {
        note(F, "two elements share roots and base image");
        injective = false;
      }
    }
    for (const Elem& m : X.level(rho)) {
      const Elem pm = p.component(rho, m);
      for (const Elem& y : V.level(F)) {
        if (V.act(r, y) != pm) continue;
        if (!seen.count(json{m, y}.dump())) {
          note(F, "no element over roots " + m + " and base " + y);
          goto nextForest;
        }
      }
    }
  nextForest:;
  }
  return report;
}

}  // namespace forestkit
