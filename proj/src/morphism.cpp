#include "forestkit/morphism.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "forestkit/util.hpp"

namespace forestkit {

std::optional<SubtreeWitness> subtree_operation(const Tree& s, int rootEdge,
                                                std::vector<int> leaves) {
  const int E = s.edge_count();
  if (rootEdge < 0 || rootEdge >= E) return std::nullopt;
  for (int l : leaves)
    if (l < 0 || l >= E) return std::nullopt;
  std::sort(leaves.begin(), leaves.end());

  SubtreeWitness w;
  w.rootEdge = rootEdge;
  w.leafEdges = leaves;
  if (leaves.size() == 1 && leaves[0] == rootEdge) {
    w.regionEdges = {rootEdge};
    return w;  // identity operation
  }
  // a proper subtree has repetition-free leaves, none equal to its root
  for (size_t i = 0; i + 1 < leaves.size(); ++i)
    if (leaves[i] == leaves[i + 1]) return std::nullopt;
  if (std::binary_search(leaves.begin(), leaves.end(), rootEdge))
    return std::nullopt;

  size_t consumed = 0;
  std::vector<int> stack = {rootEdge};
  while (!stack.empty()) {
    const int e = stack.back();
    stack.pop_back();
    w.regionEdges.push_back(e);
    if (std::binary_search(leaves.begin(), leaves.end(), e)) {
      ++consumed;
      continue;
    }
    if (!s.capped(e)) return std::nullopt;  // frontier edge not in the leaf set
    w.regionVertices.push_back(e);
    for (int c : s.children(e)) stack.push_back(c);
  }
  if (consumed != leaves.size()) return std::nullopt;  // unreachable leaf
  std::sort(w.regionEdges.begin(), w.regionEdges.end());
  std::sort(w.regionVertices.begin(), w.regionVertices.end());
  return w;
}

bool ForestMorphism::operator<(const ForestMorphism& o) const {
  if (src != o.src) return src < o.src;
  if (dst != o.dst) return dst < o.dst;
  if (comp != o.comp) return comp < o.comp;
  return edge < o.edge;
}

std::string ForestMorphism::encode() const {
  std::vector<std::string> parts;
  parts.reserve(comp.size());
  for (size_t i = 0; i < comp.size(); ++i)
    parts.push_back(std::to_string(comp[i]) + ":" + int_list(edge[i]));
  return join(parts, ";");
}

ForestMorphism decode_morphism(const std::string& key, const Forest& f,
                               const Forest& g) {
  ForestMorphism m;
  m.src = f;
  m.dst = g;
  if (!key.empty()) {
    for (const std::string& part : split(key, ';')) {
      const auto cv = split(part, ':');
      if (cv.size() != 2) throw std::invalid_argument("bad morphism key: " + key);
      m.comp.push_back(std::stoi(cv[0]));
      std::vector<int> edges;
      for (const std::string& e : split(cv[1], ','))
        edges.push_back(std::stoi(e));
      m.edge.push_back(std::move(edges));
    }
  }
  require_valid(m, "decode_morphism");
  return m;
}

bool validate(const ForestMorphism& m, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = why;
    return false;
  };
  const int nc = m.src.component_count();
  if (static_cast<int>(m.comp.size()) != nc) return fail("component map size");
  if (static_cast<int>(m.edge.size()) != nc) return fail("edge map count");
  for (int i = 0; i < nc; ++i) {
    if (m.comp[i] < 0 || m.comp[i] >= m.dst.component_count())
      return fail("component index out of range");
    const Tree& t = m.src.component(i);
    const Tree& s = m.dst.component(m.comp[i]);
    if (static_cast<int>(m.edge[i].size()) != t.edge_count())
      return fail("edge map size");
    for (int x : m.edge[i])
      if (x < 0 || x >= s.edge_count()) return fail("edge image out of range");
    for (int v : t.vertices()) {
      std::vector<int> leaves;
      for (int c : t.children(v)) leaves.push_back(m.edge[i][c]);
      if (!subtree_operation(s, m.edge[i][v], leaves))
        return fail("vertex " + std::to_string(v) + " of component " +
                    std::to_string(i) + " has no subtree witness");
    }
  }
  // independence: distinct components into a common target tree must
  // have pairwise incomparable edge images
  for (int j = 0; j < m.dst.component_count(); ++j) {
    std::vector<int> srcs;
    for (int i = 0; i < nc; ++i)
      if (m.comp[i] == j) srcs.push_back(i);
    const Tree& s = m.dst.component(j);
    for (size_t a = 0; a < srcs.size(); ++a)
      for (size_t b = a + 1; b < srcs.size(); ++b)
        for (int x : m.edge[srcs[a]])
          for (int y : m.edge[srcs[b]])
            if (s.leq(x, y) || s.leq(y, x))
              return fail("independence violated in target component " +
                          std::to_string(j));
  }
  return true;
}

void require_valid(const ForestMorphism& m, const char* what) {
  std::string why;
  if (!validate(m, &why))
    throw std::logic_error(std::string(what) + ": invalid morphism (" + why +
                           ") " + m.src.code() + " -> " + m.dst.code());
}

ForestMorphism identity_morphism(const Forest& f) {
  ForestMorphism m;
  m.src = f;
  m.dst = f;
  for (int i = 0; i < f.component_count(); ++i) {
    m.comp.push_back(i);
    std::vector<int> e(f.component(i).edge_count());
    for (size_t x = 0; x < e.size(); ++x) e[x] = static_cast<int>(x);
    m.edge.push_back(std::move(e));
  }
  return m;
}

ForestMorphism compose(const ForestMorphism& outer, const ForestMorphism& inner) {
  if (inner.dst != outer.src)
    throw std::logic_error("compose: middle objects differ: " +
                           inner.dst.code() + " vs " + outer.src.code());
  ForestMorphism m;
  m.src = inner.src;
  m.dst = outer.dst;
  for (int i = 0; i < inner.src.component_count(); ++i) {
    const int mid = inner.comp[i];
    m.comp.push_back(outer.comp[mid]);
    std::vector<int> e(inner.edge[i].size());
    for (size_t x = 0; x < e.size(); ++x)
      e[x] = outer.edge[mid][inner.edge[i][x]];
    m.edge.push_back(std::move(e));
  }
  require_valid(m, "compose");
  return m;
}

namespace {

// All subtree operations of s rooted at each edge, as sorted leaf sets.
// ops[e] always contains the identity {e}; for a capped edge it also
// contains one entry per choice of operation above each child.
std::vector<std::vector<std::vector<int>>> ops_at(const Tree& s) {
  const int E = s.edge_count();
  std::vector<std::vector<std::vector<int>>> ops(E);
  for (int e = E - 1; e >= 0; --e) {
    ops[e].push_back({e});
    if (!s.capped(e)) continue;
    std::vector<std::vector<int>> acc = {{}};
    for (int c : s.children(e)) {
      std::vector<std::vector<int>> next;
      for (const auto& a : acc)
        for (const auto& l : ops[c]) {
          std::vector<int> u = a;
          u.insert(u.end(), l.begin(), l.end());
          next.push_back(std::move(u));
        }
      acc = std::move(next);
    }
    for (auto& l : acc) {
      std::sort(l.begin(), l.end());
      ops[e].push_back(std::move(l));
    }
  }
  return ops;
}

}  // namespace

std::vector<std::vector<int>> tree_homs(const Tree& t, const Tree& s) {
  const auto ops = ops_at(s);
  std::vector<std::vector<int>> out;
  std::vector<int> phi(t.edge_count(), -1);
  const std::vector<int> verts = t.vertices();  // ascending: parents first

  std::function<void(size_t)> rec = [&](size_t vi) {
    if (vi == verts.size()) {
      out.push_back(phi);
      return;
    }
    const int v = verts[vi];
    const auto& kids = t.children(v);
    for (const auto& leafSet : ops[phi[v]]) {
      if (leafSet.size() != kids.size()) continue;
      std::vector<int> perm = leafSet;
      do {
        for (size_t i = 0; i < kids.size(); ++i) phi[kids[i]] = perm[i];
        rec(vi + 1);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  };

  for (int e0 = 0; e0 < s.edge_count(); ++e0) {
    phi[0] = e0;
    rec(0);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ForestMorphism> hom_set(const Forest& f, const Forest& g) {
  std::vector<ForestMorphism> out;
  const int nf = f.component_count();
  const int ng = g.component_count();
  if (nf == 0) {
    ForestMorphism m;
    m.src = f;
    m.dst = g;
    return {m};
  }
  if (ng == 0) return {};

  std::vector<std::vector<std::vector<std::vector<int>>>> homs(nf);
  for (int i = 0; i < nf; ++i) {
    homs[i].resize(ng);
    for (int j = 0; j < ng; ++j)
      homs[i][j] = tree_homs(f.component(i), g.component(j));
  }

  std::vector<int> comp(nf, 0);
  ForestMorphism m;
  m.src = f;
  m.dst = g;
  m.comp.assign(nf, 0);
  m.edge.assign(nf, {});

  std::function<void(int)> pickEdges = [&](int i) {
    if (i == nf) {
      std::string why;
      if (validate(m)) out.push_back(m);
      return;
    }
    for (const auto& e : homs[i][comp[i]]) {
      m.edge[i] = e;
      pickEdges(i + 1);
    }
  };
  std::function<void(int)> pickComps = [&](int i) {
    if (i == nf) {
      for (int k = 0; k < nf; ++k) m.comp[k] = comp[k];
      pickEdges(0);
      return;
    }
    for (int j = 0; j < ng; ++j) {
      comp[i] = j;
      pickComps(i + 1);
    }
  };
  pickComps(0);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<ForestMorphism> inverse(const ForestMorphism& m) {
  const int nc = m.src.component_count();
  if (m.dst.component_count() != nc) return std::nullopt;
  ForestMorphism inv;
  inv.src = m.dst;
  inv.dst = m.src;
  inv.comp.assign(nc, -1);
  inv.edge.resize(nc);
  for (int i = 0; i < nc; ++i) {
    const int j = m.comp[i];
    if (inv.comp[j] != -1) return std::nullopt;  // component map not injective
    inv.comp[j] = i;
    const int E = m.src.component(i).edge_count();
    if (m.dst.component(j).edge_count() != E) return std::nullopt;
    std::vector<int> e(E, -1);
    for (int x = 0; x < E; ++x) {
      if (e[m.edge[i][x]] != -1) return std::nullopt;  // edge map not injective
      e[m.edge[i][x]] = x;
    }
    inv.edge[j] = std::move(e);
  }
  if (!validate(inv)) return std::nullopt;
  return inv;
}

bool is_isomorphism(const ForestMorphism& m) { return inverse(m).has_value(); }

std::vector<ForestMorphism> automorphisms(const Forest& f) {
  std::vector<ForestMorphism> out;
  for (const ForestMorphism& m : hom_set(f, f))
    if (is_isomorphism(m)) out.push_back(m);
  return out;
}

namespace {

// One source component of a face/degeneracy under assembly: a raw tree
// mapped into a chosen component of the target forest.
struct RawPart {
  RawTree tree;
  int targetComp;
  std::vector<int> edgeImage;  // raw edge -> edge of target component
};

ForestMorphism assemble_into(const Forest& dst, const std::vector<RawPart>& parts) {
  std::vector<RawTree> raws;
  raws.reserve(parts.size());
  for (const RawPart& p : parts) raws.push_back(p.tree);
  BuiltForest b = build_forest(raws);
  ForestMorphism m;
  m.src = b.forest;
  m.dst = dst;
  m.comp.assign(parts.size(), -1);
  m.edge.assign(parts.size(), {});
  for (size_t r = 0; r < parts.size(); ++r) {
    const int pos = b.comp[r];
    m.comp[pos] = parts[r].targetComp;
    m.edge[pos].assign(parts[r].edgeImage.size(), -1);
    for (size_t x = 0; x < parts[r].edgeImage.size(); ++x)
      m.edge[pos][b.edge[r][x]] = parts[r].edgeImage[x];
  }
  require_valid(m, "assemble_into");
  return m;
}

RawPart identity_part(const Forest& f, int i) {
  RawPart p;
  p.tree = f.component(i).raw();
  p.targetComp = i;
  p.edgeImage.resize(f.component(i).edge_count());
  for (size_t x = 0; x < p.edgeImage.size(); ++x)
    p.edgeImage[x] = static_cast<int>(x);
  return p;
}

// Raw subtree of t keeping exactly the edges for which keep(e) is true;
// remap(e) gives the new parent when the old parent is dropped (used by
// inner-edge contraction).  Returns the raw tree plus old-id images.
RawPart restricted_part(const Tree& t, int targetComp,
                        const std::function<bool(int)>& keep,
                        const std::function<int(int)>& parentOf,
                        const std::function<bool(int)>& cappedOf) {
  std::vector<int> rid(t.edge_count(), -1);
  RawPart p;
  p.targetComp = targetComp;
  for (int e = 0; e < t.edge_count(); ++e) {
    if (!keep(e)) continue;
    rid[e] = static_cast<int>(p.edgeImage.size());
    p.edgeImage.push_back(e);
  }
  for (int e = 0; e < t.edge_count(); ++e) {
    if (rid[e] == -1) continue;
    const int pa = parentOf(e);
    p.tree.parent.push_back(pa == -1 ? -1 : rid[pa]);
    p.tree.capped.push_back(cappedOf(e) ? 1 : 0);
  }
  return p;
}

}  // namespace

std::string ElementaryFace::label() const {
  switch (kind) {
    case FaceKind::Inner:
      return "inner(" + std::to_string(component) + "," + std::to_string(param) + ")";
    case FaceKind::Leaf:
      return "leaf(" + std::to_string(component) + "," + std::to_string(param) + ")";
    case FaceKind::Root:
      return "root(" + std::to_string(component) + ")";
  }
  return "?";
}

std::string ElementaryDegeneracy::label() const {
  return "sigma(" + std::to_string(component) + "," + std::to_string(edge) + ")";
}

std::vector<ElementaryFace> elementary_faces(const Forest& f) {
  std::vector<ElementaryFace> out;
  for (int j = 0; j < f.component_count(); ++j) {
    const Tree& t = f.component(j);

    auto others = [&](std::vector<RawPart> special) {
      std::vector<RawPart> parts;
      for (int i = 0; i < f.component_count(); ++i) {
        if (i == j) {
          for (RawPart& s : special) parts.push_back(std::move(s));
        } else {
          parts.push_back(identity_part(f, i));
        }
      }
      return parts;
    };

    for (int e : t.inner_edges()) {
      // contract e: its children reattach below, the two vertices merge
      RawPart p = restricted_part(
          t, j, [&](int x) { return x != e; },
          [&](int x) { return t.parent(x) == e ? t.parent(e) : t.parent(x); },
          [&](int x) { return t.capped(x); });
      out.push_back({assemble_into(f, others({std::move(p)})), j,
                     FaceKind::Inner, e});
    }
    for (int v : t.vertices()) {
      if (!t.is_leaf_vertex(v)) continue;
      // drop the vertex and its input edges; its output edge becomes a leaf
      RawPart p = restricted_part(
          t, j, [&](int x) { return t.parent(x) != v; },
          [&](int x) { return t.parent(x); },
          [&](int x) { return x == v ? false : t.capped(x); });
      out.push_back({assemble_into(f, others({std::move(p)})), j,
                     FaceKind::Leaf, v});
    }
    {
      // root face: the forest of subtrees above the root vertex; for a
      // bare edge this deletes the component (the ∅ -> η face)
      std::vector<RawPart> tops;
      if (t.capped(0)) {
        for (int c : t.children(0)) {
          tops.push_back(restricted_part(
              t, j, [&](int x) { return t.leq(c, x); },
              [&](int x) { return x == c ? -1 : t.parent(x); },
              [&](int x) { return t.capped(x); }));
        }
      }
      out.push_back({assemble_into(f, others(std::move(tops))), j,
                     FaceKind::Root, -1});
    }
  }
  return out;
}

std::vector<ElementaryDegeneracy> elementary_degeneracies(const Forest& f) {
  std::vector<ElementaryDegeneracy> out;
  for (int j = 0; j < f.component_count(); ++j) {
    const Tree& t = f.component(j);
    for (int e = 0; e < t.edge_count(); ++e) {
      // split e with a unary vertex: new edge E sits above e
      RawPart p;
      p.targetComp = j;
      const int E = t.edge_count();
      p.tree.parent.resize(E + 1);
      p.tree.capped.resize(E + 1);
      for (int x = 0; x < E; ++x) {
        p.tree.parent[x] = t.parent(x) == e ? E : t.parent(x);
        p.tree.capped[x] = t.capped(x) ? 1 : 0;
        p.edgeImage.push_back(x);
      }
      p.tree.parent[E] = e;
      p.tree.capped[E] = t.capped(e) ? 1 : 0;
      p.tree.capped[e] = 1;
      p.edgeImage.push_back(e);

      std::vector<RawPart> parts;
      for (int i = 0; i < f.component_count(); ++i) {
        if (i == j)
          parts.push_back(p);
        else
          parts.push_back(identity_part(f, i));
      }
      out.push_back({assemble_into(f, parts), j, e});
    }
  }
  return out;
}

ElementaryArrows elementary_arrows(const Forest& f) {
  return {elementary_faces(f), elementary_degeneracies(f)};
}

std::optional<ForestMorphism> factor_through(const ForestMorphism& psi,
                                             const ForestMorphism& delta) {
  if (psi.dst != delta.dst) return std::nullopt;
  const int ng = delta.dst.component_count();
  // preimage index of delta: (target comp, target edge) -> (source comp, edge)
  std::vector<std::vector<std::pair<int, int>>> inv(ng);
  for (int j = 0; j < ng; ++j)
    inv[j].assign(delta.dst.component(j).edge_count(), {-1, -1});
  for (int a = 0; a < delta.src.component_count(); ++a)
    for (size_t x = 0; x < delta.edge[a].size(); ++x)
      inv[delta.comp[a]][delta.edge[a][x]] = {a, static_cast<int>(x)};

  ForestMorphism r;
  r.src = psi.src;
  r.dst = delta.src;
  for (int i = 0; i < psi.src.component_count(); ++i) {
    const int j = psi.comp[i];
    int a = -1;
    std::vector<int> e(psi.edge[i].size(), -1);
    for (size_t x = 0; x < psi.edge[i].size(); ++x) {
      const auto [a0, x0] = inv[j][psi.edge[i][x]];
      if (a0 == -1) return std::nullopt;
      if (a == -1) a = a0;
      if (a != a0) return std::nullopt;
      e[x] = x0;
    }
    r.comp.push_back(a);
    r.edge.push_back(std::move(e));
  }
  if (!validate(r)) return std::nullopt;
  if (!(compose(delta, r) == psi)) return std::nullopt;
  return r;
}

FaceDecomposition decompose_face(const ForestMorphism& mono) {
  FaceDecomposition d;
  ForestMorphism cur = mono;
  while (!is_isomorphism(cur)) {
    bool found = false;
    for (const ElementaryFace& face : elementary_faces(cur.dst)) {
      if (auto r = factor_through(cur, face.map)) {
        d.steps.push_back(face);
        cur = *r;
        found = true;
        break;
      }
    }
    if (!found)
      throw std::logic_error("decompose_face: no elementary face contains " +
                             cur.src.code() + " -> " + cur.dst.code());
  }
  d.iso = cur;
  return d;
}

Factorization factorize(const ForestMorphism& m) {
  require_valid(m, "factorize");
  Factorization f;
  ForestMorphism cur = m;
  f.degeneracy = identity_morphism(m.src);

  // collapse unit vertices (unary, input and output share an image)
  for (;;) {
    int ci = -1, cv = -1;
    for (int i = 0; i < cur.src.component_count() && ci == -1; ++i) {
      const Tree& t = cur.src.component(i);
      for (int v : t.vertices()) {
        if (t.children(v).size() == 1 &&
            cur.edge[i][t.children(v)[0]] == cur.edge[i][v]) {
          ci = i;
          cv = v;
          break;
        }
      }
    }
    if (ci == -1) break;

    const Tree& t = cur.src.component(ci);
    const int child = t.children(cv)[0];
    std::vector<RawTree> raws;
    std::vector<std::vector<int>> oldOf(cur.src.component_count());
    for (int i = 0; i < cur.src.component_count(); ++i) {
      if (i != ci) {
        raws.push_back(cur.src.component(i).raw());
        for (int x = 0; x < cur.src.component(i).edge_count(); ++x)
          oldOf[i].push_back(x);
        continue;
      }
      RawTree raw;
      std::vector<int> rid(t.edge_count(), -1);
      for (int x = 0; x < t.edge_count(); ++x) {
        if (x == child) continue;
        rid[x] = static_cast<int>(oldOf[i].size());
        oldOf[i].push_back(x);
      }
      for (int x = 0; x < t.edge_count(); ++x) {
        if (x == child) continue;
        int pa = t.parent(x);
        if (pa == child) pa = cv;
        raw.parent.push_back(pa == -1 ? -1 : rid[pa]);
        raw.capped.push_back(x == cv ? (t.capped(child) ? 1 : 0)
                                     : (t.capped(x) ? 1 : 0));
      }
      raws.push_back(raw);
    }
    BuiltForest b = build_forest(raws);

    ForestMorphism step;  // cur.src -> collapsed forest
    step.src = cur.src;
    step.dst = b.forest;
    step.comp.assign(cur.src.component_count(), -1);
    step.edge.assign(cur.src.component_count(), {});
    ForestMorphism next;  // collapsed forest -> cur.dst
    next.src = b.forest;
    next.dst = cur.dst;
    next.comp.assign(b.forest.component_count(), -1);
    next.edge.resize(b.forest.component_count());
    for (int i = 0; i < cur.src.component_count(); ++i) {
      step.comp[i] = b.comp[i];
      next.comp[b.comp[i]] = cur.comp[i];
      next.edge[b.comp[i]].assign(b.forest.component(b.comp[i]).edge_count(), -1);
      step.edge[i].assign(cur.src.component(i).edge_count(), -1);
      for (size_t r = 0; r < oldOf[i].size(); ++r) {
        const int ne = b.edge[i][r];
        step.edge[i][oldOf[i][r]] = ne;
        next.edge[b.comp[i]][ne] = cur.edge[i][oldOf[i][r]];
      }
      if (i == ci) step.edge[i][child] = step.edge[i][cv];
    }
    require_valid(step, "factorize/collapse");
    require_valid(next, "factorize/residual");
    if (!(compose(next, step) == cur))
      throw std::logic_error("factorize: collapse does not commute");
    f.degeneracySteps.push_back(
        {step, b.comp[ci],
         step.edge[ci][cv]});
    f.degeneracy = compose(step, f.degeneracy);
    cur = next;
  }

  FaceDecomposition fd = decompose_face(cur);
  f.iso = fd.iso;
  f.faceSteps = fd.steps;
  f.face = identity_morphism(m.dst);
  for (const ElementaryFace& s : fd.steps) f.face = compose(f.face, s.map);
  if (!(compose(f.face, compose(f.iso, f.degeneracy)) == m))
    throw std::logic_error("factorize: parts do not recompose");
  return f;
}

}  // namespace forestkit
