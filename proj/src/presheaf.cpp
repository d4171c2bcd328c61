#include "forestkit/presheaf.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "forestkit/util.hpp"

using nlohmann::json;

namespace forestkit {

const std::vector<ForestMorphism>& hom_set_cached(const Forest& f, const Forest& g) {
  static std::mutex mu;
  static std::map<std::pair<std::string, std::string>,
                  std::shared_ptr<const std::vector<ForestMorphism>>>
      cache;
  const auto key = std::make_pair(f.code(), g.code());
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
  }
  auto computed = std::make_shared<const std::vector<ForestMorphism>>(hom_set(f, g));
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.emplace(key, computed);
  return *it->second;
}

namespace {

class RepresentablePresheaf : public Presheaf {
 public:
  explicit RepresentablePresheaf(Forest shape) : shape_(std::move(shape)) {}
  std::string name() const override { return "Y(" + shape_.code() + ")"; }
  std::vector<Elem> level(const Forest& f) const override {
    std::vector<Elem> out;
    for (const ForestMorphism& m : hom_set_cached(f, shape_))
      out.push_back(m.encode());
    std::sort(out.begin(), out.end());
    return out;
  }
  Elem act(const ForestMorphism& arrow, const Elem& x) const override {
    ForestMorphism m = decode_morphism(x, arrow.dst, shape_);
    return compose(m, arrow).encode();
  }

 private:
  Forest shape_;
};

class PointPresheaf : public Presheaf {
 public:
  std::string name() const override { return "point"; }
  std::vector<Elem> level(const Forest&) const override { return {"*"}; }
  Elem act(const ForestMorphism&, const Elem& x) const override { return x; }
};

}  // namespace

PresheafPtr representable(const Forest& f) {
  return std::make_shared<RepresentablePresheaf>(f);
}

PresheafPtr point_presheaf() { return std::make_shared<PointPresheaf>(); }

ForestMorphism root_inclusion(const Forest& f) {
  ForestMorphism m;
  m.src = Forest::etas(f.component_count());
  m.dst = f;
  for (int i = 0; i < f.component_count(); ++i) {
    m.comp.push_back(i);
    m.edge.push_back({0});
  }
  require_valid(m, "root_inclusion");
  return m;
}

namespace {

bool spine_member_forest(const ForestMorphism& m);

// Inclusion of the root corolla (root edge plus its input edges).
ForestMorphism root_corolla_inclusion(const Tree& t) {
  const auto& kids = t.children(0);
  ForestMorphism m;
  m.src = Forest::single(Tree::corolla(static_cast<int>(kids.size())));
  m.dst = Forest::single(t);
  m.comp = {0};
  std::vector<int> e = {0};
  for (int c : kids) e.push_back(c);
  m.edge = {e};
  require_valid(m, "root_corolla_inclusion");
  return m;
}

ForestMorphism root_face_of(const Forest& f, int component) {
  for (const ElementaryFace& fc : elementary_faces(f))
    if (fc.kind == FaceKind::Root && fc.component == component) return fc.map;
  throw std::logic_error("missing root face");
}

// Spine membership for the part of a morphism landing in one tree.
bool spine_member_tree(const ForestMorphism& psi, const Tree& t) {
  if (!t.capped(0) || t.vertex_count() == 1) return true;  // eta or corolla
  if (factor_through(psi, root_corolla_inclusion(t))) return true;
  const ForestMorphism rf = root_face_of(Forest::single(t), 0);
  if (auto r = factor_through(psi, rf)) return spine_member_forest(*r);
  return false;
}

bool spine_member_forest(const ForestMorphism& m) {
  for (int j = 0; j < m.dst.component_count(); ++j) {
    bool hit = false;
    for (int c : m.comp)
      if (c == j) hit = true;
    if (!hit) continue;
    ForestMorphism part = restrict_morphism(m, {j});
    if (!spine_member_tree(part, m.dst.component(j))) return false;
  }
  return true;
}

}  // namespace

std::shared_ptr<const Sieve> subobject(SieveKind kind, const Forest& f,
                                       const std::vector<int>& params) {
  auto s = std::make_shared<Sieve>(Sieve{});
  Sieve& sv = const_cast<Sieve&>(*s);
  sv.shape_ = f;
  sv.kind_ = kind;
  sv.params_ = params;

  const std::vector<ElementaryFace> faces = elementary_faces(f);
  auto keepAllBut = [&](const std::function<bool(const ElementaryFace&)>& drop) {
    for (const ElementaryFace& face : faces)
      if (!drop(face)) sv.generators_.push_back(face.map);
  };

  switch (kind) {
    case SieveKind::Boundary:
      keepAllBut([](const ElementaryFace&) { return false; });
      break;
    case SieveKind::InnerHorn: {
      if (params.size() != 2) throw std::invalid_argument("inner_horn needs {component, edge}");
      const int c = params[0], e = params[1];
      if (c < 0 || c >= f.component_count() || !contains(f.component(c).inner_edges(), e))
        throw std::invalid_argument("inner_horn: not an inner edge");
      keepAllBut([&](const ElementaryFace& fc) {
        return fc.kind == FaceKind::Inner && fc.component == c && fc.param == e;
      });
      break;
    }
    case SieveKind::RootHorn: {
      if (params.size() != 1) throw std::invalid_argument("root_horn needs {component}");
      const int c = params[0];
      if (c < 0 || c >= f.component_count())
        throw std::invalid_argument("root_horn: no such component");
      keepAllBut([&](const ElementaryFace& fc) {
        return fc.kind == FaceKind::Root && fc.component == c;
      });
      break;
    }
    case SieveKind::GeneralizedRootHorn: {
      if (params.empty())
        throw std::invalid_argument("generalized_root_horn needs a nonempty root set");
      for (int c : params)
        if (c < 0 || c >= f.component_count())
          throw std::invalid_argument("generalized_root_horn: no such component");
      keepAllBut([&](const ElementaryFace& fc) {
        return fc.kind == FaceKind::Root && contains(params, fc.component);
      });
      break;
    }
    case SieveKind::Spine:
      break;  // membership by the defining clauses; no generator list
    case SieveKind::Roots:
      sv.generators_.push_back(root_inclusion(f));
      break;
  }
  return s;
}

bool Sieve::member(const ForestMorphism& m) const {
  if (m.dst != shape_) return false;
  if (kind_ == SieveKind::Spine) return spine_member_forest(m);
  for (const ForestMorphism& g : generators_)
    if (factor_through(m, g)) return true;
  return false;
}

std::string Sieve::name() const {
  switch (kind_) {
    case SieveKind::Boundary: return "boundary(" + shape_.code() + ")";
    case SieveKind::InnerHorn:
      return "inner_horn(" + shape_.code() + ";" + int_list(params_) + ")";
    case SieveKind::RootHorn:
      return "root_horn(" + shape_.code() + ";" + int_list(params_) + ")";
    case SieveKind::GeneralizedRootHorn:
      return "gen_root_horn(" + shape_.code() + ";" + int_list(params_) + ")";
    case SieveKind::Spine: return "spine(" + shape_.code() + ")";
    case SieveKind::Roots: return "roots(" + shape_.code() + ")";
  }
  return "sieve";
}

std::vector<Elem> Sieve::level(const Forest& f) const {
  std::vector<Elem> out;
  for (const ForestMorphism& m : hom_set_cached(f, shape_))
    if (member(m)) out.push_back(m.encode());
  std::sort(out.begin(), out.end());
  return out;
}

Elem Sieve::act(const ForestMorphism& arrow, const Elem& x) const {
  ForestMorphism m = decode_morphism(x, arrow.dst, shape_);
  ForestMorphism r = compose(m, arrow);
  if (!member(r))
    throw std::logic_error("sieve not closed under precomposition (bug)");
  return r.encode();
}

void TruncatedPresheaf::set_level(const Forest& f, std::vector<Elem> elems) {
  std::sort(elems.begin(), elems.end());
  levels_[f.code()] = std::move(elems);
  reps_.emplace(f.code(), f);
}

void TruncatedPresheaf::set_action(const ForestMorphism& arrow,
                                   std::map<Elem, Elem> table) {
  actions_[arrow_key(arrow)] = std::move(table);
}

std::string TruncatedPresheaf::arrow_key(const ForestMorphism& arrow) {
  return arrow.src.code() + "|" + arrow.dst.code() + "|" + arrow.encode();
}

const Forest& TruncatedPresheaf::representative(const std::string& code) const {
  auto it = reps_.find(code);
  if (it == reps_.end()) throw std::out_of_range("no representative " + code);
  return it->second;
}

std::vector<Elem> TruncatedPresheaf::level(const Forest& f) const {
  auto it = levels_.find(f.code());
  if (it == levels_.end())
    throw std::out_of_range(name_ + ": level " + f.code() + " beyond bound");
  return it->second;
}

Elem TruncatedPresheaf::elementary_act(const ForestMorphism& arrow,
                                       const Elem& x) const {
  auto it = actions_.find(arrow_key(arrow));
  if (it == actions_.end())
    throw std::logic_error(name_ + ": no action table for " + arrow_key(arrow));
  auto jt = it->second.find(x);
  if (jt == it->second.end())
    throw std::logic_error(name_ + ": element not in action table: " + x);
  return jt->second;
}

Elem TruncatedPresheaf::act(const ForestMorphism& arrow, const Elem& x) const {
  auto it = actions_.find(arrow_key(arrow));
  if (it != actions_.end()) {
    auto jt = it->second.find(x);
    if (jt == it->second.end())
      throw std::logic_error(name_ + ": element not in action table: " + x);
    return jt->second;
  }
  // general arrow: push through the elementary factorization
  Factorization fz = factorize(arrow);
  Elem cur = x;
  for (const ElementaryFace& d : fz.faceSteps) cur = elementary_act(d.map, cur);
  cur = elementary_act(fz.iso, cur);
  for (auto it2 = fz.degeneracySteps.rbegin(); it2 != fz.degeneracySteps.rend(); ++it2)
    cur = elementary_act(it2->map, cur);
  return cur;
}

std::shared_ptr<TruncatedPresheaf> TruncatedPresheaf::truncate(
    const PresheafPtr& x, int bound, const std::string& name) {
  auto out = std::make_shared<TruncatedPresheaf>(
      name.empty() ? x->name() + "|<=" + std::to_string(bound) : name, bound);
  const std::vector<Forest> reps = enumerate_forests(bound);
  for (const Forest& f : reps) out->set_level(f, x->level(f));
  for (const Forest& f : reps) {
    const std::vector<Elem> elems = x->level(f);
    auto record = [&](const ForestMorphism& arrow) {
      std::map<Elem, Elem> table;
      for (const Elem& e : elems) table[e] = x->act(arrow, e);
      out->set_action(arrow, std::move(table));
    };
    for (const ElementaryFace& d : elementary_faces(f)) record(d.map);
    for (const ElementaryDegeneracy& s : elementary_degeneracies(f))
      if (s.map.src.total_edges() <= bound) record(s.map);
    for (const ForestMorphism& a : automorphisms(f)) record(a);
  }
  return out;
}

PresheafMap identity_map(const PresheafPtr& x) {
  return {x, x, [](const Forest&, const Elem& e) { return e; }, "id"};
}

PresheafMap compose_maps(const PresheafMap& outer, const PresheafMap& inner) {
  auto in = inner.component;
  auto out = outer.component;
  return {inner.src, outer.dst,
          [in, out](const Forest& f, const Elem& e) { return out(f, in(f, e)); },
          outer.name + "∘" + inner.name};
}

bool check_naturality(const PresheafMap& m, int bound, std::string* why) {
  for (const Forest& f : enumerate_forests(bound)) {
    std::vector<ForestMorphism> arrows;
    for (const ElementaryFace& d : elementary_faces(f)) arrows.push_back(d.map);
    for (const ElementaryDegeneracy& s : elementary_degeneracies(f))
      if (s.map.src.total_edges() <= bound) arrows.push_back(s.map);
    for (const ForestMorphism& a : automorphisms(f)) arrows.push_back(a);
    const std::vector<Elem> xs = m.src->level(f);
    for (const ForestMorphism& g : arrows) {
      for (const Elem& x : xs) {
        const Elem lhs = m.component(g.src, m.src->act(g, x));
        const Elem rhs = m.dst->act(g, m.component(f, x));
        if (lhs != rhs) {
          if (why)
            *why = "naturality fails at " + f.code() + " along " + g.src.code() +
                   "->" + g.dst.code() + " (" + g.encode() + ") on " + x;
          return false;
        }
      }
    }
  }
  return true;
}

bool is_normal_mono(const PresheafMap& m, int bound, std::string* why) {
  for (const Forest& f : enumerate_forests(bound)) {
    const std::vector<Elem> xs = m.src->level(f);
    std::set<Elem> image;
    for (const Elem& x : xs) {
      if (!image.insert(m.component(f, x)).second) {
        if (why) *why = "not injective at " + f.code();
        return false;
      }
    }
    std::vector<Elem> complement;
    for (const Elem& y : m.dst->level(f))
      if (!image.count(y)) complement.push_back(y);
    const ForestMorphism id = identity_morphism(f);
    for (const ForestMorphism& a : automorphisms(f)) {
      if (a == id) continue;
      for (const Elem& y : complement) {
        if (m.dst->act(a, y) == y) {
          if (why)
            *why = "automorphism " + a.encode() + " of " + f.code() +
                   " fixes complement element " + y;
          return false;
        }
      }
    }
  }
  return true;
}

namespace {

Elem tag(const char* side, const Elem& e) { return json::array({side, e}).dump(); }

struct TaggedElem {
  std::string side;
  Elem elem;
};
TaggedElem untag(const Elem& t) {
  json j = json::parse(t);
  return {j.at(0).get<std::string>(), j.at(1).get<std::string>()};
}

struct UnionFind {
  std::map<Elem, Elem> parent;
  const Elem& find(const Elem& x) {
    auto it = parent.find(x);
    if (it == parent.end()) it = parent.emplace(x, x).first;
    if (it->second == x) return it->second;
    Elem root = find(it->second);  // copy before mutating the node
    it->second = root;
    return it->second;
  }
  // class representatives stay lexicographically least
  void join(const Elem& a, const Elem& b) {
    Elem ra = find(a), rb = find(b);
    if (ra == rb) return;
    if (rb < ra) std::swap(ra, rb);
    parent[rb] = ra;
  }
};

}  // namespace

PushoutResult pushout(const PresheafMap& f, const PresheafMap& g, int bound) {
  auto P = std::make_shared<TruncatedPresheaf>(
      "pushout(" + f.name + "," + g.name + ")", bound);
  const std::vector<Forest> reps = enumerate_forests(bound);

  // per level: tagged element -> class representative
  auto repOf = std::make_shared<std::map<std::string, std::map<Elem, Elem>>>();
  auto membersOf = std::make_shared<std::map<std::string, std::map<Elem, std::vector<Elem>>>>();

  for (const Forest& F : reps) {
    UnionFind uf;
    for (const Elem& b : f.dst->level(F)) uf.find(tag("B", b));
    for (const Elem& c : g.dst->level(F)) uf.find(tag("C", c));
    for (const Elem& a : f.src->level(F))
      uf.join(tag("B", f.component(F, a)), tag("C", g.component(F, a)));
    std::map<Elem, Elem>& rep = (*repOf)[F.code()];
    std::map<Elem, std::vector<Elem>>& members = (*membersOf)[F.code()];
    std::vector<Elem> keys;
    for (const auto& [k, v] : uf.parent) keys.push_back(k);
    for (const Elem& k : keys) {
      const Elem r = uf.find(k);
      rep[k] = r;
      members[r].push_back(k);
    }
    std::vector<Elem> levelElems;
    for (const auto& [r, ms] : members) levelElems.push_back(r);
    P->set_level(F, std::move(levelElems));
  }

  auto sideAct = [f, g](const ForestMorphism& arrow, const TaggedElem& t) {
    return t.side == "B" ? f.dst->act(arrow, t.elem) : g.dst->act(arrow, t.elem);
  };

  for (const Forest& F : reps) {
    auto record = [&](const ForestMorphism& arrow) {
      std::map<Elem, Elem> table;
      for (const auto& [r, ms] : (*membersOf)[F.code()]) {
        Elem target;
        bool first = true;
        for (const Elem& m : ms) {
          TaggedElem t = untag(m);
          const Elem moved = tag(t.side.c_str(), sideAct(arrow, t));
          const Elem tr = (*repOf)[arrow.src.code()].at(moved);
          if (first) {
            target = tr;
            first = false;
          } else if (target != tr) {
            throw std::logic_error("pushout: action not constant on a class (maps not natural?)");
          }
        }
        table[r] = target;
      }
      P->set_action(arrow, std::move(table));
    };
    for (const ElementaryFace& d : elementary_faces(F)) record(d.map);
    for (const ElementaryDegeneracy& s : elementary_degeneracies(F))
      if (s.map.src.total_edges() <= bound) record(s.map);
    for (const ForestMorphism& a : automorphisms(F)) record(a);
  }

  PresheafMap fromB{f.dst, P,
                    [repOf](const Forest& F, const Elem& b) {
                      return repOf->at(F.code()).at(tag("B", b));
                    },
                    "inl"};
  PresheafMap fromC{g.dst, P,
                    [repOf](const Forest& F, const Elem& c) {
                      return repOf->at(F.code()).at(tag("C", c));
                    },
                    "inr"};
  return {P, fromB, fromC};
}

bool is_pushout(const PresheafSquare& s, int bound, std::string* why) {
  const std::vector<Forest> reps = enumerate_forests(bound);
  for (const Forest& F : reps) {
    for (const Elem& a : s.ab.src->level(F)) {
      if (s.bd.component(F, s.ab.component(F, a)) !=
          s.cd.component(F, s.ac.component(F, a))) {
        if (why) *why = "square does not commute at " + F.code();
        return false;
      }
    }
  }
  PushoutResult P = pushout(s.ab, s.ac, bound);
  for (const Forest& F : reps) {
    std::map<Elem, Elem> induced;  // canonical class rep -> D element
    for (const Elem& b : s.ab.dst->level(F)) {
      const Elem r = P.fromB.component(F, b);
      const Elem d = s.bd.component(F, b);
      auto [it, fresh] = induced.emplace(r, d);
      if (!fresh && it->second != d) {
        if (why) *why = "cocone not constant on a pushout class at " + F.code();
        return false;
      }
    }
    for (const Elem& c : s.ac.dst->level(F)) {
      const Elem r = P.fromC.component(F, c);
      const Elem d = s.cd.component(F, c);
      auto [it, fresh] = induced.emplace(r, d);
      if (!fresh && it->second != d) {
        if (why) *why = "cocone not constant on a pushout class at " + F.code();
        return false;
      }
    }
    std::set<Elem> image;
    for (const auto& [r, d] : induced)
      if (!image.insert(d).second) {
        if (why) *why = "induced comparison not injective at " + F.code();
        return false;
      }
    const std::vector<Elem> dl = s.bd.dst->level(F);
    if (image.size() != dl.size() ||
        !std::includes(dl.begin(), dl.end(), image.begin(), image.end())) {
      if (why) *why = "induced comparison not bijective at " + F.code();
      return false;
    }
  }
  return true;
}

namespace {

class UStarPresheaf : public Presheaf {
 public:
  explicit UStarPresheaf(PresheafPtr x) : x_(std::move(x)) {}
  std::string name() const override { return "u_*(" + x_->name() + ")"; }

  std::vector<Elem> level(const Forest& f) const override {
    std::vector<std::vector<Elem>> partial = {{}};
    for (const Tree& t : f.components()) {
      const std::vector<Elem> xs = x_->level(Forest::single(t));
      std::vector<std::vector<Elem>> next;
      for (const auto& p : partial)
        for (const Elem& x : xs) {
          auto q = p;
          q.push_back(x);
          next.push_back(std::move(q));
        }
      partial = std::move(next);
    }
    std::vector<Elem> out;
    for (const auto& tuple : partial) {
      json j = json::array();
      for (const Elem& e : tuple) j.push_back(e);
      out.push_back(j.dump());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  Elem act(const ForestMorphism& arrow, const Elem& x) const override {
    json in = json::parse(x);
    json out = json::array();
    for (int i = 0; i < arrow.src.component_count(); ++i) {
      ForestMorphism part;
      part.src = Forest::single(arrow.src.component(i));
      part.dst = Forest::single(arrow.dst.component(arrow.comp[i]));
      part.comp = {0};
      part.edge = {arrow.edge[i]};
      out.push_back(x_->act(part, in.at(arrow.comp[i]).get<std::string>()));
    }
    return out.dump();
  }

 private:
  PresheafPtr x_;
};

}  // namespace

PresheafPtr u_star(const PresheafPtr& treeLevel) {
  return std::make_shared<UStarPresheaf>(treeLevel);
}

TrackedConcat concat_tracked(const Forest& f, const Forest& g) {
  std::vector<RawTree> raws;
  for (const Tree& t : f.components()) raws.push_back(t.raw());
  for (const Tree& t : g.components()) raws.push_back(t.raw());
  BuiltForest b = build_forest(raws);
  TrackedConcat out;
  out.forest = b.forest;
  for (int i = 0; i < f.component_count(); ++i) out.fComp.push_back(b.comp[i]);
  for (int j = 0; j < g.component_count(); ++j)
    out.gComp.push_back(b.comp[f.component_count() + j]);
  return out;
}

ForestMorphism restrict_morphism(const ForestMorphism& phi,
                                 const std::vector<int>& tgtSubset) {
  std::vector<int> pick;
  for (int i = 0; i < phi.src.component_count(); ++i)
    if (contains(tgtSubset, phi.comp[i])) pick.push_back(i);
  ForestMorphism m;
  m.src = phi.src.restrict(pick);
  m.dst = phi.dst.restrict(tgtSubset);
  for (int i : pick) {
    const auto it = std::find(tgtSubset.begin(), tgtSubset.end(), phi.comp[i]);
    m.comp.push_back(static_cast<int>(it - tgtSubset.begin()));
    m.edge.push_back(phi.edge[i]);
  }
  require_valid(m, "restrict_morphism");
  return m;
}

Elem concat_elem(const std::vector<int>& subset, const Elem& x, const Elem& y) {
  return json::array({int_list(subset), x, y}).dump();
}

namespace {

std::vector<int> complement_of(const std::vector<int>& subset, int n) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (!contains(subset, i)) out.push_back(i);
  return out;
}

class ConcatProductPresheaf : public Presheaf {
 public:
  ConcatProductPresheaf(PresheafPtr x, PresheafPtr y)
      : x_(std::move(x)), y_(std::move(y)) {}
  std::string name() const override {
    return "(" + x_->name() + " ⊕ " + y_->name() + ")";
  }

  std::vector<Elem> level(const Forest& f) const override {
    std::vector<Elem> out;
    for (const std::vector<int>& S : subsets_by_size(f.component_count())) {
      const Forest fs = f.restrict(S);
      const Forest fc = f.restrict(complement_of(S, f.component_count()));
      for (const Elem& xe : x_->level(fs))
        for (const Elem& ye : y_->level(fc)) out.push_back(concat_elem(S, xe, ye));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  Elem act(const ForestMorphism& arrow, const Elem& e) const override {
    json j = json::parse(e);
    std::vector<int> S;
    if (!j.at(0).get<std::string>().empty())
      for (const std::string& p : split(j.at(0).get<std::string>(), ','))
        S.push_back(std::stoi(p));
    const std::vector<int> Sc = complement_of(S, arrow.dst.component_count());
    const ForestMorphism fS = restrict_morphism(arrow, S);
    const ForestMorphism fSc = restrict_morphism(arrow, Sc);
    std::vector<int> pick;
    for (int i = 0; i < arrow.src.component_count(); ++i)
      if (contains(S, arrow.comp[i])) pick.push_back(i);
    return concat_elem(pick, x_->act(fS, j.at(1).get<std::string>()),
                       y_->act(fSc, j.at(2).get<std::string>()));
  }

 private:
  PresheafPtr x_, y_;
};

}  // namespace

PresheafPtr concat_product(const PresheafPtr& x, const PresheafPtr& y) {
  return std::make_shared<ConcatProductPresheaf>(x, y);
}

namespace {

// Concatenation of two morphisms a: F1 -> G1, b: F2 -> G2 into a single
// arrow F1 ⊕ F2 -> G1 ⊕ G2 with canonical sources and targets.
ForestMorphism concat_morphisms(const ForestMorphism& a, const ForestMorphism& b) {
  TrackedConcat src = concat_tracked(a.src, b.src);
  TrackedConcat dst = concat_tracked(a.dst, b.dst);
  ForestMorphism m;
  m.src = src.forest;
  m.dst = dst.forest;
  m.comp.assign(src.forest.component_count(), -1);
  m.edge.resize(src.forest.component_count());
  for (int i = 0; i < a.src.component_count(); ++i) {
    m.comp[src.fComp[i]] = dst.fComp[a.comp[i]];
    m.edge[src.fComp[i]] = a.edge[i];
  }
  for (int i = 0; i < b.src.component_count(); ++i) {
    m.comp[src.gComp[i]] = dst.gComp[b.comp[i]];
    m.edge[src.gComp[i]] = b.edge[i];
  }
  require_valid(m, "concat_morphisms");
  return m;
}

}  // namespace

std::vector<Elem> concat_oracle(const PresheafPtr& x, const PresheafPtr& y,
                                const Forest& f, int extraEdgeBound) {
  const int bound = f.total_edges() + extraEdgeBound;
  const std::vector<Forest> shapes = enumerate_forests(bound);

  struct Vertex {
    Forest f1, f2;
    Elem xe, ye;
    ForestMorphism phi;  // f -> f1 ⊕ f2
    std::vector<int> f1Pos;  // components of the concat coming from f1
  };
  auto vertexKey = [](const Vertex& v) {
    return json::array({v.f1.code(), v.f2.code(), v.xe, v.ye, v.phi.encode()}).dump();
  };

  std::vector<Vertex> vertices;
  for (const Forest& f1 : shapes) {
    const std::vector<Elem> xs = x->level(f1);
    if (xs.empty()) continue;
    for (const Forest& f2 : shapes) {
      const std::vector<Elem> ys = y->level(f2);
      if (ys.empty()) continue;
      TrackedConcat tc = concat_tracked(f1, f2);
      for (const ForestMorphism& phi : hom_set_cached(f, tc.forest))
        for (const Elem& xe : xs)
          for (const Elem& ye : ys)
            vertices.push_back({f1, f2, xe, ye, phi, tc.fComp});
    }
  }

  UnionFind uf;
  for (const Vertex& v : vertices) uf.find(vertexKey(v));

  // relations: (X(a)x, y, φ) ~ (x, y, (a ⊕ id) ∘ φ) and symmetrically
  for (const Vertex& v : vertices) {
    for (const Forest& g1 : shapes) {
      const std::vector<Elem> xs = x->level(g1);
      if (xs.empty()) continue;
      for (const ForestMorphism& a : hom_set_cached(v.f1, g1)) {
        ForestMorphism up = concat_morphisms(a, identity_morphism(v.f2));
        ForestMorphism phi2 = compose(up, v.phi);
        for (const Elem& xg : xs) {
          if (x->act(a, xg) != v.xe) continue;
          TrackedConcat tc = concat_tracked(g1, v.f2);
          Vertex w{g1, v.f2, xg, v.ye, phi2, tc.fComp};
          uf.join(vertexKey(v), vertexKey(w));
        }
      }
    }
    for (const Forest& g2 : shapes) {
      const std::vector<Elem> ys = y->level(g2);
      if (ys.empty()) continue;
      for (const ForestMorphism& b : hom_set_cached(v.f2, g2)) {
        ForestMorphism up = concat_morphisms(identity_morphism(v.f1), b);
        ForestMorphism phi2 = compose(up, v.phi);
        for (const Elem& yg : ys) {
          if (y->act(b, yg) != v.ye) continue;
          TrackedConcat tc = concat_tracked(v.f1, g2);
          Vertex w{v.f1, g2, v.xe, yg, phi2, tc.fComp};
          uf.join(vertexKey(v), vertexKey(w));
        }
      }
    }
  }

  // normal form of a vertex: split f by the side each component lands on
  auto normalForm = [&](const Vertex& v) {
    std::vector<int> S;
    for (int i = 0; i < f.component_count(); ++i)
      if (contains(v.f1Pos, v.phi.comp[i])) S.push_back(i);
    std::vector<int> f1Sorted = v.f1Pos, f2Sorted;
    for (int j = 0; j < v.phi.dst.component_count(); ++j)
      if (!contains(v.f1Pos, j)) f2Sorted.push_back(j);
    std::sort(f1Sorted.begin(), f1Sorted.end());
    const ForestMorphism phi1 = restrict_morphism(v.phi, f1Sorted);
    const ForestMorphism phi2 = restrict_morphism(v.phi, f2Sorted);
    return concat_elem(S, x->act(phi1, v.xe), y->act(phi2, v.ye));
  };

  std::map<Elem, std::set<Elem>> classNF;
  for (const Vertex& v : vertices) classNF[uf.find(vertexKey(v))].insert(normalForm(v));

  std::vector<Elem> out;
  for (const auto& [cls, nfs] : classNF) {
    if (nfs.size() != 1) return {"<coend-mismatch>"};
    out.push_back(*nfs.begin());
  }
  sort_unique(out);
  if (out.size() != classNF.size()) return {"<coend-mismatch>"};
  return out;
}

bool boundary_concat_check(const Forest& f, const Forest& g, std::string* why) {
  TrackedConcat tc = concat_tracked(f, g);
  auto whole = subobject(SieveKind::Boundary, tc.forest);
  auto bf = subobject(SieveKind::Boundary, f);
  auto bg = subobject(SieveKind::Boundary, g);
  std::vector<int> fSorted = tc.fComp, gSorted = tc.gComp;
  std::sort(fSorted.begin(), fSorted.end());
  std::sort(gSorted.begin(), gSorted.end());

  const int bound = f.total_edges() + g.total_edges();
  for (const Forest& L : enumerate_forests(bound)) {
    for (const ForestMorphism& phi : hom_set_cached(L, tc.forest)) {
      const bool whole_in = whole->member(phi);
      const bool left_in = bf->member(restrict_morphism(phi, fSorted));
      const bool right_in = bg->member(restrict_morphism(phi, gSorted));
      if (whole_in != (left_in || right_in)) {
        if (why)
          *why = "level " + L.code() + " element " + phi.encode() +
                 ": boundary=" + std::to_string(whole_in) +
                 " left=" + std::to_string(left_in) +
                 " right=" + std::to_string(right_in);
        return false;
      }
    }
  }
  return true;
}

SieveMapSet sieve_maps(const Sieve& s, const Presheaf& x) {
  const Forest& shape = s.shape();
  const int bound = shape.total_edges();

  // Monic sieve elements in levels up to the shape's size.  Every
  // element factors through a monic one (drop the degenerate part), so
  // these suffice to determine a map out of the sieve.
  auto is_mono = [](const ForestMorphism& m) {
    for (const std::vector<int>& e : m.edge) {
      std::set<int> seen(e.begin(), e.end());
      if (seen.size() != e.size()) return false;
    }
    return true;
  };
  std::vector<ForestMorphism> monos;
  for (const Forest& L : enumerate_forests(bound))
    for (const ForestMorphism& m : hom_set_cached(L, shape))
      if (is_mono(m) && s.member(m)) monos.push_back(m);

  // keep one representative per class of mutually-factoring monos, and
  // only the classes not strictly below another one
  auto keyOf = [](const ForestMorphism& m) { return m.src.code() + "|" + m.encode(); };
  std::vector<ForestMorphism> maximal;
  for (size_t i = 0; i < monos.size(); ++i) {
    bool keep = true;
    for (size_t j = 0; j < monos.size() && keep; ++j) {
      if (i == j) continue;
      const bool iThroughJ = factor_through(monos[i], monos[j]).has_value();
      if (!iThroughJ) continue;
      const bool jThroughI = factor_through(monos[j], monos[i]).has_value();
      if (!jThroughI) keep = false;  // strictly below j
      else if (keyOf(monos[j]) < keyOf(monos[i])) keep = false;  // same class
    }
    if (keep) maximal.push_back(monos[i]);
  }

  // consistency constraints between values at maximal elements
  struct Constraint {
    size_t i, j;
    ForestMorphism psi, chi;  // m_i ∘ psi == m_j ∘ chi
  };
  std::vector<Constraint> constraints;
  for (size_t i = 0; i < maximal.size(); ++i)
    for (size_t j = i; j < maximal.size(); ++j) {
      const int b = std::min(maximal[i].src.total_edges(),
                             maximal[j].src.total_edges());
      for (const Forest& K : enumerate_forests(b))
        for (const ForestMorphism& psi : hom_set_cached(K, maximal[i].src)) {
          const ForestMorphism through = compose(maximal[i], psi);
          if (auto chi = factor_through(through, maximal[j])) {
            if (i == j && psi == *chi) continue;
            constraints.push_back({i, j, psi, *chi});
          }
        }
    }

  SieveMapSet out;
  out.maximal = maximal;
  std::vector<std::vector<Elem>> pools;
  for (const ForestMorphism& m : maximal)
    pools.push_back(x.level(m.src));

  std::vector<Elem> assign(maximal.size());
  std::function<void(size_t)> rec = [&](size_t i) {
    if (i == maximal.size()) {
      out.maps.push_back(assign);
      return;
    }
    for (const Elem& v : pools[i]) {
      assign[i] = v;
      bool ok = true;
      for (const Constraint& c : constraints) {
        if (c.j > i || c.i > i) continue;
        if (c.j != i && c.i != i) continue;
        if (x.act(c.psi, assign[c.i]) != x.act(c.chi, assign[c.j])) {
          ok = false;
          break;
        }
      }
      if (ok) rec(i + 1);
    }
  };
  rec(0);
  std::sort(out.maps.begin(), out.maps.end());
  return out;
}

}  // namespace forestkit
