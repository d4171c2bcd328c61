#pragma once
// Set-valued contravariant data on the forest category: computable
// presheaves, sieve subobjects of representables, materialized
// truncations, presheaf maps, levelwise pushouts, the product-over-trees
// extension u_star, and the concatenation product with its coend oracle.
//
// Elements are strings; composite elements are JSON arrays so that they
// nest without escaping problems.  All enumerations are sorted, so
// every operation is deterministic.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "forestkit/morphism.hpp"

namespace forestkit {

using Elem = std::string;

class Presheaf {
 public:
  virtual ~Presheaf() = default;
  virtual std::string name() const = 0;
  // Sorted duplicate-free value set at f.
  virtual std::vector<Elem> level(const Forest& f) const = 0;
  // Contravariant action: an arrow F -> G carries level(G) into level(F).
  virtual Elem act(const ForestMorphism& arrow, const Elem& x) const = 0;
};
using PresheafPtr = std::shared_ptr<const Presheaf>;

// Process-wide memoized hom-sets; the cache is internally synchronized
// and behaves identically to recomputation.
const std::vector<ForestMorphism>& hom_set_cached(const Forest& f, const Forest& g);

PresheafPtr representable(const Forest& f);
// The terminal presheaf: a singleton at every level.
PresheafPtr point_presheaf();

// The inclusion of the root edges, one bare edge per component.
ForestMorphism root_inclusion(const Forest& f);

enum class SieveKind { Boundary, InnerHorn, RootHorn, GeneralizedRootHorn, Spine, Roots };

// A sieve on a representable: membership is decided by factoring a test
// morphism through a monic generator, except for the spine, which uses
// its three defining clauses directly.
class Sieve : public Presheaf {
 public:
  const Forest& shape() const { return shape_; }
  SieveKind kind() const { return kind_; }
  const std::vector<int>& params() const { return params_; }
  const std::vector<ForestMorphism>& generators() const { return generators_; }
  bool member(const ForestMorphism& m) const;

  std::string name() const override;
  std::vector<Elem> level(const Forest& f) const override;
  Elem act(const ForestMorphism& arrow, const Elem& x) const override;

 private:
  friend std::shared_ptr<const Sieve> subobject(SieveKind, const Forest&,
                                                const std::vector<int>&);
  Forest shape_;
  SieveKind kind_;
  std::vector<int> params_;
  std::vector<ForestMorphism> generators_;
};

// kind parameters: InnerHorn {component, edge}; RootHorn {component};
// GeneralizedRootHorn {components...} (nonempty); others {}.
std::shared_ptr<const Sieve> subobject(SieveKind kind, const Forest& f,
                                       const std::vector<int>& params = {});

// Materialized finite carrier: levels at every canonical forest with at
// most `bound` edges plus action tables for the elementary arrows
// between them.  General arrows act through the canonical factorization
// into elementary pieces.
class TruncatedPresheaf : public Presheaf {
 public:
  TruncatedPresheaf(std::string name, int bound) : name_(std::move(name)), bound_(bound) {}

  int bound() const { return bound_; }
  void set_level(const Forest& f, std::vector<Elem> elems);
  void set_action(const ForestMorphism& arrow, std::map<Elem, Elem> table);

  static std::shared_ptr<TruncatedPresheaf> truncate(const PresheafPtr& x,
                                                     int bound,
                                                     const std::string& name = "");

  const std::map<std::string, std::vector<Elem>>& levels() const { return levels_; }
  const std::map<std::string, std::map<Elem, Elem>>& actions() const { return actions_; }
  const Forest& representative(const std::string& code) const;

  std::string name() const override { return name_; }
  std::vector<Elem> level(const Forest& f) const override;
  Elem act(const ForestMorphism& arrow, const Elem& x) const override;

  static std::string arrow_key(const ForestMorphism& arrow);

 private:
  Elem elementary_act(const ForestMorphism& arrow, const Elem& x) const;
  std::string name_;
  int bound_;
  std::map<std::string, std::vector<Elem>> levels_;
  std::map<std::string, Forest> reps_;
  std::map<std::string, std::map<Elem, Elem>> actions_;
};

struct PresheafMap {
  PresheafPtr src, dst;
  std::function<Elem(const Forest&, const Elem&)> component;
  std::string name;
};

PresheafMap identity_map(const PresheafPtr& x);
PresheafMap compose_maps(const PresheafMap& outer, const PresheafMap& inner);

// Naturality of m against every elementary arrow whose objects have at
// most `bound` edges (faces, degeneracies, automorphisms).
bool check_naturality(const PresheafMap& m, int bound, std::string* why = nullptr);

// Levelwise injective with the automorphism group of each level shape
// acting freely on the complement of the image.
bool is_normal_mono(const PresheafMap& m, int bound, std::string* why = nullptr);

struct PushoutResult {
  std::shared_ptr<TruncatedPresheaf> object;
  PresheafMap fromB, fromC;
};
// Levelwise pushout of f: A -> B against g: A -> C up to `bound`.
PushoutResult pushout(const PresheafMap& f, const PresheafMap& g, int bound);

struct PresheafSquare {
  PresheafMap ab, ac, bd, cd;  // A->B, A->C, B->D, C->D
};
// True iff the square commutes and D carries the levelwise pushout of
// sets at every representative with at most `bound` edges.
bool is_pushout(const PresheafSquare& s, int bound, std::string* why = nullptr);

// Right Kan extension along trees -> forests: evaluates a tree-indexed
// presheaf on a forest as the product over its components.
PresheafPtr u_star(const PresheafPtr& treeLevel);

// Day-convolution concatenation: (X ⊕ Y)(F) = ⊔ over component subsets
// S of X(F|S) × Y(F|S^c).
PresheafPtr concat_product(const PresheafPtr& x, const PresheafPtr& y);
// Element of the direct formula.
Elem concat_elem(const std::vector<int>& subset, const Elem& x, const Elem& y);

// Literal coend quotient, truncated to shapes with at most
// |E(f)| + extraEdgeBound edges: classes of triples (x, y, φ) under the
// arrow relations, reported by their subset-normal-form representatives.
// Returns a sentinel mismatch marker if any class fails to contain
// exactly one normal form.
std::vector<Elem> concat_oracle(const PresheafPtr& x, const PresheafPtr& y,
                                const Forest& f, int extraEdgeBound = 0);

// The boundary identity for concatenation: levelwise up to
// |E(f)|+|E(g)| edges, the boundary of f ⊕ g is the union of
// (boundary f) ⊕ g and f ⊕ (boundary g) glued along (boundary f) ⊕
// (boundary g).
bool boundary_concat_check(const Forest& f, const Forest& g,
                           std::string* why = nullptr);

// Concatenation with component provenance: which canonical components
// of the result came from each argument.
struct TrackedConcat {
  Forest forest;
  std::vector<int> fComp, gComp;
};
TrackedConcat concat_tracked(const Forest& f, const Forest& g);

// Restriction of φ: L → F to the source components landing in the
// target components listed in tgtSubset (ascending).
ForestMorphism restrict_morphism(const ForestMorphism& phi,
                                 const std::vector<int>& tgtSubset);

// Natural transformations from a sieve into a presheaf, presented by
// their values on the maximal elements of the sieve.
struct SieveMapSet {
  std::vector<ForestMorphism> maximal;
  std::vector<std::vector<Elem>> maps;  // one value per maximal element
};
SieveMapSet sieve_maps(const Sieve& s, const Presheaf& x);

}  // namespace forestkit
