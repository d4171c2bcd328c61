#pragma once
// Arrows of the forest category: a component map together with one edge
// map per source component, valid when every source vertex is carried
// to an honest subtree operation of its target tree and the images of
// distinct components landing in a common target tree are pairwise
// incomparable ("independence").  Includes elementary faces and
// degeneracies, hom-set enumeration, and the canonical factorization of
// an arrow as degeneracy ∘ isomorphism ∘ face.

#include <optional>
#include <string>
#include <vector>

#include "forestkit/tree.hpp"

namespace forestkit {

// The subtree of `s` with the given root edge and leaf frontier, when
// one exists.  The identity witness (e, {e}) has an empty vertex set;
// any other witness is the flood-fill region from rootEdge whose
// frontier is exactly the repetition-free leaf set.
struct SubtreeWitness {
  int rootEdge = -1;
  std::vector<int> regionEdges;     // ascending
  std::vector<int> regionVertices;  // ascending (vertex = capped edge id)
  std::vector<int> leafEdges;       // ascending
  bool identity() const { return regionVertices.empty(); }
};

std::optional<SubtreeWitness> subtree_operation(const Tree& s, int rootEdge,
                                                std::vector<int> leaves);

struct ForestMorphism {
  Forest src, dst;
  std::vector<int> comp;               // source component -> target component
  std::vector<std::vector<int>> edge;  // per source component: edge -> edge

  bool operator==(const ForestMorphism& o) const {
    return src == o.src && dst == o.dst && comp == o.comp && edge == o.edge;
  }
  bool operator<(const ForestMorphism& o) const;

  // Deterministic string key; source and target are implied by context.
  std::string encode() const;
};

// Parses a key produced by encode() back into a morphism from f to g.
ForestMorphism decode_morphism(const std::string& key, const Forest& f,
                               const Forest& g);

bool validate(const ForestMorphism& m, std::string* reason = nullptr);
void require_valid(const ForestMorphism& m, const char* what);

ForestMorphism identity_morphism(const Forest& f);
// outer ∘ inner; requires inner.dst == outer.src.
ForestMorphism compose(const ForestMorphism& outer, const ForestMorphism& inner);

// All valid edge maps t -> s between single trees.
std::vector<std::vector<int>> tree_homs(const Tree& t, const Tree& s);
// The full hom-set in the forest category, sorted by encode().
std::vector<ForestMorphism> hom_set(const Forest& f, const Forest& g);

bool is_isomorphism(const ForestMorphism& m);
std::optional<ForestMorphism> inverse(const ForestMorphism& m);
std::vector<ForestMorphism> automorphisms(const Forest& f);

enum class FaceKind { Inner, Leaf, Root };

// An elementary face of F: contraction of an inner edge, removal of a
// leaf vertex with its inputs, or the root face of one component (for a
// bare-edge component the root face deletes the component).
struct ElementaryFace {
  ForestMorphism map;  // face forest -> F
  int component;
  FaceKind kind;
  int param;  // Inner: contracted edge; Leaf: capped edge of the vertex; Root: -1
  std::string label() const;
};

// An elementary degeneracy of F: the arrow from F with one edge split
// in two by a unary vertex, collapsing that vertex again.
struct ElementaryDegeneracy {
  ForestMorphism map;  // split forest -> F
  int component;
  int edge;  // edge of F doubled in the source
  std::string label() const;
};

std::vector<ElementaryFace> elementary_faces(const Forest& f);
std::vector<ElementaryDegeneracy> elementary_degeneracies(const Forest& f);

struct ElementaryArrows {
  std::vector<ElementaryFace> faces;
  std::vector<ElementaryDegeneracy> degeneracies;
};
ElementaryArrows elementary_arrows(const Forest& f);

// psi = delta ∘ result when psi lands inside the (monic) delta; absence
// is a value.
std::optional<ForestMorphism> factor_through(const ForestMorphism& psi,
                                             const ForestMorphism& delta);

// Writes a levelwise-injective arrow as a composite of elementary
// faces: mono = steps[0].map ∘ steps[1].map ∘ ... ∘ (iso).
struct FaceDecomposition {
  std::vector<ElementaryFace> steps;  // outermost first
  ForestMorphism iso;
};
FaceDecomposition decompose_face(const ForestMorphism& mono);

// m = face ∘ iso ∘ degeneracy, with the outer part a composite of
// elementary faces and the inner part a composite of elementary
// degeneracies (unit-vertex collapses).
struct Factorization {
  ForestMorphism degeneracy, iso, face;
  std::vector<ElementaryDegeneracy> degeneracySteps;  // innermost first
  std::vector<ElementaryFace> faceSteps;              // outermost first
};
Factorization factorize(const ForestMorphism& m);

}  // namespace forestkit
