#pragma once
// Finite rooted non-planar trees and their finite disjoint unions
// (forests), with canonical codes used for isomorphism testing, total
// ordering and deterministic enumeration.
//
// Canonical layout: the edges of a tree are numbered 0..E-1 in
// depth-first order from the root edge 0, visiting the children of an
// edge in ascending order of their subtree codes.  A vertex is
// identified with the edge it caps (its unique outgoing edge), so a
// tree is fully described by the parent relation plus the set of capped
// edges.  Uncapped edges are the leaves; a capped edge with no children
// carries a stump (a vertex with no inputs).

#include <string>
#include <vector>

namespace forestkit {

struct RawTree {
  std::vector<int> parent;  // parent[e] = edge below e, -1 for the root
  std::vector<char> capped; // capped[e] != 0 iff a vertex caps edge e
};

class Tree {
 public:
  // Canonicalizes an explicit parent relation.  Throws
  // std::invalid_argument if the input is not a tree.  If relabel is
  // non-null it receives the map from input edge ids to canonical ids.
  static Tree from_parents(const std::vector<int>& parent,
                           const std::vector<char>& capped,
                           std::vector<int>* relabel = nullptr);
  static Tree from_raw(const RawTree& raw, std::vector<int>* relabel = nullptr);

  static Tree eta();         // bare edge, code "L"
  static Tree corolla(int k);// one vertex with k leaf inputs
  static Tree linear(int n); // chain of n unary vertices; linear(0) == eta

  int edge_count() const { return static_cast<int>(parent_.size()); }
  int vertex_count() const { return vertexCount_; }
  int root() const { return 0; }
  int parent(int e) const { return parent_[e]; }
  bool capped(int e) const { return capped_[e] != 0; }
  const std::vector<int>& children(int e) const { return kids_[e]; }

  std::vector<int> leaf_edges() const;   // uncapped edges, ascending
  std::vector<int> inner_edges() const;  // capped non-root edges, ascending
  std::vector<int> vertices() const;     // capped edges, ascending

  // True iff e1 lies on the path from e2 to the root (so e1 <= e2 in
  // the edge partial order, with the root minimal).
  bool leq(int e1, int e2) const;

  // True iff all inputs of the vertex capping e are leaves (stumps
  // qualify vacuously); such vertices admit leaf faces.
  bool is_leaf_vertex(int e) const;

  RawTree raw() const { return RawTree{parent_, capped_}; }

  const std::string& code() const { return code_; }
  const std::string& subtree_code(int e) const { return sub_[e]; }

  bool operator==(const Tree& o) const { return code_ == o.code_; }
  bool operator!=(const Tree& o) const { return code_ != o.code_; }
  bool operator<(const Tree& o) const { return code_ < o.code_; }

 private:
  Tree() = default;
  std::vector<int> parent_;
  std::vector<char> capped_;
  std::vector<std::vector<int>> kids_;
  std::vector<std::string> sub_;
  std::string code_;
  int vertexCount_ = 0;
};

class Forest {
 public:
  Forest() = default;  // the empty forest, code "0"
  static Forest of(std::vector<Tree> comps);
  static Forest single(const Tree& t);
  static Forest etas(int n);

  const std::vector<Tree>& components() const { return comps_; }
  const Tree& component(int i) const { return comps_[i]; }
  int component_count() const { return static_cast<int>(comps_.size()); }
  bool empty() const { return comps_.empty(); }
  int total_edges() const;
  int total_vertices() const;

  Forest concat(const Forest& o) const;
  // Subforest spanned by the given component indices.
  Forest restrict(const std::vector<int>& idxs) const;

  const std::string& code() const { return code_; }

  bool operator==(const Forest& o) const { return code_ == o.code_; }
  bool operator!=(const Forest& o) const { return code_ != o.code_; }
  bool operator<(const Forest& o) const { return code_ < o.code_; }

 private:
  std::vector<Tree> comps_;  // sorted ascending by code
  std::string code_ = "0";
};

// Canonical code accessors (equal codes iff isomorphic objects).
inline const std::string& canonical_code(const Tree& t) { return t.code(); }
inline const std::string& canonical_code(const Forest& f) { return f.code(); }

// Result of assembling a forest from possibly non-canonical parts:
// the canonical forest plus, per input component, its position in the
// canonical forest and the edge relabelling into it.
struct BuiltForest {
  Forest forest;
  std::vector<int> comp;
  std::vector<std::vector<int>> edge;
};
BuiltForest build_forest(const std::vector<RawTree>& raws);

// Parses a code back into a forest: "0" is the empty forest,
// components are joined by '+', "L" is a bare edge, and "(c1c2...)"
// caps the listed subtrees with a vertex ("()" is a stump).  Accepts
// non-canonical child orders; throws std::invalid_argument otherwise.
Forest parse_forest_code(const std::string& code);

// Iso classes of trees with exactly n edges, ascending code order.
std::vector<Tree> trees_with_edge_count(int n);
// All iso classes with 1..maxEdges edges, ordered by (edges, code).
std::vector<Tree> enumerate_trees(int maxEdges);
// All forest iso classes with at most maxEdges total edges, including
// the empty forest, ordered by (total edges, code).
std::vector<Forest> enumerate_forests(int maxEdges);

}  // namespace forestkit
