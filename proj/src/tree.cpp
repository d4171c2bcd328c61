#include "forestkit/tree.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

#include "forestkit/util.hpp"

namespace forestkit {

namespace {

// Code of the subtree above `e` in an arbitrary (raw) labelling.
std::string raw_code(const std::vector<std::vector<int>>& kids,
                     const std::vector<char>& capped, int e,
                     std::vector<std::string>& memo) {
  if (!memo[e].empty()) return memo[e];
  std::string c;
  if (!capped[e]) {
    c = "L";
  } else {
    std::vector<std::string> parts;
    parts.reserve(kids[e].size());
    for (int k : kids[e]) parts.push_back(raw_code(kids, capped, k, memo));
    std::sort(parts.begin(), parts.end());
    c = "(" + join(parts, "") + ")";
  }
  memo[e] = c;
  return c;
}

}  // namespace

Tree Tree::from_parents(const std::vector<int>& parent,
                        const std::vector<char>& capped,
                        std::vector<int>* relabel) {
  const int n = static_cast<int>(parent.size());
  if (n == 0) throw std::invalid_argument("tree must have at least one edge");
  if (static_cast<int>(capped.size()) != n)
    throw std::invalid_argument("capped size mismatch");
  int root = -1;
  for (int e = 0; e < n; ++e) {
    if (parent[e] == -1) {
      if (root != -1) throw std::invalid_argument("multiple root edges");
      root = e;
    } else if (parent[e] < 0 || parent[e] >= n) {
      throw std::invalid_argument("parent out of range");
    }
  }
  if (root == -1) throw std::invalid_argument("no root edge");

  std::vector<std::vector<int>> kids(n);
  for (int e = 0; e < n; ++e)
    if (parent[e] != -1) kids[parent[e]].push_back(e);

  // acyclicity + connectedness: every edge must reach the root
  for (int e = 0; e < n; ++e) {
    int cur = e, steps = 0;
    while (cur != root) {
      cur = parent[cur];
      if (cur < 0 || ++steps > n) throw std::invalid_argument("parent cycle");
    }
  }
  // a non-root edge is the input of a vertex, which must cap its parent
  for (int e = 0; e < n; ++e)
    if (parent[e] != -1 && !capped[parent[e]])
      throw std::invalid_argument("edge hangs on an uncapped edge");

  std::vector<std::string> memo(n);
  raw_code(kids, capped, root, memo);

  // depth-first relabelling, children in ascending subtree-code order
  // (ties broken by old id, which does not affect the resulting tree)
  std::vector<int> order;
  order.reserve(n);
  std::function<void(int)> visit = [&](int e) {
    order.push_back(e);
    std::vector<int> ks = kids[e];
    std::sort(ks.begin(), ks.end(), [&](int a, int b) {
      return memo[a] != memo[b] ? memo[a] < memo[b] : a < b;
    });
    for (int k : ks) visit(k);
  };
  visit(root);

  std::vector<int> newId(n, -1);
  for (int i = 0; i < n; ++i) newId[order[i]] = i;

  Tree t;
  t.parent_.assign(n, -1);
  t.capped_.assign(n, 0);
  t.kids_.assign(n, {});
  t.sub_.assign(n, "");
  for (int e = 0; e < n; ++e) {
    const int ne = newId[e];
    t.parent_[ne] = parent[e] == -1 ? -1 : newId[parent[e]];
    t.capped_[ne] = capped[e] ? 1 : 0;
    t.sub_[ne] = memo[e];
    if (capped[e]) ++t.vertexCount_;
  }
  for (int e = 0; e < n; ++e)
    if (t.parent_[e] != -1) t.kids_[t.parent_[e]].push_back(e);
  for (auto& ks : t.kids_) std::sort(ks.begin(), ks.end());
  t.code_ = t.sub_[0];
  if (relabel) *relabel = newId;
  return t;
}

Tree Tree::from_raw(const RawTree& raw, std::vector<int>* relabel) {
  return from_parents(raw.parent, raw.capped, relabel);
}

Tree Tree::eta() { return from_parents({-1}, {0}); }

Tree Tree::corolla(int k) {
  std::vector<int> parent(1 + k, 0);
  parent[0] = -1;
  std::vector<char> capped(1 + k, 0);
  capped[0] = 1;
  return from_parents(parent, capped);
}

Tree Tree::linear(int n) {
  std::vector<int> parent(n + 1);
  std::vector<char> capped(n + 1, 1);
  for (int e = 0; e <= n; ++e) parent[e] = e - 1;
  capped[n] = 0;
  return from_parents(parent, capped);
}

std::vector<int> Tree::leaf_edges() const {
  std::vector<int> out;
  for (int e = 0; e < edge_count(); ++e)
    if (!capped(e)) out.push_back(e);
  return out;
}

std::vector<int> Tree::inner_edges() const {
  std::vector<int> out;
  for (int e = 1; e < edge_count(); ++e)
    if (capped(e)) out.push_back(e);
  return out;
}

std::vector<int> Tree::vertices() const {
  std::vector<int> out;
  for (int e = 0; e < edge_count(); ++e)
    if (capped(e)) out.push_back(e);
  return out;
}

bool Tree::leq(int e1, int e2) const {
  int cur = e2;
  while (cur != -1) {
    if (cur == e1) return true;
    cur = parent_[cur];
  }
  return false;
}

bool Tree::is_leaf_vertex(int e) const {
  if (!capped(e)) return false;
  for (int c : kids_[e])
    if (capped(c)) return false;
  return true;
}

Forest Forest::of(std::vector<Tree> comps) {
  std::sort(comps.begin(), comps.end());
  Forest f;
  f.comps_ = std::move(comps);
  if (f.comps_.empty()) {
    f.code_ = "0";
  } else {
    std::vector<std::string> parts;
    parts.reserve(f.comps_.size());
    for (const Tree& t : f.comps_) parts.push_back(t.code());
    f.code_ = join(parts, "+");
  }
  return f;
}

Forest Forest::single(const Tree& t) { return of({t}); }

Forest Forest::etas(int n) {
  std::vector<Tree> cs(n, Tree::eta());
  return of(std::move(cs));
}

int Forest::total_edges() const {
  int s = 0;
  for (const Tree& t : comps_) s += t.edge_count();
  return s;
}

int Forest::total_vertices() const {
  int s = 0;
  for (const Tree& t : comps_) s += t.vertex_count();
  return s;
}

Forest Forest::concat(const Forest& o) const {
  std::vector<Tree> cs = comps_;
  cs.insert(cs.end(), o.comps_.begin(), o.comps_.end());
  return of(std::move(cs));
}

Forest Forest::restrict(const std::vector<int>& idxs) const {
  std::vector<Tree> cs;
  cs.reserve(idxs.size());
  for (int i : idxs) cs.push_back(comps_.at(i));
  return of(std::move(cs));
}

BuiltForest build_forest(const std::vector<RawTree>& raws) {
  const int n = static_cast<int>(raws.size());
  std::vector<Tree> trees;
  trees.reserve(n);
  std::vector<std::vector<int>> relabels(n);
  for (int i = 0; i < n; ++i)
    trees.push_back(Tree::from_raw(raws[i], &relabels[i]));

  // stable sort by code so equal components keep input order
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return trees[a].code() < trees[b].code();
  });

  BuiltForest out;
  std::vector<Tree> sorted;
  sorted.reserve(n);
  out.comp.assign(n, -1);
  out.edge = std::move(relabels);
  for (int pos = 0; pos < n; ++pos) {
    out.comp[order[pos]] = pos;
    sorted.push_back(trees[order[pos]]);
  }
  out.forest = Forest::of(std::move(sorted));
  return out;
}

namespace {

// Appends the edges of one component code starting at s[pos] to raw;
// returns the edge id of the component's root edge.
int parse_component(const std::string& s, size_t& pos, int parent, RawTree& raw) {
  const int e = static_cast<int>(raw.parent.size());
  if (pos >= s.size()) throw std::invalid_argument("truncated forest code");
  if (s[pos] == 'L') {
    ++pos;
    raw.parent.push_back(parent);
    raw.capped.push_back(0);
    return e;
  }
  if (s[pos] != '(') throw std::invalid_argument("unexpected character in forest code");
  ++pos;
  raw.parent.push_back(parent);
  raw.capped.push_back(1);
  while (pos < s.size() && s[pos] != ')') parse_component(s, pos, e, raw);
  if (pos >= s.size()) throw std::invalid_argument("unbalanced forest code");
  ++pos;  // consume ')'
  return e;
}

}  // namespace

Forest parse_forest_code(const std::string& code) {
  if (code == "0") return Forest();
  std::vector<RawTree> raws;
  size_t pos = 0;
  while (true) {
    RawTree raw;
    parse_component(code, pos, -1, raw);
    raws.push_back(std::move(raw));
    if (pos == code.size()) break;
    if (code[pos] != '+') throw std::invalid_argument("junk after component code");
    ++pos;
  }
  return build_forest(raws).forest;
}

namespace {

// Appends, for every multiset of trees drawn from `pool` (ordered by
// (edges, code)) with total edge count exactly `budget`, the chosen
// component list.  Picks are non-decreasing in pool index.
void multisets_with_total(const std::vector<Tree>& pool, int from, int budget,
                          std::vector<Tree>& cur,
                          const std::function<void(const std::vector<Tree>&)>& emit) {
  if (budget == 0) {
    emit(cur);
    return;
  }
  for (int i = from; i < static_cast<int>(pool.size()); ++i) {
    const int sz = pool[i].edge_count();
    if (sz > budget) continue;
    cur.push_back(pool[i]);
    multisets_with_total(pool, i, budget - sz, cur, emit);
    cur.pop_back();
  }
}

// Trees with exactly n edges, given all trees with fewer edges flattened
// into `smaller` ordered by (edges, code).
std::vector<Tree> build_level(int n, const std::vector<Tree>& smaller) {
  std::vector<Tree> out;
  if (n == 1) out.push_back(Tree::eta());
  std::vector<Tree> cur;
  multisets_with_total(smaller, 0, n - 1, cur, [&](const std::vector<Tree>& subs) {
    // root-cap the multiset: one new root edge carrying a vertex whose
    // inputs are the roots of the chosen subtrees
    RawTree raw;
    raw.parent.push_back(-1);
    raw.capped.push_back(1);
    for (const Tree& s : subs) {
      const int off = static_cast<int>(raw.parent.size());
      for (int e = 0; e < s.edge_count(); ++e) {
        raw.parent.push_back(s.parent(e) == -1 ? 0 : s.parent(e) + off);
        raw.capped.push_back(s.capped(e) ? 1 : 0);
      }
    }
    out.push_back(Tree::from_raw(raw));
  });
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<Tree> enumerate_trees(int maxEdges) {
  std::vector<Tree> all;  // ordered by (edges, code)
  for (int n = 1; n <= maxEdges; ++n) {
    std::vector<Tree> level = build_level(n, all);
    all.insert(all.end(), level.begin(), level.end());
  }
  return all;
}

std::vector<Tree> trees_with_edge_count(int n) {
  if (n <= 0) return {};
  std::vector<Tree> all = enumerate_trees(n - 1);
  return build_level(n, all);
}

std::vector<Forest> enumerate_forests(int maxEdges) {
  std::vector<Tree> pool = enumerate_trees(maxEdges);
  std::vector<Forest> out;
  for (int n = 0; n <= maxEdges; ++n) {
    std::vector<Forest> level;
    std::vector<Tree> cur;
    multisets_with_total(pool, 0, n, cur, [&](const std::vector<Tree>& comps) {
      level.push_back(Forest::of(comps));
    });
    std::sort(level.begin(), level.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

}  // namespace forestkit
