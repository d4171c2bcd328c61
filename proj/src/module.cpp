#include "forestkit/module.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

#include "forestkit/util.hpp"

using nlohmann::json;

namespace forestkit {

namespace {

bool is_identity(const std::vector<int>& perm) {
  for (int i = 0; i < static_cast<int>(perm.size()); ++i)
    if (perm[i] != i) return false;
  return true;
}

EnvArrow decode_env_arrow(const Elem& e) {
  json j = json::parse(e);
  EnvArrow a;
  a.f = j[0].get<std::vector<int>>();
  a.ops = j[1].get<std::vector<OpId>>();
  return a;
}

EnvObject permute_tuple(const EnvObject& colours, const std::vector<int>& perm) {
  EnvObject out(colours.size());
  for (size_t i = 0; i < colours.size(); ++i) out[i] = colours[perm[i]];
  return out;
}

// The arrow of the envelope collapsing the block a..a+|insQ|-1 of the
// spliced tuple back onto slot a by feeding it q, everything else by
// units.
EnvArrow slot_arrow(const Operad& p, const EnvObject& colours, int a,
                    const std::vector<Colour>& insQ, const OpId& q) {
  const int n = static_cast<int>(colours.size());
  const int m = static_cast<int>(insQ.size());
  EnvArrow e;
  e.f.resize(n + m - 1);
  for (int i = 0; i < a; ++i) e.f[i] = i;
  for (int b = 0; b < m; ++b) e.f[a + b] = a;
  for (int i = a + m; i < n + m - 1; ++i) e.f[i] = i - m + 1;
  for (int j = 0; j < n; ++j) e.ops.push_back(j == a ? q : p.unit(colours[j]));
  return e;
}

// The arrow of the envelope realizing a right permutation action:
// source tuple colours∘perm, everything mapped by units.
EnvArrow perm_arrow(const Operad& p, const EnvObject& colours,
                    const std::vector<int>& perm) {
  EnvArrow e;
  e.f = perm;
  for (const Colour& c : colours) e.ops.push_back(p.unit(c));
  return e;
}

}  // namespace

EnvObject splice_tuple(const EnvObject& colours, int a,
                       const std::vector<Colour>& ins) {
  EnvObject out;
  out.insert(out.end(), colours.begin(), colours.begin() + a);
  out.insert(out.end(), ins.begin(), ins.end());
  out.insert(out.end(), colours.begin() + a + 1, colours.end());
  return out;
}

// ---- axiom audit --------------------------------------------------------

std::vector<std::string> validate_module(const RightModule& m, int arityBound,
                                         int maxReports) {
  std::vector<std::string> bad;
  auto report = [&](const std::string& s) {
    if (static_cast<int>(bad.size()) < maxReports) bad.push_back(s);
  };
  const OperadPtr p = m.over();

  // value tables: closure and functoriality of the symmetric action,
  // triviality of the unit action
  for (int n = 0; n <= arityBound; ++n) {
    const auto perms = all_perms(n);
    for (const auto& ins : colour_tuples(*p, n)) {
      const std::vector<Elem> vals = m.values(ins);
      if (!std::is_sorted(vals.begin(), vals.end()) ||
          std::adjacent_find(vals.begin(), vals.end()) != vals.end())
        report("value list not sorted/duplicate-free at " +
               TableModule::tuple_key(ins));
      for (const Elem& x : vals) {
        if (m.sym(ins, x, identity_perm(n)) != x)
          report("identity action moves " + x);
        for (const auto& sg : perms) {
          const EnvObject permuted = permute_tuple(ins, sg);
          const Elem img = m.sym(ins, x, sg);
          if (!contains(m.values(permuted), img)) {
            report("action image " + img + " missing from " +
                   TableModule::tuple_key(permuted));
            continue;
          }
          for (const auto& tu : perms) {
            const Elem two = m.sym(permuted, img, tu);
            const Elem direct = m.sym(ins, x, compose_perms(sg, tu));
            if (two != direct)
              report("action not functorial on " + x + ": " + two +
                     " != " + direct);
          }
        }
        for (int a = 0; a < n; ++a) {
          if (m.act(ins, x, a, {ins[a]}, p->unit(ins[a])) != x)
            report("unit action moves " + x + " at slot " + std::to_string(a));
        }
      }
    }
  }

  // partial actions: closure, equivariance, sequential and parallel
  // compatibility with composition
  for (int n = 1; n <= arityBound; ++n) {
    for (int mq = 0; n + mq - 1 <= arityBound && mq <= arityBound; ++mq) {
      const auto permsN = all_perms(n), permsM = all_perms(mq);
      for (const auto& ins : colour_tuples(*p, n)) {
        const std::vector<Elem> vals = m.values(ins);
        if (vals.empty()) continue;
        for (int a = 0; a < n; ++a) {
          for (const auto& insQ : colour_tuples(*p, mq)) {
            const auto opsQ = p->ops(insQ, ins[a]);
            if (opsQ.empty()) continue;
            const EnvObject spliced = splice_tuple(ins, a, insQ);
            for (const Elem& x : vals) {
              for (const OpId& qo : opsQ) {
                const Elem r = m.act(ins, x, a, insQ, qo);
                if (!contains(m.values(spliced), r)) {
                  report("action image " + r + " missing from " +
                         TableModule::tuple_key(spliced));
                  continue;
                }
                // equivariance against all pairs of permutations
                for (const auto& sg : permsN) {
                  int aPre = -1;  // slot with sg[aPre] == a
                  for (int i = 0; i < n; ++i)
                    if (sg[i] == a) aPre = i;
                  const EnvObject insS = permute_tuple(ins, sg);
                  const Elem xs = m.sym(ins, x, sg);
                  for (const auto& tu : permsM) {
                    const std::vector<Colour> insQs = permute_tuple(insQ, tu);
                    const OpId qs = p->sym(insQ, ins[a], qo, tu);
                    const Elem lhs = m.act(insS, xs, aPre, insQs, qs);
                    const Elem rhs =
                        m.sym(spliced, r, block_perm(n, mq, aPre, sg, tu));
                    if (lhs != rhs)
                      report("equivariance fails: " + lhs + " != " + rhs +
                             " for x=" + x + " a=" + std::to_string(a) +
                             " q=" + qo);
                  }
                }
                // feeding into the freshly attached block
                for (int l = 0; l <= arityBound; ++l) {
                  if (n + mq + l - 2 > arityBound || mq == 0) continue;
                  for (int b = 0; b < mq; ++b) {
                    for (const auto& insR : colour_tuples(*p, l)) {
                      for (const OpId& ro : p->ops(insR, insQ[b])) {
                        const Elem lhs = m.act(spliced, r, a + b, insR, ro);
                        const OpId qr =
                            p->compose(insQ, ins[a], qo, b, insR, ro);
                        const Elem rhs =
                            m.act(ins, x, a, splice_tuple(insQ, b, insR), qr);
                        if (lhs != rhs)
                          report("sequential action fails: " + lhs +
                                 " != " + rhs);
                      }
                    }
                  }
                }
                // acting at distinct slots a < a2 in either order
                for (int a2 = a + 1; a2 < n; ++a2) {
                  for (int l = 0; l <= arityBound; ++l) {
                    if (n + mq + l - 2 > arityBound || n + l - 1 > arityBound)
                      continue;
                    for (const auto& insR : colour_tuples(*p, l)) {
                      for (const OpId& ro : p->ops(insR, ins[a2])) {
                        const Elem lhs =
                            m.act(spliced, r, a2 + mq - 1, insR, ro);
                        const Elem xr = m.act(ins, x, a2, insR, ro);
                        const Elem rhs = m.act(splice_tuple(ins, a2, insR), xr,
                                               a, insQ, qo);
                        if (lhs != rhs)
                          report("parallel action fails: " + lhs +
                                 " != " + rhs);
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return bad;
}

// ---- the standard examples ---------------------------------------------

namespace {

class FreeModule final : public RightModule {
 public:
  FreeModule(OperadPtr p, EnvObject gen)
      : p_(std::move(p)), gen_(std::move(gen)) {}

  std::string name() const override {
    return "free(" + p_->name() + ";" + json(gen_).dump() + ")";
  }
  OperadPtr over() const override { return p_; }

  std::vector<Elem> values(const EnvObject& colours) const override {
    std::vector<Elem> out;
    for (const EnvArrow& a : env_hom(*p_, colours, gen_))
      out.push_back(a.encode());
    return out;  // env_hom is already sorted by encode
  }

  Elem sym(const EnvObject& colours, const Elem& x,
           const std::vector<int>& perm) const override {
    const EnvObject src = permute_tuple(colours, perm);
    return env_compose(*p_, src, colours, gen_, perm_arrow(*p_, colours, perm),
                       decode_env_arrow(x))
        .encode();
  }

  Elem act(const EnvObject& colours, const Elem& x, int a,
           const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const EnvObject src = splice_tuple(colours, a, inputsQ);
    return env_compose(*p_, src, colours, gen_,
                       slot_arrow(*p_, colours, a, inputsQ, q),
                       decode_env_arrow(x))
        .encode();
  }

 private:
  OperadPtr p_;
  EnvObject gen_;
};

class OperadAsModule final : public RightModule {
 public:
  explicit OperadAsModule(OperadPtr p) : p_(std::move(p)) {}

  std::string name() const override { return "self(" + p_->name() + ")"; }
  OperadPtr over() const override { return p_; }

  std::vector<Elem> values(const EnvObject& colours) const override {
    std::vector<Elem> out;
    for (const Colour& c : p_->colours())
      for (const OpId& o : p_->ops(colours, c))
        out.push_back(elem(c, o));
    sort_unique(out);
    return out;
  }

  Elem sym(const EnvObject& colours, const Elem& x,
           const std::vector<int>& perm) const override {
    const auto [c, o] = parse(x);
    return elem(c, p_->sym(colours, c, o, perm));
  }

  Elem act(const EnvObject& colours, const Elem& x, int a,
           const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const auto [c, o] = parse(x);
    return elem(c, p_->compose(colours, c, o, a, inputsQ, q));
  }

 private:
  static Elem elem(const Colour& c, const OpId& o) {
    return json::array({c, o}).dump();
  }
  static std::pair<Colour, OpId> parse(const Elem& x) {
    json j = json::parse(x);
    return {j[0].get<Colour>(), j[1].get<OpId>()};
  }
  OperadPtr p_;
};

// Over the one-colour operad with a unique operation per arity the
// envelope is the category of finite sets, so a right module is a
// presheaf there; bitstrings pull back along the maps.
class BitstringModule final : public RightModule {
 public:
  BitstringModule() : p_(comm_operad()) {}

  std::string name() const override { return "bitstrings"; }
  OperadPtr over() const override { return p_; }

  std::vector<Elem> values(const EnvObject& colours) const override {
    const int n = static_cast<int>(colours.size());
    std::vector<Elem> out;
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::string s(n, '0');
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) s[i] = '1';
      out.push_back(s);
    }
    sort_unique(out);
    return out;
  }

  Elem sym(const EnvObject& colours, const Elem& x,
           const std::vector<int>& perm) const override {
    std::string s(x.size(), '0');
    for (size_t i = 0; i < x.size(); ++i) s[i] = x[perm[i]];
    (void)colours;
    return s;
  }

  Elem act(const EnvObject& colours, const Elem& x, int a,
           const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const int n = static_cast<int>(colours.size());
    const int mq = static_cast<int>(inputsQ.size());
    std::string s(n + mq - 1, '0');
    for (int i = 0; i < n + mq - 1; ++i) {
      const int pre = i < a ? i : (i < a + mq ? a : i - mq + 1);
      s[i] = x[pre];
    }
    (void)q;
    return s;
  }

 private:
  OperadPtr p_;
};

}  // namespace

ModulePtr free_module(const OperadPtr& p, const EnvObject& gen) {
  return std::make_shared<FreeModule>(p, gen);
}

ModulePtr operad_as_module(const OperadPtr& p) {
  return std::make_shared<OperadAsModule>(p);
}

ModulePtr bitstring_module() { return std::make_shared<BitstringModule>(); }

// ---- explicit tables ----------------------------------------------------

TableModule::TableModule(std::string name, OperadPtr over, int arityBound)
    : name_(std::move(name)), over_(std::move(over)), bound_(arityBound) {}

std::string TableModule::tuple_key(const EnvObject& colours) {
  return json(colours).dump();
}

std::string TableModule::sym_key(const EnvObject& colours, const Elem& x,
                                 const std::vector<int>& perm) {
  return tuple_key(colours) + "|" + x + "|" + int_list(perm);
}

std::string TableModule::act_key(const EnvObject& colours, const Elem& x,
                                 int a, const std::vector<Colour>& inputsQ,
                                 const OpId& q) {
  return tuple_key(colours) + "|" + x + "|" + std::to_string(a) + "|" +
         json(inputsQ).dump() + "|" + q;
}

void TableModule::set_values(const EnvObject& colours, std::vector<Elem> vals) {
  sort_unique(vals);
  values_[tuple_key(colours)] = std::move(vals);
}

void TableModule::set_sym(const EnvObject& colours, const Elem& x,
                          const std::vector<int>& perm, const Elem& result) {
  sym_[sym_key(colours, x, perm)] = result;
}

void TableModule::set_act(const EnvObject& colours, const Elem& x, int a,
                          const std::vector<Colour>& inputsQ, const OpId& q,
                          const Elem& result) {
  act_[act_key(colours, x, a, inputsQ, q)] = result;
}

std::vector<Elem> TableModule::values(const EnvObject& colours) const {
  auto it = values_.find(tuple_key(colours));
  if (it == values_.end()) {
    if (static_cast<int>(colours.size()) > bound_)
      throw std::out_of_range("value query beyond table bound: " +
                              tuple_key(colours));
    return {};
  }
  return it->second;
}

Elem TableModule::sym(const EnvObject& colours, const Elem& x,
                      const std::vector<int>& perm) const {
  auto it = sym_.find(sym_key(colours, x, perm));
  if (it == sym_.end())
    throw std::out_of_range("action query missing from table: " +
                            sym_key(colours, x, perm));
  return it->second;
}

Elem TableModule::act(const EnvObject& colours, const Elem& x, int a,
                      const std::vector<Colour>& inputsQ, const OpId& q) const {
  auto it = act_.find(act_key(colours, x, a, inputsQ, q));
  if (it == act_.end())
    throw std::out_of_range("action query missing from table: " +
                            act_key(colours, x, a, inputsQ, q));
  return it->second;
}

std::shared_ptr<TableModule> table_from_module(const RightModule& m,
                                               int arityBound) {
  auto t = std::make_shared<TableModule>("table(" + m.name() + ")", m.over(),
                                         arityBound);
  const OperadPtr p = m.over();
  for (int n = 0; n <= arityBound; ++n) {
    const auto perms = all_perms(n);
    for (const auto& ins : colour_tuples(*p, n)) {
      const std::vector<Elem> vals = m.values(ins);
      t->set_values(ins, vals);
      for (const Elem& x : vals) {
        for (const auto& sg : perms) t->set_sym(ins, x, sg, m.sym(ins, x, sg));
        for (int a = 0; a < n; ++a) {
          for (int mq = 0; n + mq - 1 <= arityBound; ++mq) {
            for (const auto& insQ : colour_tuples(*p, mq)) {
              for (const OpId& q : p->ops(insQ, ins[a]))
                t->set_act(ins, x, a, insQ, q, m.act(ins, x, a, insQ, q));
            }
          }
        }
      }
    }
  }
  return t;
}

// ---- whole-arrow action -------------------------------------------------

Elem module_act_env(const RightModule& m, const EnvObject& src,
                    const EnvObject& dst, const EnvArrow& e, const Elem& x) {
  const int ns = static_cast<int>(src.size());
  const int nd = static_cast<int>(dst.size());
  Elem cur = x;
  EnvObject curCols = dst;
  // feed the target slots from the top down so the earlier slot
  // indices stay valid
  for (int k = nd - 1; k >= 0; --k) {
    std::vector<Colour> ins;
    for (int i = 0; i < ns; ++i)
      if (e.f[i] == k) ins.push_back(src[i]);
    cur = m.act(curCols, cur, k, ins, e.ops[k]);
    curCols.erase(curCols.begin() + k);
    curCols.insert(curCols.begin() + k, ins.begin(), ins.end());
  }
  // the source positions now sit in fibre-concatenation order
  std::vector<int> posList;
  for (int k = 0; k < nd; ++k)
    for (int i = 0; i < ns; ++i)
      if (e.f[i] == k) posList.push_back(i);
  std::vector<int> perm(ns);
  for (int t = 0; t < ns; ++t)
    perm[t] = static_cast<int>(std::find(posList.begin(), posList.end(), t) -
                               posList.begin());
  if (!is_identity(perm)) cur = m.sym(curCols, cur, perm);
  return cur;
}

// ---- direct sum ---------------------------------------------------------

Elem boxplus_elem(const std::vector<int>& subset, const Elem& x,
                  const Elem& y) {
  return json::array({int_list(subset), x, y}).dump();
}

namespace {

struct BoxplusParts {
  std::vector<int> S;
  Elem x, y;
};

BoxplusParts parse_boxplus(const Elem& z) {
  json j = json::parse(z);
  BoxplusParts out;
  const std::string s = j[0].get<std::string>();
  for (const std::string& part : split(s, ','))
    if (!part.empty()) out.S.push_back(std::stoi(part));
  out.x = j[1].get<std::string>();
  out.y = j[2].get<std::string>();
  return out;
}

class BoxplusModule final : public RightModule {
 public:
  BoxplusModule(ModulePtr m, ModulePtr l)
      : m_(std::move(m)), l_(std::move(l)), p_(m_->over()) {}

  std::string name() const override {
    return "boxplus(" + m_->name() + "," + l_->name() + ")";
  }
  OperadPtr over() const override { return p_; }

  std::vector<Elem> values(const EnvObject& colours) const override {
    const int n = static_cast<int>(colours.size());
    std::vector<Elem> out;
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<int> S;
      EnvObject colsS, colsSc;
      for (int i = 0; i < n; ++i) {
        if (mask & (1 << i)) {
          S.push_back(i);
          colsS.push_back(colours[i]);
        } else {
          colsSc.push_back(colours[i]);
        }
      }
      for (const Elem& x : m_->values(colsS))
        for (const Elem& y : l_->values(colsSc))
          out.push_back(boxplus_elem(S, x, y));
    }
    sort_unique(out);
    return out;
  }

  Elem sym(const EnvObject& colours, const Elem& z,
           const std::vector<int>& perm) const override {
    const int n = static_cast<int>(colours.size());
    const BoxplusParts bp = parse_boxplus(z);
    std::vector<char> inS(n, 0);
    std::vector<int> rank(n, -1);
    for (size_t t = 0; t < bp.S.size(); ++t) {
      inS[bp.S[t]] = 1;
      rank[bp.S[t]] = static_cast<int>(t);
    }
    EnvObject colsS, colsSc;
    std::vector<int> rankC(n, -1);
    for (int i = 0, c = 0; i < n; ++i) {
      if (inS[i])
        colsS.push_back(colours[i]);
      else {
        rankC[i] = c++;
        colsSc.push_back(colours[i]);
      }
    }
    std::vector<int> S2, pm, pl;
    for (int i = 0; i < n; ++i) {
      if (inS[perm[i]]) {
        S2.push_back(i);
        pm.push_back(rank[perm[i]]);
      } else {
        pl.push_back(rankC[perm[i]]);
      }
    }
    return boxplus_elem(S2, m_->sym(colsS, bp.x, pm), l_->sym(colsSc, bp.y, pl));
  }

  Elem act(const EnvObject& colours, const Elem& z, int a,
           const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const int n = static_cast<int>(colours.size());
    const int mq = static_cast<int>(inputsQ.size());
    const BoxplusParts bp = parse_boxplus(z);
    std::vector<char> inS(n, 0);
    for (int i : bp.S) inS[i] = 1;
    EnvObject colsS, colsSc;
    int rankA = -1;
    for (int i = 0; i < n; ++i) {
      if (inS[i]) {
        if (i == a) rankA = static_cast<int>(colsS.size());
        colsS.push_back(colours[i]);
      } else {
        if (i == a) rankA = static_cast<int>(colsSc.size());
        colsSc.push_back(colours[i]);
      }
    }
    // membership of the spliced positions: the block joins a's side
    std::vector<int> S2;
    for (int i = 0; i < n + mq - 1; ++i) {
      const int pre = i < a ? i : (i < a + mq ? a : i - mq + 1);
      if (inS[pre]) S2.push_back(i);
    }
    if (inS[a])
      return boxplus_elem(S2, m_->act(colsS, bp.x, rankA, inputsQ, q), bp.y);
    return boxplus_elem(S2, bp.x, l_->act(colsSc, bp.y, rankA, inputsQ, q));
  }

 private:
  ModulePtr m_, l_;
  OperadPtr p_;
};

}  // namespace

ModulePtr boxplus(const ModulePtr& m, const ModulePtr& l) {
  if (m->over()->name() != l->over()->name())
    throw std::invalid_argument("direct sum needs modules over one operad");
  if (!is_closed(*m->over()))
    throw std::invalid_argument(
        "direct sum requires a closed operad: the splitting feeds the "
        "missing side through the constants");
  return std::make_shared<BoxplusModule>(m, l);
}

std::vector<Elem> boxplus_oracle(const RightModule& m, const RightModule& l,
                                 const EnvObject& at, int arityBound) {
  const OperadPtr p = m.over();
  // nodes: a value of each module plus a connecting arrow from `at`
  // into the concatenated carrier tuples
  struct Node {
    EnvObject j1, j2;
    Elem x, y;
    std::string e;
  };
  std::vector<Node> nodes;
  std::map<std::string, int> id;
  auto key = [](const Node& n) {
    return json::array({json(n.j1), json(n.j2), n.x, n.y, n.e}).dump();
  };
  std::vector<std::vector<EnvObject>> tuples(arityBound + 1);
  for (int n = 0; n <= arityBound; ++n) tuples[n] = colour_tuples(*p, n);
  for (int n1 = 0; n1 <= arityBound; ++n1) {
    for (const EnvObject& j1 : tuples[n1]) {
      const std::vector<Elem> xs = m.values(j1);
      if (xs.empty()) continue;
      for (int n2 = 0; n2 <= arityBound; ++n2) {
        for (const EnvObject& j2 : tuples[n2]) {
          const std::vector<Elem> ys = l.values(j2);
          if (ys.empty()) continue;
          EnvObject j = j1;
          j.insert(j.end(), j2.begin(), j2.end());
          for (const EnvArrow& e : env_hom(*p, at, j)) {
            for (const Elem& x : xs)
              for (const Elem& y : ys) {
                Node nd{j1, j2, x, y, e.encode()};
                if (id.emplace(key(nd), static_cast<int>(nodes.size())).second)
                  nodes.push_back(nd);
              }
          }
        }
      }
    }
  }
  std::vector<int> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  // relations: move an arrow on one side between the module value and
  // the connector (the other side by transitivity)
  auto relate = [&](bool left) {
    for (int nk = 0; nk <= arityBound; ++nk) {
      for (const EnvObject& k1 : tuples[nk]) {
        for (int nj = 0; nj <= arityBound; ++nj) {
          for (const EnvObject& j1 : tuples[nj]) {
            const std::vector<EnvArrow> phis = env_hom(*p, k1, j1);
            if (phis.empty()) continue;
            for (int no = 0; no <= arityBound; ++no) {
              for (const EnvObject& other : tuples[no]) {
                const std::vector<Elem> xs =
                    left ? m.values(j1) : l.values(j1);
                const std::vector<Elem> os =
                    left ? l.values(other) : m.values(other);
                if (xs.empty() || os.empty()) continue;
                EnvObject kCat = left ? k1 : other;
                const EnvObject& kTail = left ? other : k1;
                kCat.insert(kCat.end(), kTail.begin(), kTail.end());
                EnvObject jCat = left ? j1 : other;
                const EnvObject& jTail = left ? other : j1;
                jCat.insert(jCat.end(), jTail.begin(), jTail.end());
                for (const EnvArrow& phi : phis) {
                  // phi extended by the identity of the other side
                  EnvArrow wide;
                  const int shift = left ? static_cast<int>(j1.size())
                                         : static_cast<int>(other.size());
                  if (left) {
                    wide.f = phi.f;
                    for (size_t i = 0; i < other.size(); ++i)
                      wide.f.push_back(static_cast<int>(i) + shift);
                    wide.ops = phi.ops;
                    for (const Colour& c : other)
                      wide.ops.push_back(p->unit(c));
                  } else {
                    for (size_t i = 0; i < other.size(); ++i)
                      wide.f.push_back(static_cast<int>(i));
                    for (int v : phi.f) wide.f.push_back(v + shift);
                    for (const Colour& c : other)
                      wide.ops.push_back(p->unit(c));
                    wide.ops.insert(wide.ops.end(), phi.ops.begin(),
                                    phi.ops.end());
                  }
                  for (const Elem& x : xs) {
                    const Elem moved =
                        left ? module_act_env(m, k1, j1, phi, x)
                             : module_act_env(l, k1, j1, phi, x);
                    for (const Elem& o : os) {
                      for (const EnvArrow& e : env_hom(*p, at, kCat)) {
                        const EnvArrow comp =
                            env_compose(*p, at, kCat, jCat, e, wide);
                        Node lhs, rhs;
                        if (left) {
                          lhs = Node{k1, other, moved, o, e.encode()};
                          rhs = Node{j1, other, x, o, comp.encode()};
                        } else {
                          lhs = Node{other, k1, o, moved, e.encode()};
                          rhs = Node{other, j1, o, x, comp.encode()};
                        }
                        auto li = id.find(key(lhs)), ri = id.find(key(rhs));
                        if (li != id.end() && ri != id.end())
                          unite(li->second, ri->second);
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
    }
  };
  relate(true);
  relate(false);
  std::map<int, std::string> reps;
  for (size_t v = 0; v < nodes.size(); ++v) {
    const int r = find(static_cast<int>(v));
    const std::string k = key(nodes[v]);
    auto it = reps.find(r);
    if (it == reps.end() || k < it->second) reps[r] = k;
  }
  std::vector<Elem> out;
  for (const auto& [r, k] : reps) out.push_back(k);
  sort_unique(out);
  return out;
}

// ---- decorated-forest evaluation ---------------------------------------

Elem act_forest_order(const OperadPtr&, const RightModule& m,
                      const Forest& f, const Elem& decoration, const Elem& x,
                      const std::vector<std::pair<int, int>>& order) {
  const ForestDecoration d = ForestDecoration::decode(decoration);
  std::vector<std::map<int, int>> vpos(f.component_count());
  for (int c = 0; c < f.component_count(); ++c) {
    const std::vector<int> vs = f.component(c).vertices();
    for (size_t i = 0; i < vs.size(); ++i)
      vpos[c][vs[i]] = static_cast<int>(i);
  }
  std::vector<std::pair<int, int>> frontier;
  for (int c = 0; c < f.component_count(); ++c) frontier.push_back({c, 0});
  auto cols = [&]() {
    EnvObject t;
    for (const auto& [c, e] : frontier) t.push_back(d.edges[c][e]);
    return t;
  };
  Elem cur = x;
  for (const auto& [c, v] : order) {
    const auto it = std::find(frontier.begin(), frontier.end(),
                              std::make_pair(c, v));
    if (it == frontier.end() || !f.component(c).capped(v))
      throw std::invalid_argument("evaluation order is not top-down at " +
                                  std::to_string(c) + ":" + std::to_string(v));
    const int a = static_cast<int>(it - frontier.begin());
    const std::vector<int>& kids = f.component(c).children(v);
    std::vector<Colour> ins;
    for (int kk : kids) ins.push_back(d.edges[c][kk]);
    cur = m.act(cols(), cur, a, ins, d.verts[c][vpos[c].at(v)]);
    frontier.erase(frontier.begin() + a);
    for (size_t t = 0; t < kids.size(); ++t)
      frontier.insert(frontier.begin() + a + static_cast<int>(t),
                      {c, kids[t]});
  }
  for (const auto& [c, e] : frontier)
    if (f.component(c).capped(e))
      throw std::invalid_argument("evaluation order misses a vertex");
  // reorder onto the leaves in edge order, components in order
  std::vector<std::pair<int, int>> target;
  for (int c = 0; c < f.component_count(); ++c)
    for (int e : f.component(c).leaf_edges()) target.push_back({c, e});
  std::vector<int> perm(target.size());
  for (size_t t = 0; t < target.size(); ++t)
    perm[t] = static_cast<int>(
        std::find(frontier.begin(), frontier.end(), target[t]) -
        frontier.begin());
  if (!is_identity(perm)) cur = m.sym(cols(), cur, perm);
  return cur;
}

Elem act_forest(const OperadPtr& p, const RightModule& m, const Forest& f,
                const Elem& decoration, const Elem& x) {
  // canonical order: repeatedly consume the first capped frontier edge
  std::vector<std::pair<int, int>> order;
  std::vector<std::pair<int, int>> frontier;
  for (int c = 0; c < f.component_count(); ++c) frontier.push_back({c, 0});
  while (true) {
    auto it = std::find_if(frontier.begin(), frontier.end(),
                           [&](const std::pair<int, int>& fe) {
                             return f.component(fe.first).capped(fe.second);
                           });
    if (it == frontier.end()) break;
    order.push_back(*it);
    const std::vector<int>& kids =
        f.component(it->first).children(it->second);
    const int c = it->first;
    const int a = static_cast<int>(it - frontier.begin());
    frontier.erase(frontier.begin() + a);
    for (size_t t = 0; t < kids.size(); ++t)
      frontier.insert(frontier.begin() + a + static_cast<int>(t),
                      {c, kids[t]});
  }
  return act_forest_order(p, m, f, decoration, x, order);
}

// ---- the module nerve ---------------------------------------------------

Elem module_nerve_elem(const Elem& decoration, const Elem& value) {
  return json::array({decoration, value}).dump();
}

namespace {

std::pair<Elem, Elem> parse_nerve_elem(const Elem& cell) {
  json j = json::parse(cell);
  return {j[0].get<std::string>(), j[1].get<std::string>()};
}

EnvObject root_colours(const ForestDecoration& d) {
  EnvObject out;
  for (const auto& comp : d.edges) out.push_back(comp[0]);
  return out;
}

struct PrunedResult {
  OpId op;
  std::vector<int> kept;        // depth-first order
  std::vector<Colour> inputs;   // colours of kept
};

// The composite reaching from e up to the kept edges, with every
// branch missing them absorbed through the constants at its leaves.
PrunedResult pruned_rec(const Operad& p, const Tree& t,
                        const std::vector<Colour>& col,
                        const std::vector<OpId>& vop,
                        const std::map<int, int>& vidx, int e,
                        const std::set<int>& keep) {
  if (keep.count(e)) return {p.unit(col[e]), {e}, {col[e]}};
  if (!t.capped(e)) {
    const std::vector<OpId> cs = p.ops({}, col[e]);
    if (cs.size() != 1)
      throw std::invalid_argument("pruning needs a unique constant at " +
                                  col[e]);
    return {cs[0], {}, {}};
  }
  const std::vector<int>& kids = t.children(e);
  PrunedResult r;
  r.op = vop[vidx.at(e)];
  std::vector<Colour> curIns;
  for (int kk : kids) curIns.push_back(col[kk]);
  std::vector<PrunedResult> subs;
  subs.reserve(kids.size());
  for (int kk : kids)
    subs.push_back(pruned_rec(p, t, col, vop, vidx, kk, keep));
  for (int idx = static_cast<int>(kids.size()) - 1; idx >= 0; --idx) {
    const PrunedResult& s = subs[idx];
    if (s.kept.size() == 1 && s.kept[0] == kids[idx]) continue;  // unit
    r.op = p.compose(curIns, col[e], r.op, idx, s.inputs, s.op);
    curIns.erase(curIns.begin() + idx);
    curIns.insert(curIns.begin() + idx, s.inputs.begin(), s.inputs.end());
  }
  for (const PrunedResult& s : subs) {
    r.kept.insert(r.kept.end(), s.kept.begin(), s.kept.end());
    r.inputs.insert(r.inputs.end(), s.inputs.begin(), s.inputs.end());
  }
  return r;
}

// The envelope arrow between root-colour tuples induced by a forest
// morphism against a decoration of its target.
struct RootTransform {
  EnvObject src, dst;
  EnvArrow arrow;
};

RootTransform root_transform(const Operad& p, const ForestMorphism& psi,
                             const ForestDecoration& d) {
  RootTransform rt;
  const int nG = psi.src.component_count();
  const int nF = psi.dst.component_count();
  rt.arrow.f.resize(nG);
  for (int i = 0; i < nG; ++i) {
    rt.arrow.f[i] = psi.comp[i];
    rt.src.push_back(d.edges[psi.comp[i]][psi.edge[i][0]]);
  }
  rt.dst = root_colours(d);
  for (int j = 0; j < nF; ++j) {
    const Tree& t = psi.dst.component(j);
    std::map<int, int> vidx;
    {
      const std::vector<int> vs = t.vertices();
      for (size_t i = 0; i < vs.size(); ++i)
        vidx[vs[i]] = static_cast<int>(i);
    }
    std::set<int> keep;
    std::vector<int> want;  // images in ascending source position
    for (int i = 0; i < nG; ++i)
      if (psi.comp[i] == j) {
        keep.insert(psi.edge[i][0]);
        want.push_back(psi.edge[i][0]);
      }
    PrunedResult r =
        pruned_rec(p, t, d.edges[j], d.verts[j], vidx, 0, keep);
    std::vector<int> perm(want.size());
    for (size_t t2 = 0; t2 < want.size(); ++t2)
      perm[t2] = static_cast<int>(
          std::find(r.kept.begin(), r.kept.end(), want[t2]) - r.kept.begin());
    OpId op = r.op;
    if (!is_identity(perm)) op = p.sym(r.inputs, d.edges[j][0], op, perm);
    rt.arrow.ops.push_back(op);
  }
  return rt;
}

class ModuleNervePresheaf final : public Presheaf {
 public:
  ModuleNervePresheaf(OperadPtr p, ModulePtr m, PresheafPtr nv)
      : p_(std::move(p)), m_(std::move(m)), nv_(std::move(nv)) {}

  std::string name() const override {
    return "module_nerve(" + m_->name() + ")";
  }

  std::vector<Elem> level(const Forest& f) const override {
    std::vector<Elem> out;
    for (const Elem& base : nv_->level(f)) {
      const ForestDecoration d = ForestDecoration::decode(base);
      for (const Elem& v : m_->values(root_colours(d)))
        out.push_back(module_nerve_elem(base, v));
    }
    sort_unique(out);
    return out;
  }

  Elem act(const ForestMorphism& arrow, const Elem& x) const override {
    const auto [base, v] = parse_nerve_elem(x);
    const Elem base2 = nv_->act(arrow, base);
    const RootTransform rt =
        root_transform(*p_, arrow, ForestDecoration::decode(base));
    const Elem v2 = module_act_env(*m_, rt.src, rt.dst, rt.arrow, v);
    return module_nerve_elem(base2, v2);
  }

 private:
  OperadPtr p_;
  ModulePtr m_;
  PresheafPtr nv_;
};

}  // namespace

ModuleNerve nerve_module(const OperadPtr& p, const ModulePtr& m) {
  if (!is_closed(*p))
    throw std::invalid_argument(
        "module nerve requires a closed operad: root transforms absorb "
        "missing branches through the constants");
  if (m->over()->name() != p->name())
    throw std::invalid_argument("module nerve needs a module over the "
                                "given operad");
  PresheafPtr nv = nerve(p);
  auto sp = std::make_shared<ModuleNervePresheaf>(p, m, nv);
  ModuleNerve out;
  out.presheaf = sp;
  out.projection = PresheafMap{
      sp, nv,
      [](const Forest&, const Elem& x) { return parse_nerve_elem(x).first; },
      "module_nerve_projection(" + m->name() + ")"};
  return out;
}

// ---- left adjoint of the module nerve -----------------------------------

namespace {

class TauModule final : public RightModule {
 public:
  TauModule(OperadPtr p, const PresheafMap& alpha, int edgeBound)
      : p_(std::move(p)), name_("tau(" + alpha.name + ")") {
    std::map<std::string, int> index;
    const std::vector<Forest> forests = enumerate_forests(edgeBound);
    for (const Forest& f : forests) {
      for (const Elem& x : alpha.src->level(f)) {
        Cell c;
        c.f = f;
        c.deco = ForestDecoration::decode(alpha.component(f, x));
        c.rho = root_colours(c.deco);
        index[f.code() + "|" + x] = static_cast<int>(cells_.size());
        cells_.push_back(std::move(c));
      }
    }
    for (const Forest& f : forests) {
      std::vector<ForestMorphism> arrows;
      for (const auto& fc : elementary_faces(f)) arrows.push_back(fc.map);
      for (const auto& dg : elementary_degeneracies(f))
        if (dg.map.src.total_edges() <= edgeBound) arrows.push_back(dg.map);
      const ForestMorphism id = identity_morphism(f);
      for (const auto& au : automorphisms(f))
        if (!(au == id)) arrows.push_back(au);
      for (const ForestMorphism& psi : arrows) {
        for (const Elem& x : alpha.src->level(f)) {
          const Elem y = alpha.src->act(psi, x);
          const int cG = index.at(psi.src.code() + "|" + y);
          const int cF = index.at(f.code() + "|" + x);
          const RootTransform rt =
              root_transform(*p_, psi, cells_[cF].deco);
          if (rt.src != cells_[cG].rho)
            throw std::logic_error("the map is not natural over the nerve");
          rel_.push_back({cG, cF, rt.arrow});
        }
      }
    }
  }

  std::string name() const override { return name_; }
  OperadPtr over() const override { return p_; }

  std::vector<Elem> values(const EnvObject& colours) const override {
    return table(colours).values;
  }

  Elem sym(const EnvObject& colours, const Elem& x,
           const std::vector<int>& perm) const override {
    const auto [ci, enc] = parse(x);
    const EnvObject src = permute_tuple(colours, perm);
    const EnvArrow na =
        env_compose(*p_, src, colours, cells_[ci].rho,
                    perm_arrow(*p_, colours, perm), decode_env_arrow(enc));
    return canonical(src, ci, na.encode());
  }

  Elem act(const EnvObject& colours, const Elem& x, int a,
           const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const auto [ci, enc] = parse(x);
    const EnvObject src = splice_tuple(colours, a, inputsQ);
    const EnvArrow na = env_compose(*p_, src, colours, cells_[ci].rho,
                                    slot_arrow(*p_, colours, a, inputsQ, q),
                                    decode_env_arrow(enc));
    return canonical(src, ci, na.encode());
  }

 private:
  struct Cell {
    Forest f;
    ForestDecoration deco;
    EnvObject rho;
  };
  struct Relation {
    int small, big;  // cell indices
    EnvArrow connect;  // rho(small) -> rho(big)
  };
  struct Table {
    std::map<std::pair<int, std::string>, Elem> canon;
    std::vector<Elem> values;
  };

  static Elem elem(int ci, const std::string& enc) {
    return json::array({ci, enc}).dump();
  }
  static std::pair<int, std::string> parse(const Elem& x) {
    json j = json::parse(x);
    return {j[0].get<int>(), j[1].get<std::string>()};
  }

  const Table& table(const EnvObject& colours) const {
    const std::string key = json(colours).dump();
    std::lock_guard<std::mutex> lock(mu_);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
    Table t;
    std::vector<std::pair<int, std::string>> pool;
    std::map<std::pair<int, std::string>, int> id;
    std::vector<std::vector<EnvArrow>> homs(cells_.size());
    for (size_t ci = 0; ci < cells_.size(); ++ci) {
      homs[ci] = env_hom(*p_, colours, cells_[ci].rho);
      for (const EnvArrow& a : homs[ci]) {
        id[{static_cast<int>(ci), a.encode()}] =
            static_cast<int>(pool.size());
        pool.push_back({static_cast<int>(ci), a.encode()});
      }
    }
    std::vector<int> parent(pool.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    for (const Relation& r : rel_) {
      for (const EnvArrow& g : homs[r.small]) {
        const EnvArrow comp =
            env_compose(*p_, colours, cells_[r.small].rho, cells_[r.big].rho,
                        g, r.connect);
        int a = find(id.at({r.small, g.encode()}));
        int b = find(id.at({r.big, comp.encode()}));
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
    std::map<int, std::pair<int, std::string>> reps;
    for (size_t v = 0; v < pool.size(); ++v) {
      const int r = find(static_cast<int>(v));
      auto ri = reps.find(r);
      if (ri == reps.end() || pool[v] < ri->second) reps[r] = pool[v];
    }
    for (size_t v = 0; v < pool.size(); ++v)
      t.canon[pool[v]] = elem(reps[find(static_cast<int>(v))].first,
                              reps[find(static_cast<int>(v))].second);
    for (const auto& [r, rep] : reps) t.values.push_back(elem(rep.first, rep.second));
    sort_unique(t.values);
    return tables_[key] = std::move(t);
  }

  Elem canonical(const EnvObject& colours, int ci,
                 const std::string& enc) const {
    return table(colours).canon.at({ci, enc});
  }

  OperadPtr p_;
  std::string name_;
  std::vector<Cell> cells_;
  std::vector<Relation> rel_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Table> tables_;
};

}  // namespace

ModulePtr tau(const OperadPtr& p, const PresheafMap& alpha, int edgeBound) {
  return std::make_shared<TauModule>(p, alpha, edgeBound);
}

// ---- attachment filtration of the bare edges ---------------------------

CounitFiltration counit_filtration(const OperadPtr& p,
                                   const std::vector<Colour>& rootColours,
                                   int vertexBound, int edgeBound) {
  if (!is_closed(*p))
    throw std::invalid_argument("the filtration requires a closed operad");
  std::string why;
  if (!is_sigma_free(*p, std::max(2, edgeBound), &why))
    throw std::invalid_argument(
        "the filtration requires free symmetric actions: " + why);
  const int k = static_cast<int>(rootColours.size());
  CounitFiltration out;
  out.colours = rootColours;
  out.generated = free_module(p, rootColours);
  out.ambient = nerve_module(p, out.generated).presheaf;
  out.start = Forest::etas(k);
  {
    ForestDecoration d0;
    for (int c = 0; c < k; ++c) {
      d0.edges.push_back({rootColours[c]});
      d0.verts.push_back({});
    }
    out.startCell = module_nerve_elem(d0.encode(),
                                      env_identity(*p, rootColours).encode());
  }
  std::vector<int> allComps(k);
  std::iota(allComps.begin(), allComps.end(), 0);
  for (const Forest& f : enumerate_forests(edgeBound)) {
    if (f.component_count() != k) continue;
    if (f.total_vertices() < 1 || f.total_vertices() > vertexBound) continue;
    for (const Elem& cell : out.ambient->level(f)) {
      const auto [base, val] = parse_nerve_elem(cell);
      const EnvArrow v = decode_env_arrow(val);
      // the module value must be a pure relabelling of the generator
      std::vector<char> hit(k, 0);
      bool bijective = static_cast<int>(v.f.size()) == k;
      for (int i : v.f) {
        if (i < 0 || i >= k || hit[i]) bijective = false;
        if (i >= 0 && i < k) hit[i] = 1;
      }
      if (!bijective) continue;
      bool units = true;
      for (int j = 0; j < k; ++j)
        if (v.ops[j] != p->unit(rootColours[j])) units = false;
      if (!units) continue;
      // the base must not factor through an edge collapse
      const ForestDecoration d = ForestDecoration::decode(base);
      bool degenerate = false;
      for (int c = 0; c < f.component_count() && !degenerate; ++c) {
        const Tree& t = f.component(c);
        const std::vector<int> vs = t.vertices();
        for (size_t i = 0; i < vs.size(); ++i) {
          if (t.children(vs[i]).size() == 1 &&
              d.verts[c][i] == p->unit(d.edges[c][vs[i]])) {
            degenerate = true;
            break;
          }
        }
      }
      if (degenerate) continue;
      CertificateStep step;
      step.kind = "generalized";
      step.shape = f;
      step.data = allComps;
      step.cell = cell;
      out.steps.push_back(std::move(step));
    }
  }
  std::sort(out.steps.begin(), out.steps.end(),
            [](const CertificateStep& a, const CertificateStep& b) {
              const auto ka = std::make_tuple(a.shape.total_vertices(),
                                              a.shape.total_edges(),
                                              a.shape.code(), a.cell);
              const auto kb = std::make_tuple(b.shape.total_vertices(),
                                              b.shape.total_edges(),
                                              b.shape.code(), b.cell);
              return ka < kb;
            });
  return out;
}

// ---- monoidality --------------------------------------------------------

MonoidalityReport monoidality_witness(const OperadPtr& p, const ModulePtr& m,
                                      const ModulePtr& l, int edgeBound) {
  MonoidalityReport rep;
  auto issue = [&](const std::string& s) {
    rep.ok = false;
    if (rep.issues.size() < 20) rep.issues.push_back(s);
  };
  const ModulePtr ml = boxplus(m, l);
  const ModuleNerve nml = nerve_module(p, ml);
  const ModuleNerve nm = nerve_module(p, m);
  const ModuleNerve nl = nerve_module(p, l);
  const PresheafPtr cp = concat_product(nm.presheaf, nl.presheaf);

  auto witness = [&](const Elem& z) {
    const auto [base, val] = parse_nerve_elem(z);
    const ForestDecoration d = ForestDecoration::decode(base);
    const BoxplusParts bp = parse_boxplus(val);
    ForestDecoration dS, dSc;
    std::vector<char> inS(d.edges.size(), 0);
    for (int i : bp.S) inS[i] = 1;
    for (size_t c = 0; c < d.edges.size(); ++c) {
      (inS[c] ? dS : dSc).edges.push_back(d.edges[c]);
      (inS[c] ? dS : dSc).verts.push_back(d.verts[c]);
    }
    return concat_elem(bp.S, module_nerve_elem(dS.encode(), bp.x),
                       module_nerve_elem(dSc.encode(), bp.y));
  };

  for (const Forest& f : enumerate_forests(edgeBound)) {
    const std::vector<Elem> lhs = nml.presheaf->level(f);
    const std::vector<Elem> rhs = cp->level(f);
    rep.sizes[f.code()] = static_cast<int>(lhs.size());
    if (lhs.size() != rhs.size())
      issue("level sizes differ at " + f.code() + ": " +
            std::to_string(lhs.size()) + " vs " + std::to_string(rhs.size()));
    std::set<Elem> seen;
    for (const Elem& z : lhs) {
      const Elem w = witness(z);
      if (!std::binary_search(rhs.begin(), rhs.end(), w))
        issue("witness leaves the product at " + f.code() + ": " + w);
      if (!seen.insert(w).second)
        issue("witness collides at " + f.code() + ": " + w);
    }
    // naturality against every elementary arrow into f
    std::vector<ForestMorphism> arrows;
    for (const auto& fc : elementary_faces(f)) arrows.push_back(fc.map);
    for (const auto& dg : elementary_degeneracies(f))
      if (dg.map.src.total_edges() <= edgeBound) arrows.push_back(dg.map);
    const ForestMorphism id = identity_morphism(f);
    for (const auto& au : automorphisms(f))
      if (!(au == id)) arrows.push_back(au);
    for (const ForestMorphism& psi : arrows) {
      for (const Elem& z : lhs) {
        const Elem a = witness(nml.presheaf->act(psi, z));
        const Elem b = cp->act(psi, witness(z));
        if (a != b)
          issue("witness not natural at " + f.code() + " along " +
                psi.encode() + ": " + a + " != " + b);
      }
    }
  }
  return rep;
}

}  // namespace forestkit
