#include "forestkit/operad.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "forestkit/util.hpp"

using nlohmann::json;

namespace forestkit {

std::vector<int> identity_perm(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

std::vector<int> inverse_perm(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (int i = 0; i < static_cast<int>(p.size()); ++i) inv[p[i]] = i;
  return inv;
}

std::vector<int> compose_perms(const std::vector<int>& sigma,
                               const std::vector<int>& tau) {
  std::vector<int> r(tau.size());
  for (size_t i = 0; i < tau.size(); ++i) r[i] = sigma[tau[i]];
  return r;
}

std::vector<int> block_perm(int n, int m, int a, const std::vector<int>& sigma,
                            const std::vector<int>& tau) {
  // Position of p-input i inside p o_{sigma(a)} q.
  auto pos = [&](int i) { return i < sigma[a] ? i : i + m - 1; };
  std::vector<int> r(n + m - 1);
  for (int j = 0; j < a; ++j) r[j] = pos(sigma[j]);
  for (int b = 0; b < m; ++b) r[a + b] = sigma[a] + tau[b];
  for (int j = a + 1; j < n; ++j) r[j + m - 1] = pos(sigma[j]);
  return r;
}

std::vector<std::vector<int>> all_perms(int n) {
  std::vector<int> p = identity_perm(n);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<std::vector<Colour>> colour_tuples(const Operad& p, int n) {
  const std::vector<Colour> cs = p.colours();
  std::vector<std::vector<Colour>> out = {{}};
  for (int i = 0; i < n; ++i) {
    std::vector<std::vector<Colour>> next;
    for (const auto& t : out)
      for (const Colour& c : cs) {
        auto u = t;
        u.push_back(c);
        next.push_back(std::move(u));
      }
    out = std::move(next);
  }
  return out;
}

namespace {

bool is_identity(const std::vector<int>& perm) {
  for (int i = 0; i < static_cast<int>(perm.size()); ++i)
    if (perm[i] != i) return false;
  return true;
}

// ---- the commutative operad --------------------------------------------

class CommOperad : public Operad {
 public:
  std::string name() const override { return "comm"; }
  std::vector<Colour> colours() const override { return {"*"}; }
  std::vector<OpId> ops(const std::vector<Colour>&, const Colour&) const override {
    return {"*"};
  }
  OpId unit(const Colour&) const override { return "*"; }
  OpId sym(const std::vector<Colour>&, const Colour&, const OpId& op,
           const std::vector<int>&) const override {
    return op;
  }
  OpId compose(const std::vector<Colour>&, const Colour&, const OpId&, int,
               const std::vector<Colour>&, const OpId&) const override {
    return "*";
  }
};

// ---- the unital associative operad -------------------------------------
//
// Operations of arity n are the linear orders of the inputs, encoded as
// the comma-joined position list in multiplication order.

std::vector<int> parse_order(const OpId& op) {
  std::vector<int> out;
  if (op.empty()) return out;
  for (const std::string& part : split(op, ','))
    out.push_back(std::stoi(part));
  return out;
}

OpId print_order(const std::vector<int>& order) {
  std::vector<std::string> parts;
  parts.reserve(order.size());
  for (int v : order) parts.push_back(std::to_string(v));
  return join(parts, ",");
}

class UAssOperad : public Operad {
 public:
  std::string name() const override { return "uass"; }
  std::vector<Colour> colours() const override { return {"x"}; }
  std::vector<OpId> ops(const std::vector<Colour>& inputs, const Colour&) const override {
    std::vector<OpId> out;
    std::vector<int> order = identity_perm(static_cast<int>(inputs.size()));
    do {
      out.push_back(print_order(order));
    } while (std::next_permutation(order.begin(), order.end()));
    std::sort(out.begin(), out.end());
    return out;
  }
  OpId unit(const Colour&) const override { return "0"; }
  OpId sym(const std::vector<Colour>&, const Colour&, const OpId& op,
           const std::vector<int>& perm) const override {
    const std::vector<int> inv = inverse_perm(perm);
    std::vector<int> order = parse_order(op);
    for (int& v : order) v = inv[v];
    return print_order(order);
  }
  OpId compose(const std::vector<Colour>&, const Colour&, const OpId& p, int a,
               const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const int m = static_cast<int>(inputsQ.size());
    std::vector<int> out;
    for (int v : parse_order(p)) {
      if (v < a) {
        out.push_back(v);
      } else if (v == a) {
        for (int w : parse_order(q)) out.push_back(a + w);
      } else {
        out.push_back(v + m - 1);
      }
    }
    return print_order(out);
  }
};

// ---- the free operad on one binary operation ---------------------------
//
// Operations are fully parenthesized products of the distinct input
// positions, e.g. "((0*2)*1)"; there are no constants.

struct BinTerm {
  int leaf = -1;  // leaf label when >= 0
  std::unique_ptr<BinTerm> l, r;
};

BinTerm parse_term(const std::string& s, size_t& pos) {
  BinTerm t;
  if (pos < s.size() && s[pos] == '(') {
    ++pos;
    t.l = std::make_unique<BinTerm>(parse_term(s, pos));
    if (pos >= s.size() || s[pos] != '*') throw std::invalid_argument("bad term");
    ++pos;
    t.r = std::make_unique<BinTerm>(parse_term(s, pos));
    if (pos >= s.size() || s[pos] != ')') throw std::invalid_argument("bad term");
    ++pos;
    return t;
  }
  size_t start = pos;
  while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (pos == start) throw std::invalid_argument("bad term");
  t.leaf = std::stoi(s.substr(start, pos - start));
  return t;
}

std::string relabel_term(const std::string& s, size_t& pos,
                         const std::function<std::string(int)>& f) {
  if (pos < s.size() && s[pos] == '(') {
    ++pos;
    std::string l = relabel_term(s, pos, f);
    ++pos;  // '*'
    std::string r = relabel_term(s, pos, f);
    ++pos;  // ')'
    return "(" + l + "*" + r + ")";
  }
  size_t start = pos;
  while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  return f(std::stoi(s.substr(start, pos - start)));
}

std::string map_labels(const std::string& term,
                       const std::function<std::string(int)>& f) {
  size_t pos = 0;
  return relabel_term(term, pos, f);
}

void terms_over(const std::vector<int>& labels, std::vector<std::string>& out) {
  if (labels.size() == 1) {
    out.push_back(std::to_string(labels[0]));
    return;
  }
  const int n = static_cast<int>(labels.size());
  for (int mask = 1; mask + 1 < (1 << n); ++mask) {
    if (!(mask & 1)) continue;  // fix labels[0] on the left: each planar
                                // labelled shape is still produced once
                                // for every left/right bracketing
    std::vector<int> a, b;
    for (int i = 0; i < n; ++i) ((mask >> i) & 1 ? a : b).push_back(labels[i]);
    std::vector<std::string> ta, tb;
    terms_over(a, ta);
    terms_over(b, tb);
    for (const auto& x : ta)
      for (const auto& y : tb) {
        out.push_back("(" + x + "*" + y + ")");
        out.push_back("(" + y + "*" + x + ")");
      }
  }
}

class FreeBinaryOperad : public Operad {
 public:
  std::string name() const override { return "free-binary"; }
  std::vector<Colour> colours() const override { return {"x"}; }
  std::vector<OpId> ops(const std::vector<Colour>& inputs, const Colour&) const override {
    const int n = static_cast<int>(inputs.size());
    if (n == 0) return {};
    std::vector<std::string> out;
    terms_over(identity_perm(n), out);
    sort_unique(out);
    return out;
  }
  OpId unit(const Colour&) const override { return "0"; }
  OpId sym(const std::vector<Colour>&, const Colour&, const OpId& op,
           const std::vector<int>& perm) const override {
    const std::vector<int> inv = inverse_perm(perm);
    return map_labels(op, [&](int v) { return std::to_string(inv[v]); });
  }
  OpId compose(const std::vector<Colour>&, const Colour&, const OpId& p, int a,
               const std::vector<Colour>& inputsQ, const OpId& q) const override {
    const int m = static_cast<int>(inputsQ.size());
    if (m == 0) throw std::invalid_argument("no nullary operations to compose");
    const std::string shifted =
        map_labels(q, [&](int v) { return std::to_string(v + a); });
    return map_labels(p, [&](int v) {
      if (v < a) return std::to_string(v);
      if (v == a) return shifted;
      return std::to_string(v + m - 1);
    });
  }
};

}  // namespace

OperadPtr comm_operad() { return std::make_shared<CommOperad>(); }
OperadPtr uass_operad() { return std::make_shared<UAssOperad>(); }
OperadPtr free_binary_operad() { return std::make_shared<FreeBinaryOperad>(); }

// ---- axiom audit --------------------------------------------------------

std::vector<std::string> validate_operad(const Operad& p, int arityBound,
                                         int maxReports) {
  std::vector<std::string> bad;
  auto report = [&](const std::string& s) {
    if (static_cast<int>(bad.size()) < maxReports) bad.push_back(s);
  };
  const std::vector<Colour> cs = p.colours();

  for (const Colour& c : cs) {
    const OpId u = p.unit(c);
    if (!contains(p.ops({c}, c), u))
      report("unit of " + c + " is not a unary operation");
  }

  // signature tables: closure of sym, functoriality, unit laws
  for (int n = 0; n <= arityBound; ++n) {
    const auto perms = all_perms(n);
    for (const auto& ins : colour_tuples(p, n)) {
      for (const Colour& out : cs) {
        const std::vector<OpId> os = p.ops(ins, out);
        if (!std::is_sorted(os.begin(), os.end()) ||
            std::adjacent_find(os.begin(), os.end()) != os.end())
          report("operation list not sorted/duplicate-free at " +
                 TableOperad::sig_key(ins, out));
        for (const OpId& o : os) {
          if (p.sym(ins, out, o, identity_perm(n)) != o)
            report("identity action moves " + o);
          for (const auto& sg : perms) {
            std::vector<Colour> permuted(n);
            for (int i = 0; i < n; ++i) permuted[i] = ins[sg[i]];
            const OpId img = p.sym(ins, out, o, sg);
            if (!contains(p.ops(permuted, out), img))
              report("action image " + img + " missing from " +
                     TableOperad::sig_key(permuted, out));
            for (const auto& tu : perms) {
              const OpId two = p.sym(permuted, out, img, tu);
              const OpId direct = p.sym(ins, out, o, compose_perms(sg, tu));
              if (two != direct)
                report("action not functorial on " + o + ": " + two +
                       " != " + direct);
            }
          }
          // unit laws
          for (int a = 0; a < n; ++a) {
            if (p.compose(ins, out, o, a, {ins[a]}, p.unit(ins[a])) != o)
              report("right unit law fails for " + o + " at slot " +
                     std::to_string(a));
          }
          if (p.compose({out}, out, p.unit(out), 0, ins, o) != o)
            report("left unit law fails for " + o);
        }
      }
    }
  }

  // composition: closure, associativity, interchange, equivariance
  for (int n = 1; n <= arityBound; ++n) {
    for (int m = 0; n + m - 1 <= arityBound && m <= arityBound; ++m) {
      const auto permsN = all_perms(n), permsM = all_perms(m);
      for (const auto& insP : colour_tuples(p, n)) {
        for (const Colour& out : cs) {
          const auto opsP = p.ops(insP, out);
          if (opsP.empty()) continue;
          for (int a = 0; a < n; ++a) {
            for (const auto& insQ : colour_tuples(p, m)) {
              const auto opsQ = p.ops(insQ, insP[a]);
              if (opsQ.empty()) continue;
              std::vector<Colour> spliced;
              spliced.insert(spliced.end(), insP.begin(), insP.begin() + a);
              spliced.insert(spliced.end(), insQ.begin(), insQ.end());
              spliced.insert(spliced.end(), insP.begin() + a + 1, insP.end());
              for (const OpId& po : opsP) {
                for (const OpId& qo : opsQ) {
                  const OpId r = p.compose(insP, out, po, a, insQ, qo);
                  if (!contains(p.ops(spliced, out), r)) {
                    report("composite " + r + " missing from " +
                           TableOperad::sig_key(spliced, out));
                    continue;
                  }
                  // equivariance against all pairs of permutations
                  for (const auto& sg : permsN) {
                    int aPre = -1;  // slot with sg[aPre] == a
                    for (int i = 0; i < n; ++i)
                      if (sg[i] == a) aPre = i;
                    std::vector<Colour> insPs(n);
                    for (int i = 0; i < n; ++i) insPs[i] = insP[sg[i]];
                    const OpId ps = p.sym(insP, out, po, sg);
                    for (const auto& tu : permsM) {
                      std::vector<Colour> insQs(m);
                      for (int i = 0; i < m; ++i) insQs[i] = insQ[tu[i]];
                      const OpId qs = p.sym(insQ, insP[a], qo, tu);
                      const OpId lhs = p.compose(insPs, out, ps, aPre, insQs, qs);
                      const OpId rhs =
                          p.sym(spliced, out, r, block_perm(n, m, aPre, sg, tu));
                      if (lhs != rhs) {
                        report("equivariance fails: " + lhs + " != " + rhs +
                               " for p=" + po + " a=" + std::to_string(a) +
                               " q=" + qo);
                      }
                    }
                  }
                  // nested associativity
                  for (int l = 0; l <= arityBound; ++l) {
                    if (n + m + l - 2 > arityBound || m == 0) continue;
                    for (int b = 0; b < m; ++b) {
                      for (const auto& insR : colour_tuples(p, l)) {
                        const auto opsR = p.ops(insR, insQ[b]);
                        for (const OpId& ro : opsR) {
                          const OpId lhs = p.compose(spliced, out, r, a + b, insR, ro);
                          const OpId qr = p.compose(insQ, insP[a], qo, b, insR, ro);
                          std::vector<Colour> insQR;
                          insQR.insert(insQR.end(), insQ.begin(), insQ.begin() + b);
                          insQR.insert(insQR.end(), insR.begin(), insR.end());
                          insQR.insert(insQR.end(), insQ.begin() + b + 1, insQ.end());
                          const OpId rhs = p.compose(insP, out, po, a, insQR, qr);
                          if (lhs != rhs)
                            report("nested associativity fails: " + lhs +
                                   " != " + rhs);
                        }
                      }
                    }
                  }
                  // interchange of distinct slots a < a2
                  for (int a2 = a + 1; a2 < n; ++a2) {
                    for (int l = 0; l <= arityBound; ++l) {
                      if (n + m + l - 2 > arityBound || n + l - 1 > arityBound)
                        continue;
                      for (const auto& insR : colour_tuples(p, l)) {
                        const auto opsR = p.ops(insR, insP[a2]);
                        for (const OpId& ro : opsR) {
                          const OpId lhs =
                              p.compose(spliced, out, r, a2 + m - 1, insR, ro);
                          const OpId pr = p.compose(insP, out, po, a2, insR, ro);
                          std::vector<Colour> insPR;
                          insPR.insert(insPR.end(), insP.begin(), insP.begin() + a2);
                          insPR.insert(insPR.end(), insR.begin(), insR.end());
                          insPR.insert(insPR.end(), insP.begin() + a2 + 1, insP.end());
                          const OpId rhs = p.compose(insPR, out, pr, a, insQ, qo);
                          if (lhs != rhs)
                            report("interchange fails: " + lhs + " != " + rhs);
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
  }
  return bad;
}

bool is_closed(const Operad& p) {
  for (const Colour& c : p.colours())
    if (p.ops({}, c).size() != 1) return false;
  return true;
}

bool is_sigma_free(const Operad& p, int arityBound, std::string* why) {
  for (int n = 2; n <= arityBound; ++n) {
    for (const auto& ins : colour_tuples(p, n)) {
      for (const Colour& out : p.colours()) {
        for (const OpId& o : p.ops(ins, out)) {
          for (const auto& sg : all_perms(n)) {
            if (is_identity(sg)) continue;
            bool stabilizes = true;
            for (int i = 0; i < n && stabilizes; ++i)
              if (ins[sg[i]] != ins[i]) stabilizes = false;
            if (!stabilizes) continue;
            if (p.sym(ins, out, o, sg) == o) {
              if (why)
                *why = "operation " + o + " at " +
                       TableOperad::sig_key(ins, out) +
                       " is fixed by a non-identity permutation";
              return false;
            }
          }
        }
      }
    }
  }
  return true;
}

// ---- table operads ------------------------------------------------------

TableOperad::TableOperad(std::string name, std::vector<Colour> colours,
                         int arityBound)
    : name_(std::move(name)), colours_(std::move(colours)), bound_(arityBound) {
  std::sort(colours_.begin(), colours_.end());
}

std::string TableOperad::sig_key(const std::vector<Colour>& inputs,
                                 const Colour& output) {
  return join(inputs, ",") + ";" + output;
}

std::string TableOperad::sym_key(const std::vector<Colour>& inputs,
                                 const Colour& output, const OpId& op,
                                 const std::vector<int>& perm) {
  return sig_key(inputs, output) + "|" + op + "|" + int_list(perm);
}

std::string TableOperad::compose_key(const std::vector<Colour>& inputsP,
                                     const Colour& outP, const OpId& p, int a,
                                     const std::vector<Colour>& inputsQ,
                                     const OpId& q) {
  return sig_key(inputsP, outP) + "|" + p + "|" + std::to_string(a) + "|" +
         join(inputsQ, ",") + "|" + q;
}

void TableOperad::set_ops(const std::vector<Colour>& inputs, const Colour& output,
                          std::vector<OpId> ids) {
  std::sort(ids.begin(), ids.end());
  ops_[sig_key(inputs, output)] = std::move(ids);
}
void TableOperad::set_unit(const Colour& c, const OpId& op) { units_[c] = op; }
void TableOperad::set_sym(const std::vector<Colour>& inputs, const Colour& output,
                          const OpId& op, const std::vector<int>& perm,
                          const OpId& result) {
  sym_[sym_key(inputs, output, op, perm)] = result;
}
void TableOperad::set_compose(const std::vector<Colour>& inputsP, const Colour& outP,
                              const OpId& p, int a,
                              const std::vector<Colour>& inputsQ, const OpId& q,
                              const OpId& result) {
  comp_[compose_key(inputsP, outP, p, a, inputsQ, q)] = result;
}

std::vector<OpId> TableOperad::ops(const std::vector<Colour>& inputs,
                                   const Colour& output) const {
  if (static_cast<int>(inputs.size()) > bound_)
    throw std::out_of_range("operad table bounded at arity " +
                            std::to_string(bound_));
  auto it = ops_.find(sig_key(inputs, output));
  return it == ops_.end() ? std::vector<OpId>{} : it->second;
}

OpId TableOperad::unit(const Colour& c) const {
  auto it = units_.find(c);
  if (it == units_.end()) throw std::out_of_range("no unit for colour " + c);
  return it->second;
}

OpId TableOperad::sym(const std::vector<Colour>& inputs, const Colour& output,
                      const OpId& op, const std::vector<int>& perm) const {
  if (is_identity(perm)) return op;
  auto it = sym_.find(sym_key(inputs, output, op, perm));
  if (it == sym_.end())
    throw std::out_of_range("no table entry for action " +
                            sym_key(inputs, output, op, perm));
  return it->second;
}

OpId TableOperad::compose(const std::vector<Colour>& inputsP, const Colour& outP,
                          const OpId& p, int a, const std::vector<Colour>& inputsQ,
                          const OpId& q) const {
  auto it = comp_.find(compose_key(inputsP, outP, p, a, inputsQ, q));
  if (it == comp_.end())
    throw std::out_of_range("no table entry for composition " +
                            compose_key(inputsP, outP, p, a, inputsQ, q));
  return it->second;
}

std::shared_ptr<TableOperad> table_from(const Operad& p, int arityBound) {
  auto t = std::make_shared<TableOperad>(
      p.name() + "#table" + std::to_string(arityBound), p.colours(), arityBound);
  for (const Colour& c : p.colours()) t->set_unit(c, p.unit(c));
  for (int n = 0; n <= arityBound; ++n) {
    const auto perms = all_perms(n);
    for (const auto& ins : colour_tuples(p, n)) {
      for (const Colour& out : p.colours()) {
        const auto os = p.ops(ins, out);
        if (os.empty()) continue;
        t->set_ops(ins, out, os);
        for (const OpId& o : os)
          for (const auto& sg : perms)
            t->set_sym(ins, out, o, sg, p.sym(ins, out, o, sg));
      }
    }
  }
  for (int n = 1; n <= arityBound; ++n) {
    for (int m = 0; n + m - 1 <= arityBound && m <= arityBound; ++m) {
      for (const auto& insP : colour_tuples(p, n)) {
        for (const Colour& out : p.colours()) {
          const auto opsP = p.ops(insP, out);
          if (opsP.empty()) continue;
          for (int a = 0; a < n; ++a) {
            for (const auto& insQ : colour_tuples(p, m)) {
              const auto opsQ = p.ops(insQ, insP[a]);
              for (const OpId& po : opsP)
                for (const OpId& qo : opsQ)
                  t->set_compose(insP, out, po, a, insQ, qo,
                                 p.compose(insP, out, po, a, insQ, qo));
            }
          }
        }
      }
    }
  }
  return t;
}

// ---- envelope -----------------------------------------------------------

std::string EnvArrow::encode() const {
  return json::array({json(f), json(ops)}).dump();
}

EnvArrow env_identity(const Operad& p, const EnvObject& obj) {
  EnvArrow a;
  a.f = identity_perm(static_cast<int>(obj.size()));
  for (const Colour& c : obj) a.ops.push_back(p.unit(c));
  return a;
}

std::vector<EnvArrow> env_hom(const Operad& p, const EnvObject& src,
                              const EnvObject& dst) {
  const int m = static_cast<int>(src.size());
  const int n = static_cast<int>(dst.size());
  std::vector<EnvArrow> out;
  if (m > 0 && n == 0) return out;
  std::vector<int> f(m, 0);
  while (true) {
    // decorate this position map
    std::vector<std::vector<OpId>> choices(n);
    bool ok = true;
    for (int j = 0; j < n && ok; ++j) {
      std::vector<Colour> ins;
      for (int i = 0; i < m; ++i)
        if (f[i] == j) ins.push_back(src[i]);
      choices[j] = p.ops(ins, dst[j]);
      if (choices[j].empty()) ok = false;
    }
    if (ok) {
      std::vector<int> pick(n, 0);
      while (true) {
        EnvArrow a;
        a.f = f;
        for (int j = 0; j < n; ++j) a.ops.push_back(choices[j][pick[j]]);
        out.push_back(std::move(a));
        int j = n - 1;
        while (j >= 0 && pick[j] + 1 == static_cast<int>(choices[j].size())) {
          pick[j] = 0;
          --j;
        }
        if (j < 0) break;
        ++pick[j];
      }
    }
    int i = m - 1;
    while (i >= 0 && f[i] + 1 == n) {
      f[i] = 0;
      --i;
    }
    if (i < 0) break;
    ++f[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

EnvArrow env_compose(const Operad& p, const EnvObject& a, const EnvObject& b,
                     const EnvObject& c, const EnvArrow& ab, const EnvArrow& bc) {
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  const int nc = static_cast<int>(c.size());
  EnvArrow out;
  out.f.resize(na);
  for (int i = 0; i < na; ++i) out.f[i] = bc.f[ab.f[i]];
  for (int k = 0; k < nc; ++k) {
    std::vector<int> slots;  // b-positions over k, ascending
    for (int j = 0; j < nb; ++j)
      if (bc.f[j] == k) slots.push_back(j);
    OpId cur = bc.ops[k];
    std::vector<Colour> curIns;
    for (int j : slots) curIns.push_back(b[j]);
    for (int idx = static_cast<int>(slots.size()) - 1; idx >= 0; --idx) {
      const int j = slots[idx];
      std::vector<Colour> qIns;
      std::vector<int> qPos;
      for (int i = 0; i < na; ++i)
        if (ab.f[i] == j) {
          qIns.push_back(a[i]);
          qPos.push_back(i);
        }
      cur = p.compose(curIns, c[k], cur, idx, qIns, ab.ops[j]);
      curIns.erase(curIns.begin() + idx);
      curIns.insert(curIns.begin() + idx, qIns.begin(), qIns.end());
    }
    // reorder the concatenated source positions into ascending order
    std::vector<int> posList;
    for (int j : slots)
      for (int i = 0; i < na; ++i)
        if (ab.f[i] == j) posList.push_back(i);
    std::vector<int> target = posList;
    std::sort(target.begin(), target.end());
    std::vector<int> perm(posList.size());
    for (size_t t = 0; t < target.size(); ++t)
      perm[t] = static_cast<int>(
          std::find(posList.begin(), posList.end(), target[t]) - posList.begin());
    if (!is_identity(perm)) cur = p.sym(curIns, c[k], cur, perm);
    out.ops.push_back(cur);
  }
  return out;
}

// ---- decorations and the nerve -----------------------------------------

Elem ForestDecoration::encode() const {
  json j = json::array();
  for (size_t i = 0; i < edges.size(); ++i)
    j.push_back(json::array({json(edges[i]), json(verts[i])}));
  return j.dump();
}

ForestDecoration ForestDecoration::decode(const Elem& e) {
  ForestDecoration d;
  json j = json::parse(e);
  for (const auto& comp : j) {
    d.edges.push_back(comp[0].get<std::vector<Colour>>());
    d.verts.push_back(comp[1].get<std::vector<OpId>>());
  }
  return d;
}

namespace {

struct RegionResult {
  OpId op;
  std::vector<int> frontier;     // ascending
  std::vector<Colour> inputs;    // colours of frontier
};

RegionResult region_rec(const Operad& p, const Tree& t,
                        const std::vector<Colour>& col,
                        const std::vector<OpId>& vop,
                        const std::map<int, int>& vidx, int e,
                        const std::set<int>& stop) {
  if (stop.count(e))
    return {p.unit(col[e]), {e}, {col[e]}};
  if (!t.capped(e))
    throw std::logic_error("region frontier does not cover leaf edge");
  const std::vector<int>& kids = t.children(e);
  RegionResult r;
  r.op = vop[vidx.at(e)];
  std::vector<Colour> curIns;
  for (int k : kids) curIns.push_back(col[k]);
  std::vector<RegionResult> subs;
  subs.reserve(kids.size());
  for (int k : kids) subs.push_back(region_rec(p, t, col, vop, vidx, k, stop));
  for (int idx = static_cast<int>(kids.size()) - 1; idx >= 0; --idx) {
    const RegionResult& s = subs[idx];
    if (s.frontier.size() == 1 && s.frontier[0] == kids[idx]) continue;  // unit
    r.op = p.compose(curIns, col[e], r.op, idx, s.inputs, s.op);
    curIns.erase(curIns.begin() + idx);
    curIns.insert(curIns.begin() + idx, s.inputs.begin(), s.inputs.end());
  }
  for (const RegionResult& s : subs) {
    r.frontier.insert(r.frontier.end(), s.frontier.begin(), s.frontier.end());
    r.inputs.insert(r.inputs.end(), s.inputs.begin(), s.inputs.end());
  }
  return r;
}

}  // namespace

OpId region_composite(const Operad& p, const Tree& t,
                      const std::vector<Colour>& edgeColour,
                      const std::vector<OpId>& vertexOp, int root,
                      const std::vector<int>& frontier) {
  std::map<int, int> vidx;
  {
    const std::vector<int> vs = t.vertices();
    for (size_t i = 0; i < vs.size(); ++i) vidx[vs[i]] = static_cast<int>(i);
  }
  std::set<int> stop(frontier.begin(), frontier.end());
  if (stop.size() == 1 && stop.count(root))
    return p.unit(edgeColour[root]);
  RegionResult r =
      region_rec(p, t, edgeColour, vertexOp, vidx, root, stop);
  std::vector<int> target = r.frontier;
  std::sort(target.begin(), target.end());
  if (target != std::vector<int>(stop.begin(), stop.end()) ||
      stop.size() != frontier.size())
    throw std::logic_error("region frontier mismatch");
  std::vector<int> perm(frontier.size());
  for (size_t i = 0; i < frontier.size(); ++i)
    perm[i] = static_cast<int>(
        std::find(r.frontier.begin(), r.frontier.end(), frontier[i]) -
        r.frontier.begin());
  if (is_identity(perm)) return r.op;
  return p.sym(r.inputs, edgeColour[root], r.op, perm);
}

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

class NervePresheaf : public Presheaf {
 public:
  explicit NervePresheaf(OperadPtr p) : p_(std::move(p)) {}

  std::string name() const override { return "nerve(" + p_->name() + ")"; }

  std::vector<Elem> level(const Forest& f) const override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = forestCache_.find(f.code());
      if (it != forestCache_.end()) return it->second;
    }
    std::vector<std::vector<Elem>> parts;
    for (const Tree& t : f.components()) parts.push_back(tree_level(t));
    std::vector<Elem> out = {""};
    for (const auto& opts : parts) {
      std::vector<Elem> next;
      next.reserve(out.size() * opts.size());
      for (const Elem& prefix : out)
        for (const Elem& o : opts)
          next.push_back(prefix.empty() ? o : prefix + "," + o);
      out = std::move(next);
    }
    for (Elem& e : out) e = "[" + e + "]";
    std::sort(out.begin(), out.end());
    std::lock_guard<std::mutex> lock(mu_);
    forestCache_[f.code()] = out;
    return out;
  }

  Elem act(const ForestMorphism& m, const Elem& x) const override {
    const ForestDecoration d = ForestDecoration::decode(x);
    ForestDecoration r;
    for (int c = 0; c < m.src.component_count(); ++c) {
      const Tree& t = m.src.component(c);
      const int j = m.comp[c];
      const Tree& s = m.dst.component(j);
      const std::vector<int>& em = m.edge[c];
      std::vector<Colour> cols(t.edge_count());
      for (int e = 0; e < t.edge_count(); ++e) cols[e] = d.edges[j][em[e]];
      std::vector<OpId> ops;
      for (int v : t.vertices()) {
        std::vector<int> frontier;
        for (int k : t.children(v)) frontier.push_back(em[k]);
        ops.push_back(region_composite(*p_, s, d.edges[j], d.verts[j], em[v],
                                       frontier));
      }
      r.edges.push_back(std::move(cols));
      r.verts.push_back(std::move(ops));
    }
    return r.encode();
  }

 private:
  std::vector<Elem> tree_level(const Tree& t) const {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = treeCache_.find(t.code());
      if (it != treeCache_.end()) return it->second;
    }
    std::vector<Elem> out;
    const char* dir = std::getenv("FORESTKIT_CACHE_DIR");
    std::string file;
    if (dir && *dir) {
      file = std::string(dir) + "/level-" +
             hex64(fnv1a(name() + "|" + t.code())) + ".txt";
      std::ifstream in(file);
      if (in) {
        std::string line;
        while (std::getline(in, line))
          if (!line.empty()) out.push_back(line);
        std::lock_guard<std::mutex> lock(mu_);
        treeCache_[t.code()] = out;
        return out;
      }
    }
    out = enumerate_tree(t);
    if (!file.empty()) {
      std::string tmp = file + ".tmp";
      {
        std::ofstream o(tmp);
        for (const Elem& e : out) o << e << "\n";
      }
      std::filesystem::rename(tmp, file);
    }
    std::lock_guard<std::mutex> lock(mu_);
    treeCache_[t.code()] = out;
    return out;
  }

  std::vector<Elem> enumerate_tree(const Tree& t) const {
    const std::vector<Colour> cs = p_->colours();
    const int E = t.edge_count();
    std::vector<Colour> col(E);
    std::vector<Elem> out;
    // colour edges from the top down so each vertex is checkable as
    // soon as its capped edge receives a colour
    std::function<void(int)> assign = [&](int e) {
      if (e < 0) {
        std::vector<std::vector<OpId>> choices;
        for (int v : t.vertices()) {
          std::vector<Colour> ins;
          for (int k : t.children(v)) ins.push_back(col[k]);
          choices.push_back(p_->ops(ins, col[v]));
        }
        std::vector<int> pick(choices.size(), 0);
        while (true) {
          std::vector<OpId> ops;
          for (size_t i = 0; i < choices.size(); ++i)
            ops.push_back(choices[i][pick[i]]);
          json j = json::array({json(col), json(ops)});
          out.push_back(j.dump());
          int i = static_cast<int>(choices.size()) - 1;
          while (i >= 0 && pick[i] + 1 == static_cast<int>(choices[i].size())) {
            pick[i] = 0;
            --i;
          }
          if (i < 0) break;
          ++pick[i];
        }
        return;
      }
      for (const Colour& c : cs) {
        col[e] = c;
        if (t.capped(e)) {
          std::vector<Colour> ins;
          for (int k : t.children(e)) ins.push_back(col[k]);
          if (p_->ops(ins, c).empty()) continue;
        }
        assign(e - 1);
      }
    };
    assign(E - 1);
    std::sort(out.begin(), out.end());
    return out;
  }

  OperadPtr p_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::vector<Elem>> treeCache_;
  mutable std::map<std::string, std::vector<Elem>> forestCache_;
};

}  // namespace

PresheafPtr nerve(const OperadPtr& p) {
  return std::make_shared<NervePresheaf>(p);
}

bool segal_check(const OperadPtr& p, const Forest& f, std::string* why) {
  if (f.empty()) return true;  // both sides are singletons
  PresheafPtr x = nerve(p);
  auto spine = subobject(SieveKind::Spine, f);
  SieveMapSet ms = sieve_maps(*spine, *x);
  std::vector<std::string> spineSide;
  for (const auto& values : ms.maps) spineSide.push_back(join(values, "\x1f"));
  std::sort(spineSide.begin(), spineSide.end());
  std::vector<std::string> nerveSide;
  for (const Elem& e : x->level(f)) {
    std::vector<Elem> tuple;
    for (const ForestMorphism& g : ms.maximal) tuple.push_back(x->act(g, e));
    nerveSide.push_back(join(tuple, "\x1f"));
  }
  std::sort(nerveSide.begin(), nerveSide.end());
  if (std::adjacent_find(nerveSide.begin(), nerveSide.end()) != nerveSide.end()) {
    if (why) *why = "restriction to the spine is not injective at " + f.code();
    return false;
  }
  if (nerveSide != spineSide) {
    if (why)
      *why = "restriction image differs from the spine limit at " + f.code() +
             " (" + std::to_string(nerveSide.size()) + " vs " +
             std::to_string(spineSide.size()) + ")";
    return false;
  }
  return true;
}

}  // namespace forestkit
