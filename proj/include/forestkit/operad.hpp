#pragma once
// Coloured symmetric operads presented in tuple form: operation sets
// indexed by an input colour tuple and an output colour, together with
// units, the right symmetric-group action and partial composition.
// Ships the standard examples (the one-colour commutative and
// associative operads and the free operad on a binary generator),
// finite table-backed operads for fixtures and mutation tests, an
// axiom checker at a fixed arity bound, the enveloping category with
// its arrow calculus, the decoration nerve into presheaves on forests,
// and the Segal evaluation of the nerve against spines.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "forestkit/presheaf.hpp"

namespace forestkit {

using Colour = std::string;
using OpId = std::string;

class Operad {
 public:
  virtual ~Operad() = default;
  virtual std::string name() const = 0;
  virtual std::vector<Colour> colours() const = 0;  // sorted
  // Sorted duplicate-free ids of the operations with this signature.
  virtual std::vector<OpId> ops(const std::vector<Colour>& inputs,
                                const Colour& output) const = 0;
  virtual OpId unit(const Colour& c) const = 0;
  // Right action: the result takes its i-th input from input perm[i] of
  // op, so (op . sigma) . tau = op . (sigma o tau).
  virtual OpId sym(const std::vector<Colour>& inputs, const Colour& output,
                   const OpId& op, const std::vector<int>& perm) const = 0;
  // Partial composition p o_a q: q fills input slot a of p (0-based),
  // its inputs occupying positions a .. a+|inputsQ|-1 of the result.
  virtual OpId compose(const std::vector<Colour>& inputsP, const Colour& outP,
                       const OpId& p, int a, const std::vector<Colour>& inputsQ,
                       const OpId& q) const = 0;
};
using OperadPtr = std::shared_ptr<const Operad>;

// Permutation helpers, all 0-based and in the convention above.
std::vector<int> identity_perm(int n);
std::vector<int> inverse_perm(const std::vector<int>& p);
// (sigma o tau)(i) = sigma(tau(i)).
std::vector<int> compose_perms(const std::vector<int>& sigma,
                               const std::vector<int>& tau);
// The permutation of n+m-1 letters carrying (p o_{sigma(a)} q) to
// (p.sigma) o_a (q.tau): slot a receives the tau-permuted q-block.
std::vector<int> block_perm(int n, int m, int a, const std::vector<int>& sigma,
                            const std::vector<int>& tau);
std::vector<std::vector<int>> all_perms(int n);

// All n-tuples drawn from the operad's colours, in lexicographic order.
std::vector<std::vector<Colour>> colour_tuples(const Operad& p, int n);

// Axiom audit at a fixed arity bound: unit laws, closure and
// functoriality of the symmetric action, closure, associativity and
// equivariance of composition, over every instance whose composite
// arity stays within the bound.  Returns located violations (empty
// means the audit passed); at most `maxReports` are collected.
std::vector<std::string> validate_operad(const Operad& p, int arityBound,
                                         int maxReports = 20);

// Every colour has exactly one constant.
bool is_closed(const Operad& p);
// The stabilizer of each input tuple with >= 2 entries acts freely on
// the operations, checked up to the arity bound.
bool is_sigma_free(const Operad& p, int arityBound,
                   std::string* why = nullptr);

OperadPtr comm_operad();         // one colour, one operation per arity
OperadPtr uass_operad();         // unital associative: linear orders
OperadPtr free_binary_operad();  // free on one binary operation; no constants

// Finite explicit tables up to an arity bound; queries beyond the
// bound throw std::out_of_range.  Entries are mutable so tests can
// corrupt single values as negative controls.
class TableOperad : public Operad {
 public:
  TableOperad(std::string name, std::vector<Colour> colours, int arityBound);

  int arity_bound() const { return bound_; }
  void set_ops(const std::vector<Colour>& inputs, const Colour& output,
               std::vector<OpId> ids);
  void set_unit(const Colour& c, const OpId& op);
  void set_sym(const std::vector<Colour>& inputs, const Colour& output,
               const OpId& op, const std::vector<int>& perm, const OpId& result);
  void set_compose(const std::vector<Colour>& inputsP, const Colour& outP,
                   const OpId& p, int a, const std::vector<Colour>& inputsQ,
                   const OpId& q, const OpId& result);

  std::string name() const override { return name_; }
  std::vector<Colour> colours() const override { return colours_; }
  std::vector<OpId> ops(const std::vector<Colour>& inputs,
                        const Colour& output) const override;
  OpId unit(const Colour& c) const override;
  OpId sym(const std::vector<Colour>& inputs, const Colour& output,
           const OpId& op, const std::vector<int>& perm) const override;
  OpId compose(const std::vector<Colour>& inputsP, const Colour& outP,
               const OpId& p, int a, const std::vector<Colour>& inputsQ,
               const OpId& q) const override;

  // Stable entry keys, shared with the JSON serialization.
  static std::string sig_key(const std::vector<Colour>& inputs, const Colour& output);
  static std::string sym_key(const std::vector<Colour>& inputs, const Colour& output,
                             const OpId& op, const std::vector<int>& perm);
  static std::string compose_key(const std::vector<Colour>& inputsP, const Colour& outP,
                                 const OpId& p, int a,
                                 const std::vector<Colour>& inputsQ, const OpId& q);
  const std::map<std::string, std::vector<OpId>>& op_table() const { return ops_; }
  const std::map<Colour, OpId>& unit_table() const { return units_; }
  const std::map<std::string, OpId>& sym_table() const { return sym_; }
  const std::map<std::string, OpId>& compose_table() const { return comp_; }

 private:
  std::string name_;
  std::vector<Colour> colours_;
  int bound_;
  std::map<std::string, std::vector<OpId>> ops_;
  std::map<Colour, OpId> units_;
  std::map<std::string, OpId> sym_;
  std::map<std::string, OpId> comp_;
};

// Materializes any operad as a table up to the arity bound.
std::shared_ptr<TableOperad> table_from(const Operad& p, int arityBound);

// --- Enveloping category -------------------------------------------------
//
// Objects are colour tuples; an arrow (I, alpha) -> (J, beta) is a map
// f of positions together with one operation per target position j,
// with inputs the source colours over j in ascending position order.

using EnvObject = std::vector<Colour>;

struct EnvArrow {
  std::vector<int> f;       // source position -> target position
  std::vector<OpId> ops;    // one per target position
  std::string encode() const;
  bool operator==(const EnvArrow& o) const { return f == o.f && ops == o.ops; }
  bool operator<(const EnvArrow& o) const { return encode() < o.encode(); }
};

EnvArrow env_identity(const Operad& p, const EnvObject& obj);
// All arrows src -> dst, sorted by encode().
std::vector<EnvArrow> env_hom(const Operad& p, const EnvObject& src,
                              const EnvObject& dst);
// bc after ab: A -> B -> C.
EnvArrow env_compose(const Operad& p, const EnvObject& a, const EnvObject& b,
                     const EnvObject& c, const EnvArrow& ab, const EnvArrow& bc);

// --- Decoration nerve ----------------------------------------------------
//
// A decoration of a forest colours every edge and places an operation
// at every vertex whose inputs are the colours of its input edges in
// ascending edge order and whose output is the colour of the edge it
// caps.  Nerve elements are the JSON encodings of decorations.

struct ForestDecoration {
  std::vector<std::vector<Colour>> edges;  // per component, by edge id
  std::vector<std::vector<OpId>> verts;    // per component, by vertices() position
  Elem encode() const;
  static ForestDecoration decode(const Elem& e);
};

// The composite operation of the decorated region of `t` reaching from
// `root` down to the given frontier, inputs ordered as requested; the
// identity region (frontier == {root}) composes to the unit.
OpId region_composite(const Operad& p, const Tree& t,
                      const std::vector<Colour>& edgeColour,
                      const std::vector<OpId>& vertexOp, int root,
                      const std::vector<int>& frontier);

// The nerve as a computable presheaf.  Levels are memoized per tree;
// when FORESTKIT_CACHE_DIR is set they are also persisted there.
PresheafPtr nerve(const OperadPtr& p);

// The restriction map from the nerve's value at f to the limit of its
// values over the spine is a bijection.
bool segal_check(const OperadPtr& p, const Forest& f, std::string* why = nullptr);

}  // namespace forestkit
