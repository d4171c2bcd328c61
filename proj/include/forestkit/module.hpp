#pragma once
// Right modules over a coloured operad, in the same tuple-form
// presentation as the operads themselves: a finite value set for every
// colour tuple, a right symmetric action, and partial actions feeding
// an operation into one slot.  Ships free modules on envelope objects,
// an operad acting on itself, a presheaf-on-finite-sets example over
// the one-colour closed operad, finite table modules for fixtures and
// mutation tests, an axiom checker, the two-module direct sum with a
// literal coend oracle, evaluation of a whole decorated forest from
// the roots to the leaves, the module nerve over the operad nerve with
// its projection, the left adjoint of the module nerve, the
// root-anodyne attachment filtration of bare edges into the nerve of a
// free module, and the strong-monoidality comparison between the
// module nerve of a direct sum and the concatenation product.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "forestkit/lifting.hpp"
#include "forestkit/operad.hpp"
#include "forestkit/presheaf.hpp"

namespace forestkit {

class RightModule {
 public:
  virtual ~RightModule() = default;
  virtual std::string name() const = 0;
  virtual OperadPtr over() const = 0;
  // Sorted duplicate-free elements at a colour tuple (the empty tuple
  // included).
  virtual std::vector<Elem> values(const EnvObject& colours) const = 0;
  // Right action: the result takes its i-th input from input perm[i],
  // in the same convention as Operad::sym.
  virtual Elem sym(const EnvObject& colours, const Elem& x,
                   const std::vector<int>& perm) const = 0;
  // Partial action x ._a q: the operation q (inputs inputsQ, output
  // colours[a]) fills slot a; its inputs occupy positions
  // a .. a+|inputsQ|-1 of the resulting tuple.
  virtual Elem act(const EnvObject& colours, const Elem& x, int a,
                   const std::vector<Colour>& inputsQ,
                   const OpId& q) const = 0;
};
using ModulePtr = std::shared_ptr<const RightModule>;

// The tuple obtained by replacing slot a with the block `ins`.
EnvObject splice_tuple(const EnvObject& colours, int a,
                       const std::vector<Colour>& ins);

// Axiom audit at a fixed arity bound: closure, unit action, sym
// functoriality, the two commuting-diagram axioms (sequential and
// parallel actions) and equivariance, over every instance whose tuples
// stay within the bound.  Empty result means the audit passed.
std::vector<std::string> validate_module(const RightModule& m, int arityBound,
                                         int maxReports = 20);

// Free right module on an envelope object: the value at a tuple is the
// set of envelope arrows into the generator, acted on by
// precomposition.
ModulePtr free_module(const OperadPtr& p, const EnvObject& gen);

// An operad as a right module over itself: values are (output colour,
// operation) pairs, acted on by partial composition.
ModulePtr operad_as_module(const OperadPtr& p);

// Over the one-colour operad with a unique operation per arity, a
// right module is the same thing as a presheaf on finite sets; this is
// the presheaf sending n to the maps n -> {0,1}, i.e. length-n
// bitstrings pulled back along the collapse maps.
ModulePtr bitstring_module();

// Finite explicit tables up to an arity bound; queries beyond the
// bound throw std::out_of_range.  Entries are mutable so tests can
// corrupt single values as negative controls.
class TableModule : public RightModule {
 public:
  TableModule(std::string name, OperadPtr over, int arityBound);

  int arity_bound() const { return bound_; }
  void set_values(const EnvObject& colours, std::vector<Elem> vals);
  void set_sym(const EnvObject& colours, const Elem& x,
               const std::vector<int>& perm, const Elem& result);
  void set_act(const EnvObject& colours, const Elem& x, int a,
               const std::vector<Colour>& inputsQ, const OpId& q,
               const Elem& result);

  std::string name() const override { return name_; }
  OperadPtr over() const override { return over_; }
  std::vector<Elem> values(const EnvObject& colours) const override;
  Elem sym(const EnvObject& colours, const Elem& x,
           const std::vector<int>& perm) const override;
  Elem act(const EnvObject& colours, const Elem& x, int a,
           const std::vector<Colour>& inputsQ, const OpId& q) const override;

  // Stable entry keys, shared with the JSON serialization.
  static std::string tuple_key(const EnvObject& colours);
  static std::string sym_key(const EnvObject& colours, const Elem& x,
                             const std::vector<int>& perm);
  static std::string act_key(const EnvObject& colours, const Elem& x, int a,
                             const std::vector<Colour>& inputsQ, const OpId& q);
  const std::map<std::string, std::vector<Elem>>& value_table() const {
    return values_;
  }
  const std::map<std::string, Elem>& sym_table() const { return sym_; }
  const std::map<std::string, Elem>& act_table() const { return act_; }

 private:
  std::string name_;
  OperadPtr over_;
  int bound_;
  std::map<std::string, std::vector<Elem>> values_;
  std::map<std::string, Elem> sym_;
  std::map<std::string, Elem> act_;
};

// Materializes any module as a table up to the arity bound.
std::shared_ptr<TableModule> table_from_module(const RightModule& m,
                                               int arityBound);

// The action of a whole envelope arrow e: src -> dst on a value at
// dst, by feeding the arrow's operations slot by slot and restoring
// the source order: the contravariant functor a right module extends
// to on the envelope.
Elem module_act_env(const RightModule& m, const EnvObject& src,
                    const EnvObject& dst, const EnvArrow& e, const Elem& x);

// Direct sum of two modules over the same closed operad: the value at
// a tuple is the coproduct over ordered complementary position subsets
// of the product of the two values.  Throws std::invalid_argument for
// a non-closed operad (the splitting needs the constants).
ModulePtr boxplus(const ModulePtr& m, const ModulePtr& l);
Elem boxplus_elem(const std::vector<int>& subset, const Elem& x, const Elem& y);

// The literal coend at one tuple: the quotient of all triples of a
// value of each module and a connecting envelope arrow, by the
// relations that move envelope arrows between the modules and the
// connector, with the intermediate tuples bounded by arityBound.
// Returns canonical class representatives.
std::vector<Elem> boxplus_oracle(const RightModule& m, const RightModule& l,
                                 const EnvObject& at, int arityBound);

// Evaluation of a decorated forest against a module value at its root
// colours, consuming vertices from the roots towards the leaves; the
// result lives at the leaf colours in edge order, components in order.
// The explicit-order variant consumes the given (component, capped
// edge) sequence and throws if it is not top-down.
Elem act_forest(const OperadPtr& p, const RightModule& m, const Forest& f,
                const Elem& decoration, const Elem& x);
Elem act_forest_order(const OperadPtr& p, const RightModule& m,
                      const Forest& f, const Elem& decoration, const Elem& x,
                      const std::vector<std::pair<int, int>>& order);

// The module nerve: the value at a forest pairs a nerve decoration
// with a module value at its root colours; non-root arrows act through
// the base alone, arrows moving roots act through the composite
// operations of the regions between the old and new roots, with
// missing branches absorbed by the constants.  Requires a closed
// operad.
struct ModuleNerve {
  PresheafPtr presheaf;
  PresheafMap projection;  // to the operad nerve
};
ModuleNerve nerve_module(const OperadPtr& p, const ModulePtr& m);
Elem module_nerve_elem(const Elem& decoration, const Elem& value);

// Left adjoint of the module nerve on a finite forest set over the
// nerve: the pointwise colimit of free modules on the root colours of
// the cells, with relations generated by the elementary arrows between
// cells up to edgeBound.
ModulePtr tau(const OperadPtr& p, const PresheafMap& alpha, int edgeBound);

// Attachment filtration of k bare edges into the nerve of the free
// module on their colours: one generalized-root-horn step per
// non-degenerate cell whose module value is a units-only relabelling
// of the generator, in ascending vertex count.  Requires a closed
// operad whose symmetric actions are free (throws
// std::invalid_argument otherwise).  The steps replay through
// ambient_attach_step against the returned ambient presheaf.
struct CounitFiltration {
  std::vector<Colour> colours;
  ModulePtr generated;               // the free module on the colours
  PresheafPtr ambient;               // its module nerve
  Forest start;                      // the bare-edge forest
  Elem startCell;                    // its generator element
  std::vector<CertificateStep> steps;
};
CounitFiltration counit_filtration(const OperadPtr& p,
                                   const std::vector<Colour>& rootColours,
                                   int vertexBound, int edgeBound);

// Explicit comparison between the module nerve of a direct sum and the
// concatenation product of the module nerves, as a levelwise bijection
// checked natural against the elementary arrows up to the bound.
struct MonoidalityReport {
  bool ok = true;
  std::vector<std::string> issues;
  std::map<std::string, int> sizes;  // forest code -> common level size
};
MonoidalityReport monoidality_witness(const OperadPtr& p, const ModulePtr& m,
                                      const ModulePtr& l, int edgeBound);

}  // namespace forestkit
