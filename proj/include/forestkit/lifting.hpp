#pragma once
// Stepwise certificates for subobject inclusions of representables:
// each step attaches one cell along a declared boundary sieve and the
// verifier recomputes, levelwise, that the declared boundary is exactly
// the preimage of the stage built so far, revalidating every step as a
// pushout.  Producers cover the root-to-spine decomposition (cells are
// basic forests cut out of the target) and generalized root horn
// fillings.  Also: a finite lift enumerator for arbitrary squares, a
// right-fibration checker over all inner and root horns, and the strict
// root-restriction pullback test.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "forestkit/presheaf.hpp"

namespace forestkit {

// forest code -> sorted level elements
using LevelMap = std::map<std::string, std::vector<Elem>>;

LevelMap presheaf_levels(const Presheaf& x, int bound);

// A named subobject of the representable on a given shape.  Kinds:
// "roots", "spine", "boundary", "inner" {component, edge},
// "root" {component}, "generalized" {components...}, "full".
struct SubobjectSpec {
  std::string kind;
  std::vector<int> data;
};

// nullptr for "full"; throws std::invalid_argument on unknown kinds.
std::shared_ptr<const Sieve> spec_sieve(const SubobjectSpec& spec,
                                        const Forest& shape);

// One attachment: the cell is an encoded morphism shape -> ambient
// shape, glued along a boundary sieve on `shape`.  Kinds "inner",
// "root", "generalized" and "roots" name the standard sieves (with
// `data` as in SubobjectSpec); kind "cell" carries explicit generators
// in `boundary`, each a JSON object {"src": forest code, "map": encoded
// morphism into shape}.
struct CertificateStep {
  std::string kind;
  Forest shape;
  std::vector<int> data;
  Elem cell;
  std::vector<Elem> boundary;
  std::string note;
};

struct AnodyneCertificate {
  Forest shape;                  // ambient representable
  SubobjectSpec source, target;  // claimed endpoints of the composite
  std::vector<CertificateStep> steps;
  std::string label;
};

struct VerifyOptions {
  // Edge bound for the per-step is_pushout revalidation (further capped
  // by each step's own shape size).  The levelwise exactness checks are
  // always complete: containments of sieves on a cell shape are decided
  // by levels up to that shape's edge count, because every test arrow
  // factors as a face after a split-epi degeneracy.
  int pushoutBound = 3;
  bool logSteps = true;
};

struct VerifyResult {
  bool ok = false;
  // -1: all steps passed; -2: malformed claim or source; -3: composite
  // does not match the claimed target; otherwise the failing step index.
  int failedStep = -1;
  std::string reason;
  std::vector<std::string> log;  // one JSON line per verified step
};

VerifyResult verify_certificate(const AnodyneCertificate& cert,
                                const VerifyOptions& opts = {});

// Certificate from the root inclusion of f to its spine.  Cells are
// basic forests (corollas and bare edges) cut out of f, attached in
// increasing size with the overlap of each cell against the earlier
// stage as its boundary; a step whose boundary is exactly the root
// inclusion of its shape is labelled "roots", the rest are "cell"
// steps with explicit generators.
AnodyneCertificate root_spine_decomposition(const Forest& f);

// Certificate from the generalized root horn at the given component
// set to the full representable, by induction on the horn size: the
// largest listed component is filled through its root face first.
AnodyneCertificate generalized_horn_certificate(const Forest& f,
                                                std::vector<int> roots);

// Stage of an attachment process inside an arbitrary ambient presheaf:
// the subpresheaf generated by finitely many elements.
struct AmbientStage {
  std::vector<std::pair<Forest, Elem>> generators;
};

// Membership in the generated subpresheaf at a given shape.
bool ambient_stage_member(const Presheaf& ambient, const AmbientStage& stage,
                          const Forest& at, const Elem& value);

// One pushout step in an arbitrary ambient: attaches the step cell (an
// element of the ambient at the step shape) along the declared sieve,
// checking boundary containment, freshness and injectivity of the new
// part levelwise up to `bound`, and the pushout square itself.  On
// success the cell is appended to the stage generators.
bool ambient_attach_step(const Presheaf& ambient, AmbientStage& stage,
                         const CertificateStep& step, int bound,
                         std::string* why = nullptr);

// A commuting square: p ∘ top == bottom ∘ i, with i typically an
// inclusion.  A lift is a levelwise map filling the diagonal.
struct LiftingProblem {
  PresheafMap i;       // A -> B
  PresheafMap p;       // X -> V
  PresheafMap top;     // A -> X
  PresheafMap bottom;  // B -> V
};

// forest code -> (element of B at that level -> element of X)
using Lift = std::map<std::string, std::map<Elem, Elem>>;

// All diagonal fillers on levels with at most `bound` edges, natural
// against every elementary arrow between those levels, in
// deterministic order.
std::vector<Lift> enumerate_lifts(const LiftingProblem& q, int bound);

struct HornFailure {
  Forest shape;
  std::string horn;
  std::vector<Elem> family;  // values on the horn's maximal elements
  Elem bottom;               // element of the base at the shape
};

struct FibrationReport {
  bool ok = true;
  long long hornsChecked = 0;
  long long squaresChecked = 0;
  std::vector<HornFailure> failures;
};

// Right lifting of p against every inner horn and every root horn on
// forests with 1..edgeBound edges: each compatible family on a horn
// with a matching base element must admit at least one filler.
// rootHornsOnly restricts to the root horns.
FibrationReport check_right_fibration(const PresheafMap& p, int edgeBound,
                                      bool rootHornsOnly = false,
                                      int maxFailures = 5);

struct PullbackFailure {
  Forest shape;
  std::string reason;
};

struct PullbackReport {
  bool ok = true;
  std::vector<PullbackFailure> failures;
};

// For each nonempty forest F up to edgeBound, the map
//   X(F) -> X(roots of F) ×_{V(roots of F)} V(F)
// induced by the root inclusion and p must be a bijection.
PullbackReport check_strict_pullback(const PresheafMap& p, int edgeBound,
                                     int maxFailures = 5);

}  // namespace forestkit
