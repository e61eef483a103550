#pragma once
// Chain maps between Morse complexes, assembled by counting isolated
// intersections of an upstream unstable family with downstream stable sets.
//
// All four map kinds share one counting engine.  The upstream family is the
// unstable manifold of a critical point (plus a homotopy parameter for prism
// maps), swept by shooting descent rays; downstream membership is detected
// either by running the downstream descent (closest-approach dips vanish
// exactly on stable manifolds) or, for top-index targets, by polishing the
// zero of a local stable-graph defect.  Every counted solution is recorded as
// an event and attached to the produced matrix entry as provenance.
//
// Maps are counted between admitted generators only; a descent that drops
// below the downstream admission gate can never return (values decrease
// monotonically), so gate exits are exactly the connections that die in the
// excised region.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "loopmorse/gf2.hpp"
#include "loopmorse/morse_engine.hpp"

namespace loopmorse {

// A Morse complex bundled with everything needed to shoot trajectories.
struct MorseData {
  std::shared_ptr<const ConfigSpace> space;
  Objective obj;
  EngineParams prm;
  std::vector<CriticalPoint> points;
  std::shared_ptr<gf2::GradedBitComplex> complex;
};

MorseData make_morse_data(std::shared_ptr<const ConfigSpace> space, Objective obj,
                          const std::vector<Vec>& seeds, const EngineParams& prm);

// One counted solution (or diagnostic) of an intersection problem.
struct IntersectionEvent {
  std::string id;
  std::string kind;    // "constant", "curve", "surface", "warning"
  std::string source;  // upstream generator id ("" for complex-level warnings)
  std::string target;  // downstream generator id
  std::vector<double> params;  // scan coordinates of the solution
  double residual = 0.0;       // membership residual at acceptance
  double value = 0.0;          // upstream objective value at the solution
  std::string note;
};

struct MapBuild {
  gf2::ParityChainMap map;
  std::vector<IntersectionEvent> events;
};

struct MapParams {
  double cond_tol = 1e8;      // Jacobian condition cap at polished solutions
  double s_margin = 1e-3;     // homotopy parameter is swept over [margin, 1-margin]
  double gate_margin = 1e-3;  // relative width of the near-gate warning band
  double seam_tol = 1e-8;     // how exactly a critical point must sit on a submanifold
  int curve_samples = 64;     // samples along one-parameter scans
  int newton_max_iter = 40;
};

// Degree-0 map counting W^u(x; from) against W^s(y; to).
MapBuild continuation_map(const MorseData& from, const MorseData& to,
                          const MapParams& mp = {});

// Degree-0 map with the smooth `transform` applied before downstream
// membership; continuation is the identity-transform special case.  The
// transform differential is checked for full rank at every counted solution.
MapBuild functorial_map(const std::function<Vec(const Vec&)>& transform,
                        const MorseData& from, const MorseData& to,
                        const MapParams& mp = {});

// Submanifold X of the ambient space: an inclusion of representations, a
// defining defect (one smooth component per codimension, zero exactly on X),
// and a projection defined near X.
struct Embedding {
  int codim = 0;
  std::function<Vec(const Vec&)> include;  // X rep -> ambient rep
  std::function<Vec(const Vec&)> defect;   // ambient rep -> R^codim
  std::function<Vec(const Vec&)> project;  // ambient rep near X -> X rep
};

// Degree-(-codim) map from the ambient complex to the submanifold complex:
// unstable families of ambient points are intersected with X, then classified
// by the submanifold's own descent.
MapBuild gysin_map(const MorseData& ambient, const MorseData& sub, const Embedding& emb,
                   const MapParams& mp = {});

// Degree-(+1) map counting pairs (unstable point z, s in (0,1)) with
// homotopy(z, s) on a downstream stable manifold.  Solutions refined onto the
// ends of the s-interval abort the build.  The produced matrix satisfies the
// boundary identity  P d + d P = (map at s=0) + (map at s=1); it is a chain
// map exactly when the two endpoint maps agree, which the caller is expected
// to arrange (the verified flag records the check).
MapBuild prism_map(const std::function<Vec(const Vec&, double)>& homotopy,
                   const MorseData& from, const MorseData& to, const MapParams& mp = {});

}  // namespace loopmorse
