#pragma once

// Loop coproduct on gated sector complexes.  A generator of the concatenated
// action's complex is cut at seam times s where the reparametrized loop
// closes up into a figure eight; the two halves are classified by descent in
// their own winding-class complexes, and the mod-2 counts assemble a chain
// map of degree 1-n into the tensor complex.  The same scan, with a manifold
// map applied on either side of the reparametrization, runs the
// map-invariance experiment.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "loopmorse/gf2.hpp"
#include "loopmorse/loop_model.hpp"
#include "loopmorse/morse_maps.hpp"
#include "loopmorse/morse_problem.hpp"

namespace loopmorse::gh {

// Pointwise manifold map applied to discretized loops, together with its
// action on winding classes.  `apply` must send the source model into the
// target model; affine maps of flat models commute with geodesic resampling,
// which the invariance experiment relies on.
struct LoopPointMap {
  std::string name = "identity";
  std::function<Vec(const Vec&)> apply;  // point -> point (target model chart)
  std::function<std::vector<int>(const std::vector<int>&)> winding_image;
};

LoopPointMap identity_point_map();
// q -> A q + shift on a flat model; winding classes map by A.
LoopPointMap affine_point_map(const Eigen::MatrixXd& a, const Vec& shift);

// Morse data for a collection of winding-class sectors of one perturbed
// action, all built at the same segment count and action gate.
struct SectorFamily {
  std::shared_ptr<const ModelManifold> manifold;
  Lagrangian lagr;
  int segments = 0;
  double gate = 0.0;
  std::map<std::vector<int>, MorseData> sectors;

  const MorseData* find(const std::vector<int>& winding) const;
};

// Engine parameters tuned for sector flows: the slow manifold of a weakly
// broken geodesic family makes descent times of order 1e4, so the integrator
// runs at a looser local error and the final Newton polish restores the
// generator-identification accuracy.
EngineParams sector_engine_params(double gate);

// Builds the gated complex of every requested winding class, seeding each
// sector with a grid of constant-offset loops.  `share_spaces_with` reuses
// the sector spaces of a compatible family (same manifold, classes, N) so
// continuation's shared-space requirement holds across potentials.
SectorFamily build_sector_family(std::shared_ptr<const ModelManifold> m, const Lagrangian& lagr,
                                 const std::vector<std::vector<int>>& classes, int segments,
                                 double gate, const EngineParams& prm,
                                 const SectorFamily* share_spaces_with = nullptr);

// Seeded low-amplitude trigonometric field added to the potential; attempt
// numbers grow the amplitude.  Used to retry after a genericity failure.
Lagrangian perturb_potential(const Lagrangian& lagr, const ModelManifold& m, std::uint64_t seed,
                             int attempt);

struct GhParams {
  double smoothing_width = 0.05;  // corner-blend width of the reparametrization
  double s_margin = 1e-3;         // excluded neighborhood of the seam endpoints
  double fig8_tol = 1e-7;         // polished seam residual bound
  double dedup_tol = 1e-5;        // loop-distance dedup of located events
  double gate_margin = 1e-3;      // relative near-gate warning band
  int s_samples = 64;             // seam-parameter grid per unstable sample
  int circle_samples = 64;        // direction grid on 2-dimensional unstable disks
  int sample_factor = 1;          // multiplies both grids (stability checks)
};

struct GhEvent {
  std::string id;
  std::string kind;  // "point" | "crossing" | "warning"
  std::string source;
  std::vector<int> source_class;
  std::vector<int> class1, class2;
  std::string target1, target2;
  double s_star = 0.0;
  std::vector<double> disk_params;  // [direction or ray sign, flow time]
  double seam_residual = 0.0;
  double limit_residual1 = 0.0, limit_residual2 = 0.0;
  double action1 = 0.0, action2 = 0.0;  // actions of the cut halves
  std::string note;
};

// Isolated seam points for one generator triple.  Index imbalance yields an
// empty list (with a warning event); seam roots inside the endpoint margin
// abort with a degeneracy error.  `f` maps candidate loops into the targets'
// model; with `f_before_reparam` the map is applied to the unstable-disk loop
// before the seam reparametrization instead of after (the two orders agree
// for maps commuting with resampling, and comparing them is the invariance
// experiment).
std::vector<GhEvent> locate_wgh_points(const MorseData& d3, int gamma3,
                                       const MorseData& d1, int gamma1,
                                       const MorseData& d2, int gamma2,
                                       const GhParams& gp = {},
                                       const LoopPointMap& f = identity_point_map(),
                                       bool f_before_reparam = false);

// One tensor block of the coproduct: the source sector complex mapped into
// tensor_complex(left, right) with degree shift 1 - n.
struct TensorBlock {
  std::vector<int> cls3, cls1, cls2;
  std::shared_ptr<const gf2::GradedBitComplex> tensor;
  gf2::ParityChainMap map;
};

struct CoproductBuild {
  std::vector<TensorBlock> blocks;
  std::vector<GhEvent> events;

  const TensorBlock* find(const std::vector<int>& c3, const std::vector<int>& c1,
                          const std::vector<int>& c2) const;
  // Exact mod-2 chain identity over every block.
  bool all_chain_maps() const;
};

// Assembles every balanced block between the source family and pairs of
// target classes whose windings sum to the source winding (image under f).
CoproductBuild coproduct_matrix(const SectorFamily& source, const SectorFamily& left,
                                const SectorFamily& right, const GhParams& gp = {},
                                const LoopPointMap& f = identity_point_map(),
                                bool f_before_reparam = false);

// Source and target families of one model side.
struct ModelSide {
  SectorFamily source;       // concatenated action
  SectorFamily left, right;  // the two cut-half actions
};

struct InvarianceReport {
  CoproductBuild k1, k2;  // hybrid counts: A-side unstable disks, B-side targets
  bool k1_equals_k2 = false;
  CoproductBuild mp_a, mp_b;  // coproducts computed wholly inside each side
  // Transported induced maps on homology agree for every block:
  // (T1 (x) T2)_* o (mp_a)_* = (mp_b)_* o (T3)_*.
  bool homology_square_ok = false;
  std::vector<std::string> notes;
};

// f = identity (possibly different potentials): transports by continuation.
// Otherwise transports by the functorial map of f.
InvarianceReport invariance_check(const ModelSide& a, const ModelSide& b, const LoopPointMap& f,
                                  const GhParams& gp = {});

}  // namespace loopmorse::gh
