#pragma once
// Critical-point location and mod-2 trajectory counting for descent flows on
// configuration spaces.  Locates nondegenerate critical points by Newton
// iteration from seed grids, classifies descent limits (including escape
// through a sublevel gate), counts isolated connecting trajectories between
// critical points one index apart, and assembles the graded mod-2 boundary
// complex.  A gate value excises the low-value region: located points at or
// below the gate are discarded and descent into the gate leaves the complex.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "loopmorse/flow.hpp"
#include "loopmorse/gf2.hpp"
#include "loopmorse/morse_problem.hpp"

namespace loopmorse {

// Raised when a located critical point fails the nondegeneracy margin.  The
// caller owns genericity: perturb the potential and retry.
struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

struct EngineParams {
  double grad_tol = 1e-9;    // metric gradient norm accepted at a critical point
  double nondeg_tol = 1e-6;  // smallest scaled-Hessian |eigenvalue| tolerated
  double dedup_tol = 1e-5;   // distance under which two located points coincide
  std::optional<double> gate;  // admit only points with value strictly above this
  double shoot_radius = 1e-3;  // metric offset of descent starts along unstable directions
  int sphere_samples = 64;     // starts per unstable circle scan
  double cluster_floor = 1e-4;  // absolute floor of the dip acceptance tolerance
  int newton_max_iter = 80;
  FlowParams flow;  // inner descent integration (its grad_tol is the coarse one)
};

struct CriticalPoint {
  int id = -1;
  Vec rep;             // normalized representative configuration
  double value = 0.0;
  int index = 0;       // negative-eigenvalue count of the scaled Hessian
  double min_abs_eig = 0.0;
  Vec eigenvalues;     // scaled-Hessian spectrum, ascending
  Mat unstable;        // metric-orthonormal chart directions spanning the unstable plane
};

// Newton with a line search decreasing the metric gradient norm.  Returns the
// converged configuration or nullopt when the iteration stalls.
std::optional<Vec> newton_polish(const ConfigSpace& space, const Objective& obj, Vec start,
                                 const EngineParams& prm);

// Locate, gate-filter, deduplicate and order critical points.  Points at or
// below the gate are dropped before their nondegeneracy is examined, so a
// degenerate minimum inside the gate never aborts the search.  Ordering is by
// (value, coordinates), so ids are deterministic for a fixed seed list.
std::vector<CriticalPoint> find_critical_points(const ConfigSpace& space, const Objective& obj,
                                                const std::vector<Vec>& seeds,
                                                const EngineParams& prm);

// Uniform seed grid: per-axis angular grid on flat models, latitude/longitude
// grid on the sphere.
std::vector<Vec> grid_seeds(const FiniteDimSpace& space, int per_axis);

enum class LimitKind { Point, Gate, Unresolved };

struct DescentLimit {
  LimitKind kind = LimitKind::Unresolved;
  int cp = -1;     // resolved critical point id when kind == Point
  Vec crossing;    // gate-entry configuration when kind == Gate
  double value = 0.0;
  double time = 0.0;
};

// Integrate the descent flow from start until the gradient norm collapses
// (then Newton-snap and match against cps) or the value crosses the gate
// (then bisect the crossing time so the returned gate-entry configuration
// sits on the gate level to high accuracy).
DescentLimit descend_to_limit(const ConfigSpace& space, const Objective& obj,
                              const std::vector<CriticalPoint>& cps, const Vec& start,
                              const EngineParams& prm);

// Parity of isolated connecting trajectories from the source point into every
// critical point one index below it.  Index-1 sources shoot their two rays;
// index-2 sources scan the unstable circle and count, for each target, the
// parameter values whose trajectories pass through it (found as dips of the
// minimal trajectory distance, refined by golden-section).  Crossings closer
// together than the sample spacing require a denser scan; such failures
// surface as errors, never as silently wrong parities.
std::map<int, int> connection_parities(const ConfigSpace& space, const Objective& obj,
                                       const std::vector<CriticalPoint>& cps, int source_id,
                                       const EngineParams& prm);

struct ComplexBuild {
  std::vector<CriticalPoint> points;
  std::shared_ptr<gf2::GradedBitComplex> complex;  // generator id "c<id>" per point
};

// Locate critical points from the seeds, count all index-difference-1
// connections, and assemble the boundary complex.  Throws if the assembled
// boundary fails d  d = 0.
ComplexBuild build_morse_complex(const ConfigSpace& space, const Objective& obj,
                                 const std::vector<Vec>& seeds, const EngineParams& prm);

}  // namespace loopmorse
