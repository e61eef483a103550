#pragma once
// Independent seam-splitting counts used by the coproduct tests.  The library
// locates seam points with golden-section dip refinement on interpolated
// unstable disks; this oracle instead marches dense grids and counts sign
// flips of a descent signature (limit generator plus the approach side of its
// slow mode), attributing each flip to the stable manifold it crosses via
// recorded closest approaches.  Ray sampling, root marching, classification
// and counting are all re-implemented here; only the integrator, the loop
// calculus (reparametrization, cutting) and the Morse data are shared, since
// those define the object being counted.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "loopmorse/flow.hpp"
#include "loopmorse/loop_model.hpp"
#include "loopmorse/morse_maps.hpp"
#include "loopmorse/morse_problem.hpp"

namespace oracle {

using loopmorse::CriticalPoint;
using loopmorse::DiscretizedLoop;
using loopmorse::LoopClassSpace;
using loopmorse::MorseData;
using loopmorse::Vec;

using GhCounts = std::map<std::pair<std::string, std::string>, int>;

inline constexpr double kGhTau = 6.283185307179586476925286766559;
inline constexpr double kGhInf = std::numeric_limits<double>::infinity();

inline const LoopClassSpace& gh_space(const MorseData& d) {
  auto* sp = dynamic_cast<const LoopClassSpace*>(d.space.get());
  if (!sp) throw std::logic_error("gh oracle needs loop-class Morse data");
  return *sp;
}

inline std::string gh_id(int id) { return "c" + std::to_string(id); }

// Undo the global 2 pi re-basing the sector chart applies per coordinate, so
// consecutive samples of one trajectory interpolate linearly.
inline Vec gh_align(const LoopClassSpace& sp, const Vec& ref, Vec q) {
  int d = sp.manifold().dim(), n = sp.loop_points();
  for (int k = 0; k < d; ++k) {
    double shift = kGhTau * std::round((q[k] - ref[k]) / kGhTau);
    if (shift != 0.0)
      for (int i = 0; i < n; ++i) q[i * d + k] -= shift;
  }
  return q;
}

inline double gh_min_sep(const MorseData& d) {
  double sep = kGhInf;
  for (size_t i = 0; i < d.points.size(); ++i)
    for (size_t j = i + 1; j < d.points.size(); ++j)
      sep = std::min(sep, d.space->distance(d.points[i].rep, d.points[j].rep));
  return std::isfinite(sep) ? sep : 1.0;
}

// Slow mode of an admitted minimum: eigenvector of the smallest chart-Hessian
// eigenvalue.  The approach side of a long descent along this mode flips when
// the descent's starting family crosses the stable manifold of a saddle, and
// also when it passes the minimum itself; the two cases separate by whether
// the flanking descents dip close to a saddle.
inline Vec gh_slow_mode(const MorseData& d, const CriticalPoint& cp) {
  loopmorse::Mat h = d.obj.has_hess() ? d.obj.chart_hess(cp.rep)
                                      : loopmorse::fd_chart_hess(*d.space, d.obj, cp.rep);
  Eigen::SelfAdjointEigenSolver<loopmorse::Mat> es(h);
  return es.eigenvectors().col(0);
}

struct GhSide {
  const MorseData* d = nullptr;
  std::vector<const CriticalPoint*> saddles;
  std::map<int, Vec> slow;    // slow mode per admitted minimum id
  std::map<int, int> index;   // generator id -> Morse index
  std::map<int, Vec> rep;     // generator id -> representative
  double match = 0.0;         // endpoint / dip acceptance radius
};

inline GhSide gh_side(const MorseData& d) {
  GhSide c;
  c.d = &d;
  for (const auto& cp : d.points) {
    c.index.emplace(cp.id, cp.index);
    c.rep.emplace(cp.id, cp.rep);
    if (cp.index == 1) c.saddles.push_back(&cp);
    if (cp.index == 0) c.slow.emplace(cp.id, gh_slow_mode(d, cp));
  }
  c.match = 0.3 * gh_min_sep(d);
  return c;
}

struct GhHalfSig {
  int limit = -1;  // admitted generator id; -1 when unrouted or gate-exited
  int limit_index = -1;
  int side = 0;  // approach side along the limit minimum's slow mode
  std::vector<double> dips;  // closest approach to each index-1 generator
  double action = 0.0;
  bool gated = false;
};

// Long descent of one cut half with the oracle's own observer: closest
// approaches to every saddle and the nearest admitted generator at the end.
inline GhHalfSig gh_classify(const GhSide& side, const DiscretizedLoop& half) {
  const MorseData& d = *side.d;
  const LoopClassSpace& sp = gh_space(d);
  GhHalfSig sig;
  sig.dips.assign(side.saddles.size(), kGhInf);
  Vec rep;
  try {
    rep = sp.from_loop(half);
  } catch (const std::invalid_argument&) {
    return sig;  // winding outside this sector
  }
  sig.action = d.obj.value(rep);
  loopmorse::FlowParams fp = d.prm.flow;
  fp.record_trace = false;
  fp.value_floor = d.prm.gate ? *d.prm.gate : -1e300;
  fp.observer = [&](double, const Vec& p) {
    for (size_t j = 0; j < side.saddles.size(); ++j)
      sig.dips[j] = std::min(sig.dips[j], d.space->distance(p, side.saddles[j]->rep));
  };
  loopmorse::FlowResult res = loopmorse::flow_to_limit(*d.space, d.obj, rep, fp);
  if (res.outcome == loopmorse::FlowOutcome::Escaped) {
    sig.gated = true;
    return sig;
  }
  if (res.outcome != loopmorse::FlowOutcome::Converged)
    throw std::runtime_error("gh oracle: a descent did not resolve within the flow budget");
  int best = -1;
  double bd = kGhInf;
  for (const auto& cp : d.points) {
    double t = d.space->distance(res.endpoint, cp.rep);
    if (t < bd) {
      bd = t;
      best = cp.id;
    }
  }
  if (best < 0 || bd > side.match)
    throw std::runtime_error("gh oracle: a descent endpoint matches no admitted generator");
  sig.limit = best;
  sig.limit_index = side.index.at(best);
  if (sig.limit_index == 0) {
    Vec off = gh_align(sp, side.rep.at(best), res.endpoint) - side.rep.at(best);
    sig.side = off.dot(side.slow.at(best)) >= 0 ? 1 : -1;
  }
  return sig;
}

struct GhProblem {
  const MorseData* d3 = nullptr;
  const LoopClassSpace* sp3 = nullptr;
  const GhSide* left = nullptr;
  const GhSide* right = nullptr;
  double width = 0.05;
  double margin = 1e-3;
  int grid = 200;
  double fig8 = 1e-7;
  int inner = 0;  // dominant seam-defect coordinate (largest winding)
  int outer = 1;
  double wrap = 0.0;  // wrap-jump rejection level for sign changes
};

inline Vec gh_defect(const GhProblem& pb, const Vec& rep3, double s) {
  return loopmorse::theta_defect(loopmorse::gamma_smooth(pb.sp3->to_loop(rep3), s, pb.width),
                                 0.5);
}

inline double gh_bisect_s(const GhProblem& pb, const Vec& rep3, double a, double b, double fa) {
  for (int i = 0; i < 90; ++i) {
    double m = 0.5 * (a + b);
    double fm = gh_defect(pb, rep3, m)[pb.inner];
    if ((fa < 0) == (fm < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

inline std::vector<double> gh_roots(const GhProblem& pb, const Vec& rep3, double lo, double hi,
                                    int samples) {
  std::vector<double> out;
  double prev = gh_defect(pb, rep3, lo)[pb.inner];
  double sp = lo;
  for (int j = 1; j < samples; ++j) {
    double s = lo + (hi - lo) * j / (samples - 1.0);
    double cur = gh_defect(pb, rep3, s)[pb.inner];
    if (prev * cur < 0 && std::abs(prev) < pb.wrap && std::abs(cur) < pb.wrap)
      out.push_back(gh_bisect_s(pb, rep3, sp, s, prev));
    prev = cur;
    sp = s;
  }
  return out;
}

inline std::vector<double> gh_roots(const GhProblem& pb, const Vec& rep3) {
  return gh_roots(pb, rep3, pb.margin, 1.0 - pb.margin, pb.grid);
}

// Raw accepted-step trajectory of one unstable ray, re-parametrized to `grid`
// equal-arc samples; the sampling and resolution are the oracle's own.
inline std::vector<Vec> gh_ray(const GhProblem& pb, const Vec& start) {
  const MorseData& d = *pb.d3;
  loopmorse::FlowParams fp = d.prm.flow;
  fp.record_trace = false;
  fp.observer = {};
  fp.value_floor = d.prm.gate ? *d.prm.gate : -1e300;
  std::vector<Vec> raw;
  raw.push_back(start);
  fp.observer = [&](double, const Vec& p) { raw.push_back(p); };
  loopmorse::flow_to_limit(*d.space, d.obj, start, fp);
  const LoopClassSpace& sp = *pb.sp3;
  std::vector<Vec> al(raw.size());
  al[0] = raw[0];
  for (size_t i = 1; i < raw.size(); ++i) al[i] = gh_align(sp, al[i - 1], raw[i]);
  std::vector<double> cum(al.size(), 0.0);
  for (size_t i = 1; i < al.size(); ++i) cum[i] = cum[i - 1] + sp.distance(al[i - 1], al[i]);
  std::vector<Vec> out;
  if (al.size() < 2 || cum.back() <= 0.0) {
    out.push_back(al[0]);
    return out;
  }
  for (int j = 0; j < pb.grid; ++j) {
    double x = cum.back() * j / (pb.grid - 1.0);
    size_t seg = 0;
    while (seg + 2 < cum.size() && cum[seg + 1] < x) ++seg;
    double den = std::max(cum[seg + 1] - cum[seg], 1e-300);
    double f = std::min(std::max((x - cum[seg]) / den, 0.0), 1.0);
    out.push_back(al[seg] * (1.0 - f) + al[seg + 1] * f);
  }
  return out;
}

struct GhPairSig {
  bool valid = false;  // both halves resolved to admitted limits
  bool gated = false;
  GhHalfSig h1, h2;
};

inline GhPairSig gh_pair(const GhProblem& pb, const Vec& rep3, double s) {
  GhPairSig out;
  DiscretizedLoop loop =
      loopmorse::gamma_smooth(pb.sp3->to_loop(rep3), s, pb.width);
  auto halves = loopmorse::cut(loop, pb.fig8);
  out.h1 = gh_classify(*pb.left, halves.first);
  out.h2 = gh_classify(*pb.right, halves.second);
  out.gated = out.h1.gated || out.h2.gated;
  out.valid = out.h1.limit >= 0 && out.h2.limit >= 0;
  return out;
}

inline void gh_toggle(GhCounts& c, int id1, int id2) {
  auto key = std::make_pair(gh_id(id1), gh_id(id2));
  c[key] = (c[key] + 1) % 2;
}

// Balanced root: both halves must land on minima; a saddle limit means the
// instance is not generic enough to count.
inline void gh_count_balanced(GhCounts& counts, const GhProblem& pb, const Vec& rep3, double s) {
  GhPairSig sig = gh_pair(pb, rep3, s);
  if (sig.gated) return;  // the split dies in the excised region
  if (!sig.valid) return;
  if (sig.h1.limit_index != 0 || sig.h2.limit_index != 0)
    throw std::runtime_error("gh oracle: a balanced seam root classified onto a saddle");
  gh_toggle(counts, sig.h1.limit, sig.h2.limit);
}

// One marched seam sample: `tag` is the family coordinate (the disk angle for
// direction-marched families, unused elsewhere).
struct GhIsolated {
  Vec rep;
  double s = 0.0;
  double tag = 0.0;
};

// Produces an intermediate sample at the given blend ratio between two
// adjacent marched samples, or nothing when the root cannot be tracked.
using GhRefiner =
    std::function<std::optional<GhIsolated>(const GhIsolated&, const GhIsolated&, double)>;

inline bool gh_flip(const GhHalfSig& a, const GhHalfSig& b) {
  return a.limit != b.limit || a.side != b.side;
}

inline bool gh_usable(const GhPairSig& s) {
  return s.valid && s.h1.limit_index != 1 && s.h2.limit_index != 1;
}

// Attributes the wall crossing of one flipped slot between two adjacent
// samples, skips benign passes over a minimum (no small dip), and resolves
// both slots flipping at once by refining the segment: the two cut halves of
// a near-geodesic loop are almost the same loop, so their crossings cluster
// inside one grid cell and must be split apart before attribution.
inline void gh_count_segment(GhCounts& counts, const GhProblem& pb, const GhIsolated& a,
                             const GhPairSig& siga, const GhIsolated& b, const GhPairSig& sigb,
                             const GhRefiner& refine, int depth) {
  bool flip1 = gh_flip(siga.h1, sigb.h1);
  bool flip2 = gh_flip(siga.h2, sigb.h2);
  if (!flip1 && !flip2) return;
  if (flip1 && flip2) {
    if (!refine || depth <= 0)
      throw std::runtime_error("gh oracle: unresolved simultaneous wall crossings");
    for (double ratio : {0.5, 0.38, 0.62}) {
      auto mid = refine(a, b, ratio);
      if (!mid) continue;
      GhPairSig sigm = gh_pair(pb, mid->rep, mid->s);
      if (sigm.gated)
        throw std::runtime_error("gh oracle: a marched seam branch leaves the admission gate");
      if (!gh_usable(sigm)) continue;
      gh_count_segment(counts, pb, a, siga, *mid, sigm, refine, depth - 1);
      gh_count_segment(counts, pb, *mid, sigm, b, sigb, refine, depth - 1);
      return;
    }
    throw std::runtime_error("gh oracle: simultaneous wall crossings resisted refinement");
  }
  const GhHalfSig& pa = flip1 ? siga.h1 : siga.h2;
  const GhHalfSig& ca = flip1 ? sigb.h1 : sigb.h2;
  const GhHalfSig& companion = flip1 ? sigb.h2 : sigb.h1;
  const GhSide& side = flip1 ? *pb.left : *pb.right;
  int best = -1;
  double bd = kGhInf;
  for (size_t t = 0; t < side.saddles.size(); ++t) {
    double v = std::min(pa.dips[t], ca.dips[t]);
    if (v < bd) {
      bd = v;
      best = static_cast<int>(t);
    }
  }
  if (best >= 0 && bd < side.match) {
    if (flip1)
      gh_toggle(counts, side.saddles[best]->id, companion.limit);
    else
      gh_toggle(counts, companion.limit, side.saddles[best]->id);
  } else if (best >= 0 && bd < 2.0 * side.match) {
    throw std::runtime_error("gh oracle: ambiguous wall attribution; refine the grid");
  }
  // otherwise: the family passed over the minimum, not a wall
}

// Signature-flip counting along one marched family of seam roots.  For each
// half independently: a changed limit or a flipped slow-mode side marks a
// wall; the wall is a saddle crossing when the flanking descents dip close to
// one saddle, and a benign pass over the minimum itself when no dip is small.
inline void gh_count_flips(GhCounts& counts, const GhProblem& pb,
                           const std::vector<GhIsolated>& pts, const GhRefiner& refine) {
  const GhIsolated* prev = nullptr;
  GhPairSig prev_sig;
  for (const auto& cur : pts) {
    GhPairSig sig = gh_pair(pb, cur.rep, cur.s);
    if (sig.gated)
      throw std::runtime_error("gh oracle: a marched seam branch leaves the admission gate");
    if (!gh_usable(sig)) continue;  // unrouted or on-wall sample
    if (prev) gh_count_segment(counts, pb, *prev, prev_sig, cur, sig, refine, 14);
    prev = &cur;
    prev_sig = sig;
  }
}

// Matched continuation of seam roots along a marched ray: nearest previous
// root within the matching window extends a branch, anything else opens one.
struct GhBranch {
  std::vector<Vec> reps;
  std::vector<double> roots;
  bool open = true;
};

inline void gh_extend_branches(std::vector<GhBranch>& branches, const Vec& rep,
                               std::vector<double> roots, double s_match) {
  std::vector<bool> used(roots.size(), false);
  for (auto& br : branches) {
    if (!br.open) continue;
    double last = br.roots.back();
    int pick = -1;
    double bd = s_match;
    for (size_t t = 0; t < roots.size(); ++t) {
      if (used[t]) continue;
      double v = std::abs(roots[t] - last);
      if (v < bd) {
        bd = v;
        pick = static_cast<int>(t);
      }
    }
    if (pick < 0) {
      br.open = false;
      continue;
    }
    used[pick] = true;
    br.reps.push_back(rep);
    br.roots.push_back(roots[pick]);
  }
  for (size_t t = 0; t < roots.size(); ++t)
    if (!used[t]) {
      GhBranch br;
      br.reps.push_back(rep);
      br.roots.push_back(roots[t]);
      branches.push_back(std::move(br));
    }
}

inline std::optional<double> gh_root_near(const GhProblem& pb, const Vec& rep, double s0,
                                          double pad) {
  double lo = std::max(pb.margin, s0 - pad), hi = std::min(1.0 - pb.margin, s0 + pad);
  for (int widen = 0; widen < 4; ++widen) {
    double fa = gh_defect(pb, rep, lo)[pb.inner];
    double fb = gh_defect(pb, rep, hi)[pb.inner];
    if (fa * fb < 0 && std::abs(fa) < pb.wrap && std::abs(fb) < pb.wrap)
      return gh_bisect_s(pb, rep, lo, hi, fa);
    lo = std::max(pb.margin, s0 - pad * (2 << widen));
    hi = std::min(1.0 - pb.margin, s0 + pad * (2 << widen));
  }
  auto all = gh_roots(pb, rep);
  if (all.empty()) return std::nullopt;
  double best = all[0];
  for (double r : all)
    if (std::abs(r - s0) < std::abs(best - s0)) best = r;
  return best;
}

// Isolated seam roots of one marched ray when the defect has two components:
// roots of the dominant component form branches over the arc coordinate, and
// the remaining component's sign changes along a branch are bisected in the
// interpolated family.
inline std::vector<GhIsolated> gh_isolated_roots(const GhProblem& pb,
                                                 const std::vector<Vec>& ray) {
  std::vector<GhIsolated> out;
  double s_match = std::max(0.08, 6.0 / pb.grid);
  std::vector<GhBranch> branches;
  for (const Vec& rep : ray) gh_extend_branches(branches, rep, gh_roots(pb, rep), s_match);
  for (const auto& br : branches) {
    for (size_t j = 0; j + 1 < br.reps.size(); ++j) {
      double oa = gh_defect(pb, br.reps[j], br.roots[j])[pb.outer];
      double ob = gh_defect(pb, br.reps[j + 1], br.roots[j + 1])[pb.outer];
      if (!(oa * ob < 0) || std::abs(oa) >= pb.wrap || std::abs(ob) >= pb.wrap) continue;
      double ta = 0.0, tb = 1.0;
      Vec ra = br.reps[j], rb = br.reps[j + 1];
      double sa = br.roots[j], sb = br.roots[j + 1];
      Vec rep = ra;
      double s = sa;
      for (int it = 0; it < 60; ++it) {
        double tm = 0.5 * (ta + tb);
        rep = ra * (1.0 - tm) + rb * tm;
        auto sm = gh_root_near(pb, rep, sa * (1.0 - tm) + sb * tm, 4.0 / pb.grid);
        if (!sm) break;
        s = *sm;
        double om = gh_defect(pb, rep, s)[pb.outer];
        if ((oa < 0) == (om < 0))
          ta = tm;
        else
          tb = tm;
      }
      out.push_back({rep, s});
    }
  }
  return out;
}

// Parity row of one source generator, counted independently on dense grids.
// Target complexes d1 and d2 must live on the same manifold as d3 (the oracle
// covers identity transports only).  Keys are (left id, right id) pairs of
// generator names; absent keys are zero.
inline GhCounts gh_count_row(const MorseData& d3, const CriticalPoint& g3, const MorseData& d1,
                             const MorseData& d2, double width = 0.05, double margin = 1e-3,
                             int grid = 200) {
  const LoopClassSpace& sp3 = gh_space(d3);
  int n = sp3.manifold().dim();
  GhCounts counts;
  int r = g3.index - n + 1;
  if (r < 0 || r > 1) return counts;

  GhSide left = gh_side(d1);
  GhSide right = gh_side(d2);
  GhProblem pb;
  pb.d3 = &d3;
  pb.sp3 = &sp3;
  pb.left = &left;
  pb.right = &right;
  pb.width = width;
  pb.margin = margin;
  pb.grid = grid;
  pb.wrap = 0.45 * sp3.manifold().injectivity_radius();
  const std::vector<int>& w = sp3.winding();
  pb.inner = 0;
  for (int k = 1; k < n; ++k)
    if (std::abs(w[k]) > std::abs(w[pb.inner])) pb.inner = k;
  pb.outer = n == 2 ? 1 - pb.inner : 0;

  double shoot = d3.prm.shoot_radius;
  auto ray_start = [&](const Vec& dir) {
    return d3.space->chart_point(g3.rep, Vec(shoot * dir));
  };

  if (g3.index == 0) {
    // r == 0, n == 1: isolated roots at the generator itself
    for (double s : gh_roots(pb, g3.rep)) gh_count_balanced(counts, pb, g3.rep, s);
  } else if (g3.index == 1 && n == 2) {
    // r == 0: isolated roots on each marched ray
    for (int raydir = 0; raydir < 2; ++raydir) {
      Vec dir = (raydir == 0 ? 1.0 : -1.0) * g3.unstable.col(0);
      for (const auto& root : gh_isolated_roots(pb, gh_ray(pb, ray_start(dir))))
        gh_count_balanced(counts, pb, root.rep, root.s);
    }
  } else if (g3.index == 1 && n == 1) {
    // r == 1: seam-root curve over each ray; count signature flips
    double s_match = std::max(0.08, 6.0 / pb.grid);
    GhRefiner refine = [&pb](const GhIsolated& a, const GhIsolated& b,
                             double ratio) -> std::optional<GhIsolated> {
      Vec rep = a.rep * (1.0 - ratio) + b.rep * ratio;
      double target = a.s * (1.0 - ratio) + b.s * ratio;
      auto s = gh_root_near(pb, rep, target, std::abs(b.s - a.s) + 2.0 / pb.grid);
      if (!s) return std::nullopt;
      return GhIsolated{rep, *s, a.tag * (1.0 - ratio) + b.tag * ratio};
    };
    for (int raydir = 0; raydir < 2; ++raydir) {
      Vec dir = (raydir == 0 ? 1.0 : -1.0) * g3.unstable.col(0);
      std::vector<GhBranch> branches;
      for (const Vec& rep : gh_ray(pb, ray_start(dir)))
        gh_extend_branches(branches, rep, gh_roots(pb, rep), s_match);
      for (const auto& br : branches) {
        if (br.reps.size() < 2) continue;
        std::vector<GhIsolated> pts;
        pts.reserve(br.reps.size());
        for (size_t j = 0; j < br.reps.size(); ++j)
          pts.push_back({br.reps[j], br.roots[j], static_cast<double>(j)});
        gh_count_flips(counts, pb, pts, refine);
      }
    }
  } else if (g3.index == 2 && n == 2) {
    // r == 1: isolated roots per direction ray, marched around the disk
    int nphi = pb.grid;
    auto ray_at = [&](double phi) {
      Vec dir = std::cos(phi) * g3.unstable.col(0) + std::sin(phi) * g3.unstable.col(1);
      return gh_isolated_roots(pb, gh_ray(pb, ray_start(dir)));
    };
    std::vector<std::vector<GhIsolated>> per_phi(nphi + 1);
    for (int i = 0; i <= nphi; ++i) {
      per_phi[i] = ray_at(kGhTau * (i % nphi) / nphi);
      for (auto& pt : per_phi[i]) pt.tag = kGhTau * i / nphi;
    }
    // march root families over phi (last column repeats phi = 0 to close up)
    struct DiskBranch {
      std::vector<GhIsolated> pts;
      bool open = true;
    };
    std::vector<DiskBranch> branches;
    double s_match = std::max(0.08, 6.0 / pb.grid);
    for (int i = 0; i <= nphi; ++i) {
      std::vector<bool> used(per_phi[i].size(), false);
      for (auto& br : branches) {
        if (!br.open) continue;
        const GhIsolated& last = br.pts.back();
        int pick = -1;
        double bd = kGhInf;
        for (size_t t = 0; t < per_phi[i].size(); ++t) {
          if (used[t]) continue;
          double v = std::abs(per_phi[i][t].s - last.s) +
                     d3.space->distance(per_phi[i][t].rep, last.rep);
          if (v < bd) {
            bd = v;
            pick = static_cast<int>(t);
          }
        }
        if (pick < 0 || std::abs(per_phi[i][pick].s - last.s) > s_match) {
          br.open = false;
          continue;
        }
        used[pick] = true;
        br.pts.push_back(per_phi[i][pick]);
      }
      for (size_t t = 0; t < per_phi[i].size(); ++t)
        if (!used[t] && i < nphi) {
          DiskBranch br;
          br.pts.push_back(per_phi[i][t]);
          branches.push_back(std::move(br));
        }
    }
    GhRefiner refine = [&](const GhIsolated& a, const GhIsolated& b,
                           double ratio) -> std::optional<GhIsolated> {
      double tagm = a.tag * (1.0 - ratio) + b.tag * ratio;
      auto roots = ray_at(std::fmod(tagm, kGhTau));
      const GhIsolated* pick = nullptr;
      double bd = kGhInf;
      double sm = a.s * (1.0 - ratio) + b.s * ratio;
      for (const auto& r : roots) {
        double v = std::abs(r.s - sm) + 0.5 * (d3.space->distance(r.rep, a.rep) +
                                                d3.space->distance(r.rep, b.rep));
        if (v < bd) {
          bd = v;
          pick = &r;
        }
      }
      if (!pick || std::abs(pick->s - sm) > s_match) return std::nullopt;
      return GhIsolated{pick->rep, pick->s, tagm};
    };
    for (const auto& br : branches) {
      if (br.pts.size() < 2) continue;
      gh_count_flips(counts, pb, br.pts, refine);
    }
  } else {
    throw std::runtime_error("gh oracle: unsupported index/dimension combination");
  }

  // drop even entries so equality checks compare supports
  for (auto it = counts.begin(); it != counts.end();)
    it = it->second == 0 ? counts.erase(it) : std::next(it);
  return counts;
}

}  // namespace oracle
