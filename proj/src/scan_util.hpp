#pragma once

// Internal scan machinery shared by the intersection-counting translation
// units: descent-ray sampling, dip detection with golden refinement, probe
// descents, and the small damped Gauss-Newton used to polish 2x2 defect
// systems.  Not installed; include only from src/.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "loopmorse/flow.hpp"
#include "loopmorse/morse_maps.hpp"

namespace loopmorse::detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::string gen_id(int id) { return "c" + std::to_string(id); }

inline double golden_min(const std::function<double(double)>& f, double a, double b,
                         int iters) {
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

inline double min_separation(const ConfigSpace& space, const std::vector<CriticalPoint>& pts) {
  double sep = kInf;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      sep = std::min(sep, space.distance(pts[i].rep, pts[j].rep));
  return std::isfinite(sep) ? sep : 1.0;
}

inline FlowParams ray_flow_params(const MorseData& from) {
  FlowParams fp = from.prm.flow;
  fp.observer = nullptr;
  fp.record_trace = false;
  fp.value_floor = from.prm.gate ? *from.prm.gate : -1e300;
  return fp;
}

// Point on the upstream descent trajectory at a fixed horizon; the adaptive
// integrator clamps its last step to the horizon, so this reproduces the
// sampled trajectory deterministically.
inline Vec point_at(const MorseData& from, const Vec& start, double t) {
  FlowParams fp = ray_flow_params(from);
  fp.max_time = std::max(t, 0.0);
  return flow_to_limit(*from.space, from.obj, start, fp).endpoint;
}

struct Scan {
  std::vector<double> ts;
  std::vector<Vec> ps;
};

// Accepted-step samples of an upstream descent ray, densified until
// consecutive points are closer than max_gap so no downstream feature can
// slip between samples.
inline Scan sample_ray(const MorseData& from, const Vec& start, double max_gap) {
  Scan out;
  FlowParams fp = ray_flow_params(from);
  fp.observer = [&](double t, const Vec& p) {
    out.ts.push_back(t);
    out.ps.push_back(p);
  };
  flow_to_limit(*from.space, from.obj, start, fp);
  // The observer fires every accepted step, which oversamples slow
  // trajectories by orders of magnitude; thin to half the gap target first,
  // since each retained sample later costs a full probe descent.
  if (out.ts.size() > 2) {
    Scan thin;
    thin.ts.push_back(out.ts.front());
    thin.ps.push_back(out.ps.front());
    for (size_t i = 1; i + 1 < out.ts.size(); ++i)
      if (from.space->distance(thin.ps.back(), out.ps[i]) >= 0.5 * max_gap) {
        thin.ts.push_back(out.ts[i]);
        thin.ps.push_back(out.ps[i]);
      }
    thin.ts.push_back(out.ts.back());
    thin.ps.push_back(out.ps.back());
    out = std::move(thin);
  }
  for (int round = 0; round < 6; ++round) {
    bool split = false;
    Scan dens;
    dens.ts.push_back(out.ts.front());
    dens.ps.push_back(out.ps.front());
    for (size_t i = 1; i < out.ts.size(); ++i) {
      if (from.space->distance(dens.ps.back(), out.ps[i]) > max_gap &&
          out.ts[i] - dens.ts.back() > 1e-12) {
        double tm = 0.5 * (dens.ts.back() + out.ts[i]);
        dens.ts.push_back(tm);
        dens.ps.push_back(point_at(from, start, tm));
        split = true;
      }
      dens.ts.push_back(out.ts[i]);
      dens.ps.push_back(out.ps[i]);
    }
    out = std::move(dens);
    if (!split) break;
  }
  return out;
}

inline Vec circle_start(const MorseData& from, const CriticalPoint& x, double phi) {
  Vec u = std::cos(phi) * x.unstable.col(0) + std::sin(phi) * x.unstable.col(1);
  return from.space->chart_point(x.rep, Vec(from.prm.shoot_radius * u));
}

inline Vec ray_start(const MorseData& from, const CriticalPoint& x, int ray) {
  double sgn = ray == 0 ? 1.0 : -1.0;
  return from.space->chart_point(x.rep, Vec(sgn * from.prm.shoot_radius * x.unstable.col(0)));
}

struct Probe {
  DescentLimit limit;
  std::vector<double> dips;  // closest approach to each listed target
  Vec last;                  // final accepted flow sample (start when none)
};

// One downstream descent recording the closest approach to every listed
// target; stable-manifold membership shows up as a vanishing dip.
inline Probe probe_descent(const MorseData& to, const Vec& z,
                           const std::vector<const CriticalPoint*>& targets) {
  Probe pr;
  pr.dips.assign(targets.size(), kInf);
  pr.last = z;
  EngineParams ep = to.prm;
  ep.flow.observer = [&](double, const Vec& p) {
    pr.last = p;
    for (size_t j = 0; j < targets.size(); ++j)
      pr.dips[j] = std::min(pr.dips[j], to.space->distance(p, targets[j]->rep));
  };
  pr.limit = descend_to_limit(*to.space, to.obj, to.points, z, ep);
  if (pr.limit.kind == LimitKind::Unresolved)
    throw std::runtime_error(
        "downstream descent did not resolve to a generator or a gate exit; raise the flow "
        "budget or refine the admitted point set");
  if (pr.limit.kind == LimitKind::Point)
    for (size_t j = 0; j < targets.size(); ++j)
      if (targets[j]->id == pr.limit.cp) pr.dips[j] = 0.0;
  return pr;
}

struct DipZero {
  double t;
  double dip;
};

// Local minima of the sampled dip curve below the candidate level, refined by
// golden section.  Refined dips in [accept, 3 accept) are ambiguous and
// abort; larger ones are near passes and are dropped.
inline std::vector<DipZero> dip_zeros(const std::vector<double>& ts,
                                      const std::vector<double>& dips,
                                      const std::function<double(double)>& dip_at,
                                      double candidate, double accept, const char* what) {
  std::vector<DipZero> out;
  const size_t n = ts.size();
  for (size_t j = 0; j < n; ++j) {
    double here = dips[j];
    double left = j > 0 ? dips[j - 1] : kInf;
    double right = j + 1 < n ? dips[j + 1] : kInf;
    if (!(here <= left && here < right)) continue;
    if (here >= candidate) continue;
    double a = ts[j > 0 ? j - 1 : j];
    double b = ts[j + 1 < n ? j + 1 : j];
    double t_star = golden_min(dip_at, a, b, 60);
    double d_star = dip_at(t_star);
    if (d_star < accept) {
      out.push_back({t_star, d_star});
    } else if (d_star < 3.0 * accept) {
      std::ostringstream os;
      os << what << ": refined closest approach " << d_star
         << " sits at the acceptance margin; refine sampling or perturb the potential";
      throw std::runtime_error(os.str());
    }
  }
  std::sort(out.begin(), out.end(), [](const DipZero& a, const DipZero& b) { return a.t < b.t; });
  std::vector<DipZero> merged;
  for (const auto& z : out)
    if (merged.empty() || z.t - merged.back().t > 1e-6 * (1.0 + std::abs(z.t)))
      merged.push_back(z);
  return merged;
}

struct Gn2Result {
  double a = 0, b = 0;
  double residual = kInf;
  double cond = kInf;
};

// Damped Gauss-Newton for a two-parameter, two-component defect.  Stalls at
// local minima of the residual instead of diverging, so callers can tell
// crossings (residual collapses) from near passes (residual floors high).
inline Gn2Result gauss_newton2(const std::function<Vec(double, double)>& F, double a, double b,
                               double ha, double hb, int max_iter) {
  Gn2Result res;
  Vec f = F(a, b);
  double fn = f.norm();
  for (int it = 0; it < max_iter; ++it) {
    Vec fa = F(a + ha, b);
    Vec fb = F(a, b + hb);
    Eigen::Matrix2d J;
    J.col(0) = (fa - f) / ha;
    J.col(1) = (fb - f) / hb;
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    double smax = svd.singularValues()(0), smin = svd.singularValues()(1);
    res.cond = smin > 0 ? smax / smin : kInf;
    if (!(smin > 0)) break;
    Eigen::Vector2d step = svd.solve(Eigen::Vector2d(f[0], f[1]));
    double lam = 1.0;
    bool moved = false;
    for (int h = 0; h < 30; ++h, lam *= 0.5) {
      double an = a - lam * step(0), bn = b - lam * step(1);
      Vec fnew = F(an, bn);
      if (fnew.norm() < fn) {
        a = an;
        b = bn;
        f = fnew;
        fn = fnew.norm();
        moved = true;
        break;
      }
    }
    if (!moved || fn < 1e-13) break;
  }
  res.a = a;
  res.b = b;
  res.residual = fn;
  return res;
}

}  // namespace loopmorse::detail
