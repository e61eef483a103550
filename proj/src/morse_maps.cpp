#include "loopmorse/morse_maps.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "loopmorse/flow.hpp"
#include "scan_util.hpp"

namespace loopmorse {
namespace {

using namespace detail;

// Detection thresholds.  `accept` is capped below the shooting radius: a ray
// starts shoot_radius away from its critical point, so when the disk center
// itself is a counted solution the ray-edge dip floors at that radius and
// must stay outside the acceptance band (the center is counted separately).
struct ScanTols {
  double min_sep = 1.0;
  double candidate = 0.3;
  double accept = 1e-4;
  double r_loc = 0.45;          // proximity radius for top-index candidates
  double defect_accept = 1e-6;  // residual cut for polished graph defects
  double max_gap = 0.25;        // spatial densification target along rays
};

ScanTols scan_tols(const MorseData& from, const MorseData& to) {
  ScanTols t;
  t.min_sep = min_separation(*to.space, to.points);
  t.candidate = 0.3 * t.min_sep;
  t.accept = std::min(std::max(to.prm.cluster_floor, 2e-3 * t.min_sep),
                      0.25 * from.prm.shoot_radius);
  t.r_loc = 0.45 * t.min_sep;
  t.defect_accept = std::max(1e-7, 1e-4 * t.r_loc);
  t.max_gap = 0.25 * t.min_sep;
  return t;
}

// Metric pairing of the offset from y against y's unstable directions,
// evaluated with chart probes only.  Vanishes on the stable graph of y to
// first order, which suffices inside the proximity radius.
Vec unstable_defect(const ConfigSpace& space, const CriticalPoint& y, const Vec& z) {
  int m = static_cast<int>(y.unstable.cols());
  Vec out(m);
  const double h = 1e-5;
  for (int a = 0; a < m; ++a) {
    Vec u = y.unstable.col(a);
    double dp = space.distance(z, space.chart_point(y.rep, Vec(h * u)));
    double dm = space.distance(z, space.chart_point(y.rep, Vec(-h * u)));
    out[a] = (dm * dm - dp * dp) / (4.0 * h);
  }
  return out;
}

struct Assembler {
  Assembler(const MorseData& from, const MorseData& to, int shift)
      : map(from.complex, to.complex, shift) {}
  gf2::ParityChainMap map;
  std::vector<IntersectionEvent> events;
  std::map<std::pair<std::string, std::string>, int> parity;

  void hit(const std::string& src, const std::string& tgt, std::string kind,
           std::vector<double> params, double residual, double value, std::string note = "") {
    IntersectionEvent ev;
    ev.id = "e" + std::to_string(events.size());
    ev.kind = std::move(kind);
    ev.source = src;
    ev.target = tgt;
    ev.params = std::move(params);
    ev.residual = residual;
    ev.value = value;
    ev.note = std::move(note);
    parity[{src, tgt}] ^= 1;
    map.add_provenance(src, tgt, ev.id);
    events.push_back(std::move(ev));
  }

  void warn(const std::string& src, std::string note) {
    IntersectionEvent ev;
    ev.id = "e" + std::to_string(events.size());
    ev.kind = "warning";
    ev.source = src;
    ev.note = std::move(note);
    events.push_back(std::move(ev));
  }

  MapBuild finalize(bool enforce_chain) {
    for (const auto& [key, p] : parity)
      if (p & 1) map.set_entry(key.first, key.second, true);
    bool ok = map.is_chain_map();
    map.mark_verified(ok);
    if (enforce_chain && !ok)
      throw std::runtime_error(
          "assembled map fails the chain identity; refine sampling or perturb the potential");
    return MapBuild{std::move(map), std::move(events)};
  }
};

void gate_warnings(const MorseData& d, double margin, Assembler& out, const char* side) {
  if (!d.prm.gate) return;
  double eps = *d.prm.gate;
  double band = margin * std::max(std::abs(eps), 1e-12);
  for (const auto& cp : d.points)
    if (cp.value <= eps + band)
      out.warn(gen_id(cp.id),
               std::string(side) + " generator grazes the admission gate; its flowlines are "
                                   "numerically fragile");
}

// Full-rank check of the transform differential in the upstream chart.
void check_transform_rank(const std::function<Vec(const Vec&)>& transform,
                          const ConfigSpace& up, const Vec& z) {
  int n = up.dim();
  if (n == 0) return;
  const double h = 1e-6;
  Vec f0 = transform(z);
  Mat J(f0.size(), n);
  for (int a = 0; a < n; ++a) {
    Vec e = Vec::Zero(n);
    e[a] = 1.0;
    Vec fp = transform(up.chart_point(z, Vec(h * e)));
    Vec fm = transform(up.chart_point(z, Vec(-h * e)));
    J.col(a) = (fp - fm) / (2.0 * h);
  }
  Eigen::JacobiSVD<Mat> svd(J);
  double smax = svd.singularValues()(0);
  double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin > 1e-8 * std::max(1.0, smax)))
    throw std::runtime_error(
        "transform differential is rank-deficient at a counted solution; the pushforward "
        "hypotheses fail at this datum");
}

// Shared degree-0 counter: continuation is the identity transform, the
// functorial map composes an arbitrary smooth transform before membership.
MapBuild degree0_map(const std::function<Vec(const Vec&)>& transform, bool check_rank,
                     const MorseData& from, const MorseData& to, const MapParams& mp) {
  Assembler out(from, to, 0);
  ScanTols tol = scan_tols(from, to);
  gate_warnings(from, mp.gate_margin, out, "source");
  gate_warnings(to, mp.gate_margin, out, "target");

  for (const CriticalPoint& x : from.points) {
    const int k = x.index;
    std::vector<const CriticalPoint*> targets;
    for (const auto& y : to.points)
      if (y.index == k) targets.push_back(&y);
    if (targets.empty()) continue;

    Vec x_img = to.space->normalize(transform(x.rep));

    if (k == 0) {
      // The unstable set is the point itself: classify its one descent.
      Probe pr = probe_descent(to, x_img, {});
      if (pr.limit.kind == LimitKind::Point) {
        const CriticalPoint& y = to.points[pr.limit.cp];
        if (y.index != 0)
          throw std::runtime_error(
              "transformed minimum lies on a positive-index stable manifold; perturb the "
              "potential to restore genericity");
        if (check_rank) check_transform_rank(transform, *from.space, x.rep);
        out.hit(gen_id(x.id), gen_id(y.id), "constant", {}, 0.0, x.value);
      }
      continue;
    }

    // Solutions at the critical point itself.  Coincident pairs are read off
    // directly; otherwise the center's own descent decides whether it sits on
    // an equal-index stable manifold.  Rays start at the shooting radius, so
    // membership inside that ball must be resolved here and nowhere else.
    for (const CriticalPoint* y : targets) {
      double d0 = to.space->distance(x_img, y->rep);
      if (d0 < to.prm.dedup_tol) {
        if (check_rank) check_transform_rank(transform, *from.space, x.rep);
        out.hit(gen_id(x.id), gen_id(y->id), "constant", {}, d0, x.value);
      } else if (d0 < 3.0 * from.prm.shoot_radius) {
        throw std::runtime_error(
            "paired generators sit closer than the shooting radius; reduce shoot_radius or "
            "perturb the potential");
      }
    }
    {
      Probe pr = probe_descent(to, x_img, {});
      if (pr.limit.kind == LimitKind::Point) {
        const CriticalPoint& yc = to.points[pr.limit.cp];
        if (yc.index > k)
          throw std::runtime_error(
              "transformed generator lies on a higher-index stable manifold; perturb the "
              "potential to restore genericity");
        if (yc.index == k && to.space->distance(x_img, yc.rep) >= to.prm.dedup_tol) {
          if (check_rank) check_transform_rank(transform, *from.space, x.rep);
          out.hit(gen_id(x.id), gen_id(yc.id), "constant", {}, 0.0, x.value,
                  "unstable-disk center on the stable set");
        }
      }
    }

    if (k == 1) {
      for (int ray = 0; ray < 2; ++ray) {
        Vec start = ray_start(from, x, ray);
        Scan scan = sample_ray(from, start, tol.max_gap);
        if (scan.ts.size() < 2) continue;
        std::vector<std::vector<double>> dips(targets.size(),
                                              std::vector<double>(scan.ts.size()));
        for (size_t i = 0; i < scan.ts.size(); ++i) {
          Probe pr = probe_descent(to, to.space->normalize(transform(scan.ps[i])), targets);
          for (size_t j = 0; j < targets.size(); ++j) dips[j][i] = pr.dips[j];
        }
        for (size_t j = 0; j < targets.size(); ++j) {
          auto dip_at = [&](double t) {
            Vec p = point_at(from, start, t);
            return probe_descent(to, to.space->normalize(transform(p)), {targets[j]}).dips[0];
          };
          auto zeros = dip_zeros(scan.ts, dips[j], dip_at, tol.candidate, tol.accept,
                                 "stable-manifold crossing along a ray");
          for (const auto& z : zeros) {
            Vec p = point_at(from, start, z.t);
            if (check_rank) check_transform_rank(transform, *from.space, p);
            out.hit(gen_id(x.id), gen_id(targets[j]->id), "curve",
                    {static_cast<double>(ray), z.t}, z.dip, from.obj.value(p));
          }
        }
      }
      continue;
    }

    if (k == 2) {
      const int S = from.prm.sphere_samples;
      std::vector<Scan> rays(S);
      std::vector<std::vector<Vec>> imgs(S);
      for (int si = 0; si < S; ++si) {
        rays[si] = sample_ray(from, circle_start(from, x, 2.0 * M_PI * si / S), tol.max_gap);
        imgs[si].reserve(rays[si].ps.size());
        for (const Vec& p : rays[si].ps)
          imgs[si].push_back(to.space->normalize(transform(p)));
      }
      for (const CriticalPoint* y : targets) {
        auto F = [&](double phi, double t) {
          Vec p = point_at(from, circle_start(from, x, phi), std::max(t, 1e-9));
          return unstable_defect(*to.space, *y, to.space->normalize(transform(p)));
        };
        std::vector<std::pair<double, double>> sols;
        for (int si = 0; si < S; ++si) {
          const auto& ts = rays[si].ts;
          const size_t n = ts.size();
          for (size_t i = 0; i < n; ++i) {
            double here = to.space->distance(imgs[si][i], y->rep);
            double left = i > 0 ? to.space->distance(imgs[si][i - 1], y->rep) : kInf;
            double right = i + 1 < n ? to.space->distance(imgs[si][i + 1], y->rep) : kInf;
            if (!(here <= left && here < right) || here >= tol.r_loc) continue;
            auto gn = gauss_newton2(F, 2.0 * M_PI * si / S, ts[i], 1e-5,
                                    1e-5 * std::max(1.0, ts[i]), mp.newton_max_iter);
            if (gn.b <= 1e-8) continue;  // the disk center is counted above
            if (gn.residual >= 10.0 * tol.defect_accept) continue;  // near pass
            if (gn.residual >= tol.defect_accept) {
              std::ostringstream os;
              os << "polished stable-graph defect " << gn.residual
                 << " sits at the acceptance margin; refine sampling or perturb the potential";
              throw std::runtime_error(os.str());
            }
            if (gn.cond > mp.cond_tol)
              throw std::runtime_error(
                  "intersection fails the transversality condition check; perturb the "
                  "potential");
            Vec p = point_at(from, circle_start(from, x, gn.a), gn.b);
            Vec z = to.space->normalize(transform(p));
            if (to.space->distance(z, y->rep) >= tol.r_loc) continue;  // wandered off
            bool dup = false;
            for (const auto& s : sols) {
              double dphi = std::remainder(s.first - gn.a, 2.0 * M_PI);
              if (std::abs(dphi) < 1e-4 && std::abs(s.second - gn.b) < 1e-4 * (1.0 + gn.b))
                dup = true;
            }
            if (dup) continue;
            sols.emplace_back(gn.a, gn.b);
            if (check_rank) check_transform_rank(transform, *from.space, p);
            out.hit(gen_id(x.id), gen_id(y->id), "surface", {gn.a, gn.b}, gn.residual,
                    from.obj.value(p));
          }
        }
      }
      continue;
    }

    throw std::runtime_error("degree-0 maps are implemented for source indices up to 2");
  }
  return out.finalize(true);
}

}  // namespace

MorseData make_morse_data(std::shared_ptr<const ConfigSpace> space, Objective obj,
                          const std::vector<Vec>& seeds, const EngineParams& prm) {
  auto built = build_morse_complex(*space, obj, seeds, prm);
  MorseData d;
  d.space = std::move(space);
  d.obj = std::move(obj);
  d.prm = prm;
  d.points = std::move(built.points);
  d.complex = built.complex;
  return d;
}

MapBuild continuation_map(const MorseData& from, const MorseData& to, const MapParams& mp) {
  if (from.space->rep_dim() != to.space->rep_dim())
    throw std::invalid_argument("continuation requires a shared underlying space");
  bool gates_match = from.prm.gate.has_value() == to.prm.gate.has_value() &&
                     (!from.prm.gate || std::abs(*from.prm.gate - *to.prm.gate) < 1e-12);
  if (!gates_match) throw std::invalid_argument("continuation requires identical gates");
  return degree0_map([](const Vec& z) { return z; }, false, from, to, mp);
}

MapBuild functorial_map(const std::function<Vec(const Vec&)>& transform, const MorseData& from,
                        const MorseData& to, const MapParams& mp) {
  return degree0_map(transform, true, from, to, mp);
}

MapBuild gysin_map(const MorseData& ambient, const MorseData& sub, const Embedding& emb,
                   const MapParams& mp) {
  if (emb.codim == 0) {
    auto transform = [&emb](const Vec& z) { return emb.include(emb.project(z)); };
    return degree0_map(transform, false, ambient, sub, mp);
  }
  if (emb.codim != 1)
    throw std::runtime_error(
        "submanifold restriction maps are implemented for codimension 0 and 1");

  Assembler out(ambient, sub, -1);
  ScanTols tol = scan_tols(ambient, sub);
  ScanTols atol = scan_tols(ambient, ambient);
  gate_warnings(ambient, mp.gate_margin, out, "source");
  gate_warnings(sub, mp.gate_margin, out, "target");

  // All crossings of one ambient ray with the submanifold, located by sign
  // changes of the defect and sharpened by horizon bisection.
  auto ray_crossings = [&](const Vec& start) {
    std::vector<std::pair<double, Vec>> found;  // (time, ambient point on X)
    Scan scan = sample_ray(ambient, start, atol.max_gap);
    std::vector<double> def(scan.ts.size());
    for (size_t i = 0; i < scan.ts.size(); ++i) def[i] = emb.defect(scan.ps[i])[0];
    for (size_t i = 1; i < scan.ts.size(); ++i) {
      if (def[i - 1] == 0.0) continue;
      if (def[i - 1] * def[i] > 0.0) {
        // A dip toward zero without a sign change is a tangency.
        double here = std::abs(def[i]);
        if (i + 1 < scan.ts.size() && here < 1e-7 && here <= std::abs(def[i - 1]) &&
            here < std::abs(def[i + 1]))
          throw std::runtime_error(
              "unstable ray grazes the submanifold tangentially; perturb the potential");
        continue;
      }
      double lo = scan.ts[i - 1], hi = scan.ts[i];
      double flo = def[i - 1];
      for (int b = 0; b < 80; ++b) {
        double mid = 0.5 * (lo + hi);
        double fm = emb.defect(point_at(ambient, start, mid))[0];
        if (std::abs(fm) < mp.seam_tol) {
          lo = hi = mid;
          break;
        }
        if (flo * fm <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      double tc = 0.5 * (lo + hi);
      found.emplace_back(tc, point_at(ambient, start, tc));
    }
    return found;
  };

  for (const CriticalPoint& y : ambient.points) {
    const int k = y.index;
    std::vector<const CriticalPoint*> targets;
    for (const auto& x : sub.points)
      if (x.index == k - emb.codim) targets.push_back(&x);
    if (targets.empty()) continue;
    if (k > 2)
      throw std::runtime_error(
          "submanifold restriction maps are implemented for source indices up to 2");

    // Solutions at the critical point itself, when it sits on the
    // submanifold: the constant piece of its unstable family.
    double dy = emb.defect(y.rep).cwiseAbs().maxCoeff();
    if (dy < mp.seam_tol) {
      Vec zx = sub.space->normalize(emb.project(y.rep));
      std::vector<const CriticalPoint*> open;
      for (const CriticalPoint* x : targets) {
        double d0 = sub.space->distance(zx, x->rep);
        if (d0 < sub.prm.dedup_tol)
          out.hit(gen_id(y.id), gen_id(x->id), "constant", {}, d0, y.value);
        else
          open.push_back(x);
      }
      if (!open.empty() && open[0]->index == 0) {
        Probe pr = probe_descent(sub, zx, {});
        if (pr.limit.kind == LimitKind::Point) {
          const CriticalPoint& lx = sub.points[pr.limit.cp];
          if (lx.index != 0)
            throw std::runtime_error(
                "projected generator lies on a positive-index stable manifold; perturb the "
                "potential");
          for (const CriticalPoint* x : open)
            if (x->id == lx.id)
              out.hit(gen_id(y.id), gen_id(x->id), "constant", {}, 0.0, y.value);
        }
      } else if (!open.empty()) {
        Probe pr = probe_descent(sub, zx, open);
        for (size_t j = 0; j < open.size(); ++j) {
          if (pr.dips[j] < tol.accept)
            out.hit(gen_id(y.id), gen_id(open[j]->id), "constant", {}, pr.dips[j], y.value);
          else if (pr.dips[j] < 3.0 * tol.accept)
            throw std::runtime_error(
                "projected generator sits at the stable-manifold acceptance margin; perturb "
                "the potential");
        }
      }
    } else if (dy < 3.0 * ambient.prm.shoot_radius) {
      throw std::runtime_error(
          "ambient generator sits near the submanifold but not on it; reduce shoot_radius or "
          "perturb the potential");
    }

    if (k == 1) {
      // Isolated ray crossings, classified by the submanifold descent.
      for (int ray = 0; ray < 2; ++ray) {
        for (const auto& [tc, at] : ray_crossings(ray_start(ambient, y, ray))) {
          Vec zx = sub.space->normalize(emb.project(at));
          Probe pr = probe_descent(sub, zx, {});
          if (pr.limit.kind != LimitKind::Point) continue;
          const CriticalPoint& lx = sub.points[pr.limit.cp];
          if (lx.index != 0)
            throw std::runtime_error(
                "submanifold crossing lies on a positive-index stable manifold; perturb the "
                "potential");
          for (const CriticalPoint* x : targets)
            if (x->id == lx.id)
              out.hit(gen_id(y.id), gen_id(x->id), "curve", {static_cast<double>(ray), tc},
                      std::abs(emb.defect(at)[0]), ambient.obj.value(at));
        }
      }
      continue;
    }

    if (k == 2) {
      // The unstable circle sweeps a curve of submanifold crossings; dips of
      // the submanifold descent along that curve mark the counted solutions.
      const int S = ambient.prm.sphere_samples;
      auto curve_dips = [&](double phi, const CriticalPoint* x) {
        double best = kInf;
        for (const auto& [tc, at] : ray_crossings(circle_start(ambient, y, phi))) {
          (void)tc;
          Vec zx = sub.space->normalize(emb.project(at));
          best = std::min(best, probe_descent(sub, zx, {x}).dips[0]);
        }
        return best;
      };
      for (const CriticalPoint* x : targets) {
        std::vector<double> phis(S), dips(S);
        for (int si = 0; si < S; ++si) {
          phis[si] = 2.0 * M_PI * si / S;
          dips[si] = curve_dips(phis[si], x);
        }
        std::vector<double> found;
        for (int j = 0; j < S; ++j) {
          double here = dips[j];
          double left = dips[(j + S - 1) % S];
          double right = dips[(j + 1) % S];
          if (!(here <= left && here < right)) continue;
          if (here >= tol.candidate) continue;
          auto eval = [&](double phi) { return curve_dips(phi, x); };
          double phi_star =
              golden_min(eval, phis[j] - 2.0 * M_PI / S, phis[j] + 2.0 * M_PI / S, 60);
          double d_star = eval(phi_star);
          if (d_star < tol.accept) {
            found.push_back(std::fmod(phi_star + 2.0 * M_PI, 2.0 * M_PI));
          } else if (d_star < 3.0 * tol.accept) {
            throw std::runtime_error(
                "crossing-curve dip sits at the acceptance margin; increase sphere_samples "
                "or perturb the potential");
          }
        }
        std::sort(found.begin(), found.end());
        std::vector<double> uniq;
        for (double phi : found)
          if (uniq.empty() || phi - uniq.back() > 1e-6) uniq.push_back(phi);
        if (uniq.size() >= 2 && uniq.back() - uniq.front() > 2.0 * M_PI - 1e-6) uniq.pop_back();
        for (double phi : uniq)
          out.hit(gen_id(y.id), gen_id(x->id), "surface", {phi}, 0.0, y.value,
                  "crossing-curve dip");
      }
      continue;
    }
  }
  return out.finalize(true);
}

MapBuild prism_map(const std::function<Vec(const Vec&, double)>& homotopy, const MorseData& from,
                   const MorseData& to, const MapParams& mp) {
  Assembler out(from, to, 1);
  ScanTols tol = scan_tols(from, to);
  gate_warnings(from, mp.gate_margin, out, "source");
  gate_warnings(to, mp.gate_margin, out, "target");
  const int S = mp.curve_samples;
  const double s_lo = mp.s_margin, s_hi = 1.0 - mp.s_margin;
  auto clamp_s = [](double s) { return std::min(std::max(s, 1e-6), 1.0 - 1e-6); };

  // Homotopy track of a single upstream point scanned for downstream
  // membership: the whole story for minima, the disk-center contribution for
  // index-1 points.
  auto track_scan = [&](const CriticalPoint& x,
                        const std::vector<const CriticalPoint*>& targets, const char* note) {
    std::vector<double> ss(S);
    for (int i = 0; i < S; ++i) ss[i] = s_lo + (s_hi - s_lo) * i / (S - 1);
    std::vector<std::vector<double>> dips(targets.size(), std::vector<double>(S));
    for (int i = 0; i < S; ++i) {
      Probe pr = probe_descent(to, to.space->normalize(homotopy(x.rep, ss[i])), targets);
      for (size_t j = 0; j < targets.size(); ++j) dips[j][i] = pr.dips[j];
    }
    for (size_t j = 0; j < targets.size(); ++j) {
      if (dips[j][0] < tol.accept || dips[j][S - 1] < tol.accept)
        throw std::runtime_error(
            "solutions accumulate at the ends of the homotopy interval; the homotopy is not "
            "generic");
      auto dip_at = [&](double s) {
        return probe_descent(to, to.space->normalize(homotopy(x.rep, clamp_s(s))),
                             {targets[j]})
            .dips[0];
      };
      auto zeros = dip_zeros(ss, dips[j], dip_at, tol.candidate, tol.accept,
                             "stable-manifold crossing along the homotopy");
      for (const auto& z : zeros) {
        if (z.t < 2.0 * mp.s_margin || z.t > 1.0 - 2.0 * mp.s_margin)
          throw std::runtime_error(
              "solutions accumulate at the ends of the homotopy interval; the homotopy is "
              "not generic");
        out.hit(gen_id(x.id), gen_id(targets[j]->id), "curve", {z.t}, z.dip, x.value, note);
      }
    }
  };

  for (const CriticalPoint& x : from.points) {
    const int k = x.index;
    std::vector<const CriticalPoint*> targets;
    for (const auto& y : to.points)
      if (y.index == k + 1) targets.push_back(&y);
    if (targets.empty()) continue;

    if (k == 0) {
      track_scan(x, targets, "");
      continue;
    }

    if (k == 1) {
      // The disk center traces its own one-parameter family of solutions.
      track_scan(x, targets, "homotopy track of the disk center");

      // Two-parameter family: ray time against the homotopy parameter.
      for (int ray = 0; ray < 2; ++ray) {
        Vec start = ray_start(from, x, ray);
        Scan scan = sample_ray(from, start, tol.max_gap);
        const size_t n = scan.ts.size();
        if (n < 2) continue;
        std::vector<double> ss(S);
        for (int i = 0; i < S; ++i) ss[i] = s_lo + (s_hi - s_lo) * i / (S - 1);
        for (const CriticalPoint* y : targets) {
          Mat dist(n, S);
          for (size_t i = 0; i < n; ++i)
            for (int j = 0; j < S; ++j)
              dist(i, j) =
                  to.space->distance(to.space->normalize(homotopy(scan.ps[i], ss[j])), y->rep);
          auto F = [&](double t, double s) {
            Vec p = point_at(from, start, std::max(t, 1e-9));
            return unstable_defect(*to.space, *y,
                                   to.space->normalize(homotopy(p, clamp_s(s))));
          };
          std::vector<std::pair<double, double>> sols;
          for (size_t i = 0; i < n; ++i) {
            for (int j = 0; j < S; ++j) {
              double here = dist(i, j);
              if (here >= tol.r_loc) continue;
              double up = i > 0 ? dist(i - 1, j) : kInf;
              double dn = i + 1 < n ? dist(i + 1, j) : kInf;
              double le = j > 0 ? dist(i, j - 1) : kInf;
              double ri = j + 1 < S ? dist(i, j + 1) : kInf;
              if (!(here <= up && here <= le && here < dn && here < ri)) continue;
              auto gn = gauss_newton2(F, scan.ts[i], ss[j], 1e-5 * std::max(1.0, scan.ts[i]),
                                      1e-6, mp.newton_max_iter);
              if (gn.a <= 1e-8) continue;  // the disk center is scanned above
              if (gn.residual >= 10.0 * tol.defect_accept) continue;
              if (gn.residual >= tol.defect_accept) {
                std::ostringstream os;
                os << "polished stable-graph defect " << gn.residual
                   << " sits at the acceptance margin; refine sampling or perturb the "
                      "potential";
                throw std::runtime_error(os.str());
              }
              if (gn.cond > mp.cond_tol)
                throw std::runtime_error(
                    "intersection fails the transversality condition check; perturb the "
                    "potential");
              if (gn.b < 2.0 * mp.s_margin || gn.b > 1.0 - 2.0 * mp.s_margin)
                throw std::runtime_error(
                    "solutions accumulate at the ends of the homotopy interval; the homotopy "
                    "is not generic");
              Vec p = point_at(from, start, gn.a);
              Vec z = to.space->normalize(homotopy(p, gn.b));
              if (to.space->distance(z, y->rep) >= tol.r_loc) continue;
              bool dup = false;
              for (const auto& s : sols)
                if (std::abs(s.first - gn.a) < 1e-4 * (1.0 + gn.a) &&
                    std::abs(s.second - gn.b) < 1e-4)
                  dup = true;
              if (dup) continue;
              sols.emplace_back(gn.a, gn.b);
              out.hit(gen_id(x.id), gen_id(y->id), "surface",
                      {static_cast<double>(ray), gn.a, gn.b}, gn.residual, from.obj.value(p));
            }
          }
        }
      }
      continue;
    }

    throw std::runtime_error("prism maps are implemented for source indices up to 1");
  }
  return out.finalize(false);
}

}  // namespace loopmorse
