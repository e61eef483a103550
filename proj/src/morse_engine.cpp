#include "loopmorse/morse_engine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace loopmorse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat chart_hessian(const ConfigSpace& space, const Objective& obj, const Vec& p) {
  if (obj.chart_hess) return obj.chart_hess(p);
  return fd_chart_hess(space, obj, p);
}

// Out-of-chart probes count as infinitely bad instead of aborting the search.
double guarded_gnorm(const ConfigSpace& space, const Objective& obj, const Vec& p) {
  try {
    return gradient_norm(space, obj.chart_grad(p), p);
  } catch (const std::domain_error&) {
    return kInf;
  }
}

std::string point_id(int id) { return "c" + std::to_string(id); }

double min_pairwise_separation(const ConfigSpace& space, const std::vector<CriticalPoint>& cps) {
  double sep = kInf;
  for (size_t i = 0; i < cps.size(); ++i)
    for (size_t j = i + 1; j < cps.size(); ++j)
      sep = std::min(sep, space.distance(cps[i].rep, cps[j].rep));
  return std::isfinite(sep) ? sep : 1.0;
}

// Golden-section minimization of f over [a, b]; returns (argmin, min).
std::pair<double, double> golden_min(const std::function<double(double)>& f, double a, double b,
                                     int iters) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? std::make_pair(c, fc) : std::make_pair(d, fd);
}

}  // namespace

std::optional<Vec> newton_polish(const ConfigSpace& space, const Objective& obj, Vec start,
                                 const EngineParams& prm) {
  Vec p = space.normalize(std::move(start));
  double gn = guarded_gnorm(space, obj, p);
  if (!std::isfinite(gn)) return std::nullopt;
  for (int it = 0; it < prm.newton_max_iter; ++it) {
    if (gn < prm.grad_tol) return p;
    Vec g = obj.chart_grad(p);
    Mat h = chart_hessian(space, obj, p);
    Eigen::LDLT<Mat> ldlt(h);
    Vec step;
    bool have_newton = ldlt.info() == Eigen::Success;
    if (have_newton) {
      step = ldlt.solve(-g);
      have_newton = step.allFinite();
    }
    Vec dg = space.metric_diag(p);
    if (!have_newton) step = -(g.array() / dg.array()).matrix();
    // Cap the metric step length so chart evaluations stay in-domain.
    double len = std::sqrt((step.array().square() * dg.array()).sum());
    if (len > 0.5) step *= 0.5 / len;
    bool accepted = false;
    for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
      Vec q = space.normalize(space.chart_point(p, alpha * step));
      double gq = guarded_gnorm(space, obj, q);
      if (gq < gn * (1.0 - 1e-4 * alpha)) {
        p = std::move(q);
        gn = gq;
        accepted = true;
        break;
      }
    }
    if (!accepted) return std::nullopt;
  }
  return gn < prm.grad_tol ? std::optional<Vec>(p) : std::nullopt;
}

std::vector<CriticalPoint> find_critical_points(const ConfigSpace& space, const Objective& obj,
                                                const std::vector<Vec>& seeds,
                                                const EngineParams& prm) {
  std::vector<CriticalPoint> out;
  for (const Vec& seed : seeds) {
    auto polished = newton_polish(space, obj, seed, prm);
    if (!polished) continue;  // non-convergence from a seed is skipped
    Vec p = space.normalize(*polished);
    double v = obj.value(p);
    // Gate excision comes first: a degenerate point inside the gate is
    // invisible, not fatal.
    if (prm.gate && v <= *prm.gate) continue;
    bool dup = false;
    for (const auto& cp : out) dup = dup || space.distance(cp.rep, p) < prm.dedup_tol;
    if (dup) continue;

    Mat h = chart_hessian(space, obj, p);
    Vec scale = space.metric_diag(p).cwiseSqrt().cwiseInverse();
    Mat scaled = scale.asDiagonal() * h * scale.asDiagonal();
    scaled = 0.5 * (scaled + scaled.transpose()).eval();
    Vec eig(0);
    Mat evecs(0, 0);
    if (scaled.rows() > 0) {  // the eigensolver rejects empty input
      Eigen::SelfAdjointEigenSolver<Mat> es(scaled);
      if (es.info() != Eigen::Success) throw std::runtime_error("Hessian eigensolve failed");
      eig = es.eigenvalues();
      evecs = es.eigenvectors();
    }
    // A zero-dimensional space has no directions to degenerate in.
    double margin = eig.size() == 0 ? 1.0 : eig.cwiseAbs().minCoeff();
    if (margin <= prm.nondeg_tol) {
      std::ostringstream os;
      os << "degenerate critical point at value " << v << " (scaled-Hessian margin " << margin
         << " <= " << prm.nondeg_tol << "); perturb the potential V to restore genericity";
      throw DegeneracyError(os.str());
    }
    CriticalPoint cp;
    cp.rep = std::move(p);
    cp.value = v;
    cp.min_abs_eig = margin;
    cp.eigenvalues = eig;
    int idx = 0;
    while (idx < eig.size() && eig[idx] < 0) ++idx;
    cp.index = idx;
    cp.unstable = Mat(space.dim(), idx);
    for (int a = 0; a < idx; ++a)
      cp.unstable.col(a) = scale.asDiagonal() * evecs.col(a);
    out.push_back(std::move(cp));
  }
  std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    if (a.value != b.value) return a.value < b.value;
    for (int i = 0; i < a.rep.size(); ++i)
      if (a.rep[i] != b.rep[i]) return a.rep[i] < b.rep[i];
    return false;
  });
  for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

std::vector<Vec> grid_seeds(const FiniteDimSpace& space, int per_axis) {
  const ModelManifold& m = space.manifold();
  std::vector<Vec> out;
  if (m.flat()) {
    int d = m.dim();
    std::vector<int> c(d, 0);
    while (true) {
      Vec p(d);
      // Fractional offset keeps seeds off symmetry axes of model functions.
      for (int k = 0; k < d; ++k) p[k] = 2.0 * M_PI * (c[k] + 0.37) / per_axis;
      out.push_back(p);
      int k = 0;
      while (k < d && ++c[k] == per_axis) c[k++] = 0;
      if (k == d) break;
    }
    return out;
  }
  for (int a = 0; a < per_axis; ++a) {
    double theta = M_PI * (a + 0.5) / per_axis;
    for (int b = 0; b < per_axis; ++b) {
      double phi = 2.0 * M_PI * (b + 0.31) / per_axis;
      Vec p(3);
      p << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
      out.push_back(p);
    }
  }
  return out;
}

DescentLimit descend_to_limit(const ConfigSpace& space, const Objective& obj,
                              const std::vector<CriticalPoint>& cps, const Vec& start,
                              const EngineParams& prm) {
  FlowParams fp = prm.flow;
  fp.value_floor = prm.gate ? *prm.gate : -1e300;
  Vec last_above;
  double t_above = 0.0;
  bool have_above = false;
  auto user_obs = prm.flow.observer;
  fp.observer = [&](double t, const Vec& s) {
    if (user_obs) user_obs(t, s);
    if (prm.gate && obj.value(s) > *prm.gate) {
      last_above = s;
      t_above = t;
      have_above = true;
    }
  };

  FlowResult res = flow_to_limit(space, obj, start, fp);
  DescentLimit out;
  out.value = res.value;
  out.time = res.time;

  if (res.outcome == FlowOutcome::Converged) {
    auto polished = newton_polish(space, obj, res.endpoint, prm);
    if (!polished) return out;  // Unresolved
    Vec p = space.normalize(*polished);
    int best = -1;
    double best_dist = kInf;
    for (const auto& cp : cps) {
      double dd = space.distance(p, cp.rep);
      if (dd < best_dist) {
        best_dist = dd;
        best = cp.id;
      }
    }
    if (best >= 0 && best_dist < prm.dedup_tol) {
      out.kind = LimitKind::Point;
      out.cp = best;
      out.value = obj.value(p);
    }
    return out;
  }

  if (res.outcome == FlowOutcome::Escaped) {
    out.kind = LimitKind::Gate;
    if (!have_above) {
      // The start was already at or below the gate.
      out.crossing = space.normalize(start);
      out.value = obj.value(out.crossing);
      return out;
    }
    // Bisect the crossing time with clean fixed-horizon integrations so the
    // returned configuration sits on the gate level.
    FlowParams bf = prm.flow;
    bf.observer = nullptr;
    bf.grad_tol = 0.0;
    bf.value_floor = -1e300;
    double lo = 0.0, hi = res.time - t_above;
    Vec crossing = res.endpoint;
    double cv = res.value;
    for (int it = 0; it < 80 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
      double mid = 0.5 * (lo + hi);
      bf.max_time = mid;
      FlowResult r = flow_to_limit(space, obj, last_above, bf);
      if (r.value > *prm.gate) {
        lo = mid;
      } else {
        hi = mid;
        crossing = r.endpoint;
        cv = r.value;
      }
      if (std::abs(r.value - *prm.gate) < 1e-10 * (1.0 + std::abs(*prm.gate))) {
        crossing = r.endpoint;
        cv = r.value;
        break;
      }
    }
    out.crossing = space.normalize(crossing);
    out.value = cv;
    return out;
  }

  return out;  // MaxTime -> Unresolved
}

std::map<int, int> connection_parities(const ConfigSpace& space, const Objective& obj,
                                       const std::vector<CriticalPoint>& cps, int source_id,
                                       const EngineParams& prm) {
  const CriticalPoint& x = cps.at(source_id);
  int k = x.index;
  std::map<int, int> par;
  if (k == 0) return par;
  std::vector<int> targets;
  for (const auto& cp : cps)
    if (cp.index == k - 1) targets.push_back(cp.id);
  for (int t : targets) par[t] = 0;
  if (targets.empty()) return par;

  if (k == 1) {
    for (double s : {1.0, -1.0}) {
      Vec start = space.chart_point(x.rep, s * prm.shoot_radius * x.unstable.col(0));
      DescentLimit lim = descend_to_limit(space, obj, cps, start, prm);
      if (lim.kind == LimitKind::Gate) continue;
      if (lim.kind == LimitKind::Unresolved)
        throw std::runtime_error("descent from an unstable ray did not resolve to a known point");
      const CriticalPoint& y = cps.at(lim.cp);
      if (y.index != k - 1) {
        std::ostringstream os;
        os << "unstable ray of point " << x.id << " reached the index-" << y.index << " point "
           << y.id << "; perturb the potential V to restore transversality";
        throw DegeneracyError(os.str());
      }
      par[y.id] ^= 1;
    }
    return par;
  }

  if (k != 2)
    throw std::runtime_error("connection counting is implemented for source index <= 2");

  double min_sep = min_pairwise_separation(space, cps);
  double accept_tol = std::max(prm.cluster_floor, 2e-3 * min_sep);
  double candidate_tol = 0.3 * min_sep;

  // One descent per direction, recording for every target the closest
  // approach of the trajectory.
  auto dips_at = [&](double phi) {
    Vec dir = std::cos(phi) * x.unstable.col(0) + std::sin(phi) * x.unstable.col(1);
    Vec start = space.chart_point(x.rep, prm.shoot_radius * dir);
    std::vector<double> dmin(targets.size(), kInf);
    EngineParams ep = prm;
    ep.flow.observer = [&](double, const Vec& st) {
      for (size_t ti = 0; ti < targets.size(); ++ti)
        dmin[ti] = std::min(dmin[ti], space.distance(st, cps[targets[ti]].rep));
    };
    DescentLimit lim = descend_to_limit(space, obj, cps, start, ep);
    if (lim.kind == LimitKind::Unresolved)
      throw std::runtime_error("descent inside an unstable circle scan did not resolve");
    if (lim.kind == LimitKind::Point)
      for (size_t ti = 0; ti < targets.size(); ++ti)
        if (targets[ti] == lim.cp) dmin[ti] = 0.0;
    return dmin;
  };

  int S = prm.sphere_samples;
  std::vector<std::vector<double>> dips(S);
  for (int j = 0; j < S; ++j) dips[j] = dips_at(2.0 * M_PI * j / S);

  for (size_t ti = 0; ti < targets.size(); ++ti) {
    std::vector<double> found;  // refined crossing angles
    for (int j = 0; j < S; ++j) {
      double here = dips[j][ti];
      double left = dips[(j + S - 1) % S][ti];
      double right = dips[(j + 1) % S][ti];
      // Strict on one side so a two-sample plateau yields one candidate.
      if (!(here <= left && here < right)) continue;
      if (here >= candidate_tol) continue;
      double a = 2.0 * M_PI * (j - 1) / S;
      double b = 2.0 * M_PI * (j + 1) / S;
      auto [phi_star, d_star] =
          golden_min([&](double phi) { return dips_at(phi)[ti]; }, a, b, 60);
      if (d_star < accept_tol) {
        found.push_back(phi_star);
      } else if (d_star < 3.0 * accept_tol) {
        std::ostringstream os;
        os << "ambiguous trajectory cluster: closest approach " << d_star << " to point "
           << targets[ti] << " sits at the acceptance margin; increase sphere_samples";
        throw std::runtime_error(os.str());
      }
      // Larger refined dips are near passes, not crossings.
    }
    std::sort(found.begin(), found.end());
    int count = 0;
    for (size_t a = 0; a < found.size(); ++a) {
      if (a > 0 && found[a] - found[a - 1] < 1e-6) continue;  // same crossing twice
      ++count;
    }
    // The scan interval wraps: merge a crossing caught at both ends.
    if (found.size() >= 2 && (found.back() - found.front()) > 2.0 * M_PI - 1e-6) --count;
    par[targets[ti]] = count % 2;
  }
  return par;
}

ComplexBuild build_morse_complex(const ConfigSpace& space, const Objective& obj,
                                 const std::vector<Vec>& seeds, const EngineParams& prm) {
  ComplexBuild build;
  build.points = find_critical_points(space, obj, seeds, prm);
  build.complex = std::make_shared<gf2::GradedBitComplex>();
  for (const auto& cp : build.points) {
    std::ostringstream label;
    label << "value=" << cp.value << " index=" << cp.index;
    build.complex->add_generator({point_id(cp.id), cp.index, label.str()});
  }
  for (const auto& cp : build.points) {
    if (cp.index == 0) continue;
    bool has_targets = false;
    for (const auto& other : build.points) has_targets = has_targets || other.index == cp.index - 1;
    if (!has_targets) continue;
    if (cp.index > 2)
      throw std::runtime_error("connection counting is implemented for source index <= 2");
    auto parities = connection_parities(space, obj, build.points, cp.id, prm);
    for (const auto& [target, parity] : parities)
      if (parity) build.complex->set_boundary_entry(point_id(cp.id), point_id(target), true);
  }
  if (!build.complex->verify_boundary_squared())
    throw std::runtime_error(
        "assembled boundary fails d*d = 0; refine sampling or perturb the potential");
  return build;
}

}  // namespace loopmorse
