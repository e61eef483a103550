#include "loopmorse/loop_model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace loopmorse {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

bool DiscretizedLoop::segments_ok() const {
  double inj = manifold.injectivity_radius();
  for (int i = 0; i < n(); ++i)
    if (manifold.distance(points[i], at(i + 1)) >= inj) return false;
  return true;
}

DiscretizedLoop constant_loop(const ModelManifold& m, const Vec& p, int n) {
  return {m, std::vector<Vec>(n, m.normalized(p))};
}

DiscretizedLoop straight_loop(const ModelManifold& m, const Vec& base,
                              const std::vector<int>& winding, int n) {
  if (!m.flat()) throw std::invalid_argument("straight loops need a flat model");
  if (static_cast<int>(winding.size()) != m.dim())
    throw std::invalid_argument("winding vector has wrong dimension");
  std::vector<Vec> pts(n);
  for (int i = 0; i < n; ++i) {
    Vec x(m.dim());
    for (int k = 0; k < m.dim(); ++k)
      x[k] = base[k] + kTwoPi * winding[k] * static_cast<double>(i) / n;
    pts[i] = m.normalized(x);
  }
  return {m, std::move(pts)};
}

Lagrangian::Lagrangian(double kappa, Potential v, PotentialGrad dv, double sup_norm,
                       std::string name)
    : kappa_(kappa), v_(std::move(v)), dv_(std::move(dv)), sup_norm_(sup_norm),
      name_(std::move(name)) {
  if (!(kappa_ > 0.0)) throw std::invalid_argument("kinetic coefficient must be positive");
  if (sup_norm_ < 0.0) throw std::invalid_argument("potential sup norm must be nonnegative");
}

Lagrangian Lagrangian::pure_kinetic(double kappa) {
  return Lagrangian(kappa, nullptr, nullptr, 0.0, "kinetic");
}

Lagrangian Lagrangian::with_potential(Potential v, PotentialGrad dv, double sup_norm,
                                      double kappa, std::string name) {
  if (!v || !dv) throw std::invalid_argument("potential callbacks must be set");
  return Lagrangian(kappa, std::move(v), std::move(dv), sup_norm, std::move(name));
}

Vec Lagrangian::potential_grad(double t, const Vec& q) const {
  if (!dv_) return Vec::Zero(q.size());
  return dv_(t, q);
}

double Lagrangian::value(const ModelManifold& m, double t, const Vec& q, const Vec& v) const {
  return kappa_ * m.metric_inner(q, v, v) - potential(t, q);
}

double time_window(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return std::exp(4.0 - 1.0 / (t * (1.0 - t)));
}

Lagrangian windowed_cosine_lagrangian(const ModelManifold& m, double delta, double coupling,
                                      double osc, const std::array<double, 3>& phases,
                                      double kappa, std::string name) {
  if (!m.flat()) throw std::invalid_argument("desk potential family needs a flat model");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  int d = m.dim();
  double wmax = 1.0 + 6.0 * std::abs(osc);
  if (coupling * wmax * d >= 1.0)
    throw std::invalid_argument("potential parameters violate positivity");
  auto weight = [osc, phases](double t) {
    double s = 0.0;
    for (int k = 1; k <= 3; ++k) s += std::cos(kTwoPi * k * t + phases[k - 1]);
    return 1.0 + 2.0 * osc * time_window(t) * s;
  };
  auto v = [delta, coupling, weight](double t, const Vec& q) {
    double cs = 0.0;
    for (int k = 0; k < q.size(); ++k) cs += std::cos(q[k]);
    return delta * (1.0 + coupling * weight(t) * cs);
  };
  auto dv = [delta, coupling, weight](double t, const Vec& q) {
    Vec g(q.size());
    double w = weight(t);
    for (int k = 0; k < q.size(); ++k) g[k] = -delta * coupling * w * std::sin(q[k]);
    return g;
  };
  double sup = delta * (1.0 + coupling * wmax * d);
  return Lagrangian::with_potential(v, dv, sup, kappa, std::move(name));
}

double action(const DiscretizedLoop& loop, const Lagrangian& lagr) {
  const auto& m = loop.manifold;
  int n = loop.n();
  double inj = m.injectivity_radius();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = m.distance(loop.points[i], loop.at(i + 1));
    if (d >= inj) throw std::domain_error("loop segment exceeds the injectivity radius");
    s += lagr.kappa() * n * d * d - lagr.potential(loop.time(i), loop.points[i]) / n;
  }
  return s;
}

Lagrangian concat_lagrangian(const Lagrangian& l1, const Lagrangian& l2,
                             const ModelManifold& m, double seam_tol) {
  if (std::abs(l1.kappa() - l2.kappa()) > 1e-12)
    throw std::invalid_argument("kinetic coefficients differ");
  // Seam compatibility on sampled points: values and first time derivatives.
  std::mt19937_64 rng(0x5ea3c0de);
  double h = 1e-4;
  for (int probe = 0; probe < 8; ++probe) {
    Vec q = m.random_point(rng);
    double a = l1.potential(1.0, q), b = l2.potential(0.0, q);
    if (std::abs(a - b) > seam_tol)
      throw std::invalid_argument("potential seam mismatch");
    double da = (3 * l1.potential(1.0, q) - 4 * l1.potential(1.0 - h, q) +
                 l1.potential(1.0 - 2 * h, q)) / (2 * h);
    double db = (-3 * l2.potential(0.0, q) + 4 * l2.potential(h, q) -
                 l2.potential(2 * h, q)) / (2 * h);
    if (std::abs(da - db) > std::max(1.0, std::abs(da)) * 1e-4)
      throw std::invalid_argument("potential seam derivative mismatch");
  }
  auto v1 = [l1](double t, const Vec& q) { return 2.0 * l1.potential(2.0 * t, q); };
  auto v2 = [l2](double t, const Vec& q) { return 2.0 * l2.potential(2.0 * t - 1.0, q); };
  Lagrangian::Potential v = [v1, v2](double t, const Vec& q) {
    return t <= 0.5 ? v1(t, q) : v2(t, q);
  };
  Lagrangian::PotentialGrad dv = [l1, l2](double t, const Vec& q) {
    return t <= 0.5 ? Vec(2.0 * l1.potential_grad(2.0 * t, q))
                    : Vec(2.0 * l2.potential_grad(2.0 * t - 1.0, q));
  };
  return Lagrangian::with_potential(v, dv, 2.0 * std::max(l1.sup_norm(), l2.sup_norm()),
                                    l1.kappa() / 2.0, l1.name() + "#" + l2.name());
}

double theta_reparam(double s, double t) {
  if (!(s > 0.0 && s < 1.0)) throw std::domain_error("reparametrization target outside (0,1)");
  if (t <= 0.5) return 2.0 * s * t;
  return s + (2.0 * t - 1.0) * (1.0 - s);
}

namespace {
// Integral of the quintic smoothstep: P(0)=0, P(1)=1/2, P'(x) in [0,1].
double smoothstep_integral(double x) {
  return ((x - 3.0) * x + 2.5) * x * x * x * x;
}
}  // namespace

double theta_reparam_smooth(double s, double t, double width) {
  double base = theta_reparam(s, t);
  double h = width * s * (1.0 - s);
  double u = t - 0.5;
  if (h < 1e-12 || std::abs(u) >= h) return base;
  double a = 2.0 * s, b = 2.0 * (1.0 - s);
  // Replace the hinge max(u, 0) by a C^2 convex blend on [-h, h].
  double hinge = u > 0.0 ? u : 0.0;
  double blended = 2.0 * h * smoothstep_integral((u + h) / (2.0 * h));
  return base + (b - a) * (blended - hinge);
}

Vec ev(const DiscretizedLoop& loop, double s) {
  if (s < 0.0 || s > 1.0) throw std::domain_error("evaluation time outside [0,1]");
  int n = loop.n();
  double x = s * n;
  int i = static_cast<int>(std::floor(x));
  double u = x - i;
  if (i >= n) { i -= n; }
  if (u == 0.0) return loop.points[i];
  return loop.manifold.geodesic(loop.points[i], loop.at(i + 1), u);
}

DiscretizedLoop gamma(const DiscretizedLoop& loop, double s) {
  std::vector<Vec> pts(loop.n());
  for (int i = 0; i < loop.n(); ++i) pts[i] = ev(loop, theta_reparam(s, loop.time(i)));
  return {loop.manifold, std::move(pts)};
}

DiscretizedLoop gamma_smooth(const DiscretizedLoop& loop, double s, double width) {
  std::vector<Vec> pts(loop.n());
  for (int i = 0; i < loop.n(); ++i)
    pts[i] = ev(loop, theta_reparam_smooth(s, loop.time(i), width));
  return {loop.manifold, std::move(pts)};
}

Vec theta_defect(const DiscretizedLoop& loop, double s) {
  const auto& m = loop.manifold;
  Vec p = loop.points[0];
  Vec q = ev(loop, s);
  if (!m.flat() && p.dot(q) < (-1.0 + 1e-9) * m.radius() * m.radius())
    throw std::domain_error("defect undefined for antipodal points");
  Vec l = m.log_map(p, q);
  auto frame = m.tangent_frame(p);
  Vec out(m.dim());
  for (int k = 0; k < m.dim(); ++k) out[k] = m.metric_inner(p, l, frame[k]);
  return out;
}

DiscretizedLoop concat_loops(const DiscretizedLoop& a, const DiscretizedLoop& b, double tol) {
  if (a.n() != b.n()) throw std::invalid_argument("concatenation needs equal segment counts");
  if (a.manifold.distance(a.points[0], b.points[0]) > tol)
    throw std::invalid_argument("loops do not share a basepoint");
  int n = a.n();
  std::vector<Vec> pts(n);
  for (int i = 0; i < n / 2; ++i) {
    pts[i] = a.points[2 * i];
    pts[n / 2 + i] = b.points[2 * i];
  }
  return {a.manifold, std::move(pts)};
}

namespace {
DiscretizedLoop upsample_double(const ModelManifold& m, const std::vector<Vec>& pts) {
  int k = static_cast<int>(pts.size());
  std::vector<Vec> out(2 * k);
  for (int i = 0; i < k; ++i) {
    out[2 * i] = pts[i];
    out[2 * i + 1] = m.geodesic(pts[i], pts[(i + 1) % k], 0.5);
  }
  return {m, std::move(out)};
}
}  // namespace

std::pair<DiscretizedLoop, DiscretizedLoop> cut_raw(const DiscretizedLoop& loop,
                                                    double fig8_tol) {
  if (loop.n() % 2 != 0) throw std::invalid_argument("cutting needs an even segment count");
  if (theta_defect(loop, 0.5).norm() >= fig8_tol)
    throw std::invalid_argument("loop is not a figure eight within tolerance");
  int h = loop.n() / 2;
  std::vector<Vec> p1(loop.points.begin(), loop.points.begin() + h);
  std::vector<Vec> p2(loop.points.begin() + h, loop.points.end());
  return {DiscretizedLoop{loop.manifold, std::move(p1)},
          DiscretizedLoop{loop.manifold, std::move(p2)}};
}

std::pair<DiscretizedLoop, DiscretizedLoop> cut(const DiscretizedLoop& loop, double fig8_tol) {
  auto halves = cut_raw(loop, fig8_tol);
  return {upsample_double(loop.manifold, halves.first.points),
          upsample_double(loop.manifold, halves.second.points)};
}

std::vector<Vec> loop_gradient(const DiscretizedLoop& loop, const Lagrangian& lagr) {
  const auto& m = loop.manifold;
  int n = loop.n();
  double n2 = 2.0 * lagr.kappa() * n * n;
  std::vector<Vec> grad(n);
  for (int i = 0; i < n; ++i) {
    const Vec& x = loop.points[i];
    Vec lap = m.log_map(x, loop.at(i - 1)) + m.log_map(x, loop.at(i + 1));
    Vec dv = m.project_tangent(x, lagr.potential_grad(loop.time(i), x));
    Vec g(x.size());
    if (m.flat()) {
      for (int k = 0; k < m.dim(); ++k)
        g[k] = -n2 * lap[k] - dv[k] / (m.radius(k) * m.radius(k));
    } else {
      g = -n2 * lap - dv / (m.radius() * m.radius());
    }
    grad[i] = g;
  }
  return grad;
}

double loop_distance(const DiscretizedLoop& a, const DiscretizedLoop& b) {
  if (a.n() != b.n()) throw std::invalid_argument("loop distance needs equal segment counts");
  double s = 0.0;
  for (int i = 0; i < a.n(); ++i) s += a.manifold.distance_sq(a.points[i], b.points[i]);
  return std::sqrt(s / a.n());
}

std::vector<int> winding_vector(const DiscretizedLoop& loop) {
  const auto& m = loop.manifold;
  if (!m.flat()) throw std::invalid_argument("winding is defined for flat models only");
  Vec total = Vec::Zero(m.dim());
  for (int i = 0; i < loop.n(); ++i) total += m.log_map(loop.points[i], loop.at(i + 1));
  std::vector<int> w(m.dim());
  for (int k = 0; k < m.dim(); ++k) {
    double v = total[k] / kTwoPi;
    w[k] = static_cast<int>(std::lround(v));
    if (std::abs(v - w[k]) > 1e-6)
      throw std::invalid_argument("loop winding is not integral; segments too coarse");
  }
  return w;
}

std::string loop_to_csv(const DiscretizedLoop& loop) {
  std::ostringstream out;
  out.precision(17);
  for (int i = 0; i < loop.n(); ++i) {
    out << loop.time(i);
    for (int k = 0; k < loop.points[i].size(); ++k) out << "," << loop.points[i][k];
    out << "\n";
  }
  return out.str();
}

DiscretizedLoop loop_from_csv(const ModelManifold& m, const std::string& csv) {
  std::istringstream in(csv);
  std::vector<Vec> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != m.rep_dim() + 1)
      throw std::invalid_argument("loop CSV row has wrong arity");
    Vec p(m.rep_dim());
    for (int k = 0; k < m.rep_dim(); ++k) p[k] = vals[k + 1];
    pts.push_back(m.normalized(p));
  }
  if (pts.empty()) throw std::invalid_argument("loop CSV is empty");
  return {m, std::move(pts)};
}

}  // namespace loopmorse
