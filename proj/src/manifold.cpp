#include "loopmorse/manifold.hpp"

#include <cmath>

namespace loopmorse {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c[0] = a[1] * b[2] - a[2] * b[1];
  c[1] = a[2] * b[0] - a[0] * b[2];
  c[2] = a[0] * b[1] - a[1] * b[0];
  return c;
}
}  // namespace

std::string to_string(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Circle: return "circle";
    case ManifoldKind::FlatTorus: return "flat-torus";
    case ManifoldKind::RoundSphere: return "round-sphere";
  }
  throw std::logic_error("unknown manifold kind");
}

ManifoldKind manifold_kind_from_string(const std::string& s) {
  if (s == "circle") return ManifoldKind::Circle;
  if (s == "flat-torus") return ManifoldKind::FlatTorus;
  if (s == "round-sphere") return ManifoldKind::RoundSphere;
  throw std::invalid_argument("unknown manifold kind: " + s);
}

double wrap_angle(double theta) {
  double w = theta - kTwoPi * std::floor(theta / kTwoPi);
  if (w >= kTwoPi) w -= kTwoPi;  // floor rounding at the seam
  if (w < 0.0) w += kTwoPi;
  return w;
}

double wrap_angle_signed(double theta) {
  double w = wrap_angle(theta);
  return w > M_PI ? w - kTwoPi : w;
}

ModelManifold::ModelManifold(ManifoldKind kind, std::vector<double> radii)
    : kind_(kind), radii_(std::move(radii)) {
  for (double r : radii_)
    if (!(r > 0.0)) throw std::invalid_argument("manifold radius must be positive");
}

ModelManifold ModelManifold::circle(double radius) {
  return ModelManifold(ManifoldKind::Circle, {radius});
}

ModelManifold ModelManifold::flat_torus(std::vector<double> radii) {
  if (radii.empty()) throw std::invalid_argument("torus needs at least one radius");
  return ModelManifold(ManifoldKind::FlatTorus, std::move(radii));
}

ModelManifold ModelManifold::round_sphere(double radius) {
  return ModelManifold(ManifoldKind::RoundSphere, {radius});
}

int ModelManifold::dim() const {
  return flat() ? static_cast<int>(radii_.size()) : 2;
}

int ModelManifold::rep_dim() const { return flat() ? dim() : 3; }

Vec ModelManifold::normalized(Vec x) const {
  if (x.size() != rep_dim()) throw std::invalid_argument("point has wrong dimension");
  if (flat()) {
    for (int i = 0; i < x.size(); ++i) x[i] = wrap_angle(x[i]);
    return x;
  }
  double n = x.norm();
  if (std::abs(n - 1.0) > 1e-3)
    throw std::invalid_argument("sphere point too far from unit norm");
  return x / n;
}

bool ModelManifold::is_valid(const Vec& x, double tol) const {
  if (x.size() != rep_dim()) return false;
  if (flat()) {
    for (int i = 0; i < x.size(); ++i)
      if (x[i] < 0.0 || x[i] >= kTwoPi) return false;
    return true;
  }
  return std::abs(x.norm() - 1.0) <= tol;
}

Vec ModelManifold::exp_map(const Vec& p, const Vec& v) const {
  if (flat()) return normalized(p + v);
  Vec vt = project_tangent(p, v);
  double a = vt.norm();  // rotation angle on the unit sphere
  if (a < 1e-300) return p;
  Vec q = std::cos(a) * p + (std::sin(a) / a) * vt;
  return q / q.norm();
}

Vec ModelManifold::log_map(const Vec& p, const Vec& q) const {
  if (flat()) {
    Vec v(p.size());
    for (int i = 0; i < p.size(); ++i) v[i] = wrap_angle_signed(q[i] - p[i]);
    return v;
  }
  Vec perp = q - p.dot(q) * p;
  double s = perp.norm();
  double a = std::atan2(s, p.dot(q));
  if (s < 1e-14) {
    if (a < 1.0) return Vec::Zero(3);  // q = p
    // Antipodal: pick the frame direction deterministically.
    return a * tangent_frame(p)[0] * radii_[0];
  }
  return (a / s) * perp;
}

double ModelManifold::distance(const Vec& p, const Vec& q) const {
  if (flat()) {
    double d2 = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      double gap = radii_[i] * wrap_angle_signed(q[i] - p[i]);
      d2 += gap * gap;
    }
    return std::sqrt(d2);
  }
  // atan2 form stays accurate for nearly equal and nearly antipodal points.
  return radii_[0] * std::atan2(cross3(p, q).norm(), p.dot(q));
}

double ModelManifold::distance_sq(const Vec& p, const Vec& q) const {
  double d = distance(p, q);
  return d * d;
}

double ModelManifold::metric_inner(const Vec& p, const Vec& u, const Vec& v) const {
  if (flat()) {
    double s = 0.0;
    for (int i = 0; i < u.size(); ++i) s += radii_[i] * radii_[i] * u[i] * v[i];
    return s;
  }
  (void)p;
  return radii_[0] * radii_[0] * u.dot(v);
}

double ModelManifold::metric_norm(const Vec& p, const Vec& v) const {
  return std::sqrt(metric_inner(p, v, v));
}

std::vector<Vec> ModelManifold::tangent_frame(const Vec& p) const {
  std::vector<Vec> frame;
  if (flat()) {
    for (int i = 0; i < dim(); ++i) {
      Vec e = Vec::Zero(dim());
      e[i] = 1.0 / radii_[i];
      frame.push_back(e);
    }
    return frame;
  }
  // Seed with the coordinate axis least aligned with p, then Gram-Schmidt.
  int axis = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(p[i]) < std::abs(p[axis])) axis = i;
  Vec e1 = Vec::Zero(3);
  e1[axis] = 1.0;
  e1 -= p.dot(e1) * p;
  e1.normalize();
  Vec e2 = cross3(p, e1);
  e2.normalize();
  frame.push_back(e1 / radii_[0]);
  frame.push_back(e2 / radii_[0]);
  return frame;
}

Vec ModelManifold::project_tangent(const Vec& p, const Vec& v) const {
  if (flat()) return v;
  return v - p.dot(v) * p;
}

Vec ModelManifold::geodesic(const Vec& p, const Vec& q, double t) const {
  return exp_map(p, t * log_map(p, q));
}

double ModelManifold::shortest_closed_geodesic_length() const {
  if (flat()) {
    double r = radii_[0];
    for (double ri : radii_) r = std::min(r, ri);
    return kTwoPi * r;
  }
  return kTwoPi * radii_[0];
}

double ModelManifold::injectivity_radius() const {
  if (flat()) {
    double r = radii_[0];
    for (double ri : radii_) r = std::min(r, ri);
    return M_PI * r;
  }
  return M_PI * radii_[0];
}

Vec ModelManifold::random_point(std::mt19937_64& rng) const {
  if (flat()) {
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = u(rng);
    return normalized(x);
  }
  std::normal_distribution<double> g(0.0, 1.0);
  Vec x(3);
  do {
    for (int i = 0; i < 3; ++i) x[i] = g(rng);
  } while (x.norm() < 1e-6);
  return x / x.norm();
}

}  // namespace loopmorse
