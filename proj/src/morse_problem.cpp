#include "loopmorse/morse_problem.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace loopmorse {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::string winding_str(const std::vector<int>& w) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << w[i];
  os << ")";
  return os.str();
}

// Discretized action on offset coordinates z relative to a base configuration:
// x_i = base_i + z_i with z periodic, so every segment (closing one included)
// is base_step_i + z_{i+1} - z_i exactly and the kinetic part is a fixed
// quadratic form in z.
struct RepAction {
  ModelManifold m;
  Lagrangian lagr;
  std::vector<Vec> base_pts, base_steps;
  int n, d;

  RepAction(ModelManifold mm, Lagrangian ll, std::vector<Vec> base)
      : m(std::move(mm)), lagr(std::move(ll)), base_pts(std::move(base)) {
    n = static_cast<int>(base_pts.size());
    d = m.dim();
    base_steps.resize(n);
    for (int i = 0; i < n; ++i) {
      Vec s = base_pts[(i + 1) % n] - base_pts[i];
      // The closing step must be the geodesic one: strip whole turns.
      for (int k = 0; k < d; ++k) s[k] -= kTwoPi * std::round(s[k] / kTwoPi);
      base_steps[i] = s;
    }
  }

  Vec seg(const Vec& z, int i) const {
    int j = (i + 1) % n;
    return base_steps[i] + z.segment(j * d, d) - z.segment(i * d, d);
  }

  double value(const Vec& z) const {
    double kin = 0.0, pot = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec s = seg(z, i);
      for (int k = 0; k < d; ++k) {
        if (std::abs(s[k]) >= M_PI) throw std::domain_error("loop segment left the chart");
        kin += m.radius(k) * m.radius(k) * s[k] * s[k];
      }
      pot += lagr.potential(static_cast<double>(i) / n, base_pts[i] + z.segment(i * d, d));
    }
    return lagr.kappa() * n * kin - pot / n;
  }

  // Plain partials with respect to every offset block.
  Vec full_grad(const Vec& z) const {
    Vec g(n * d);
    for (int i = 0; i < n; ++i) {
      Vec sprev = seg(z, (i + n - 1) % n);
      Vec scur = seg(z, i);
      Vec dv =
          lagr.potential_grad(static_cast<double>(i) / n, base_pts[i] + z.segment(i * d, d));
      for (int k = 0; k < d; ++k)
        g[i * d + k] =
            2.0 * lagr.kappa() * n * m.radius(k) * m.radius(k) * (sprev[k] - scur[k]) -
            dv[k] / n;
    }
    return g;
  }

  // Fixed quadratic kinetic form (plain partials, both indices).
  Mat kinetic_matrix() const {
    Mat kin = Mat::Zero(n * d, n * d);
    for (int i = 0; i < n; ++i) {
      int j = (i + 1) % n;
      for (int k = 0; k < d; ++k) {
        double c = 2.0 * lagr.kappa() * n * m.radius(k) * m.radius(k);
        kin(i * d + k, i * d + k) += c;
        kin(j * d + k, j * d + k) += c;
        kin(i * d + k, j * d + k) -= c;
        kin(j * d + k, i * d + k) -= c;
      }
    }
    return kin;
  }

  Mat full_hess(const Vec& z) const {
    Mat h = kinetic_matrix();
    double step = 1e-5;
    for (int i = 0; i < n; ++i) {
      // d^2 V by central differences of the analytic potential gradient.
      double t = static_cast<double>(i) / n;
      Vec q = base_pts[i] + z.segment(i * d, d);
      Mat dv2(d, d);
      for (int k = 0; k < d; ++k) {
        Vec qp = q, qm = q;
        qp[k] += step;
        qm[k] -= step;
        dv2.col(k) = (lagr.potential_grad(t, qp) - lagr.potential_grad(t, qm)) / (2 * step);
      }
      dv2 = 0.5 * (dv2 + dv2.transpose()).eval();
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) h(i * d + k, i * d + l) -= dv2(k, l) / n;
    }
    return h;
  }
};

// P^T M P for the figure-eight inclusion P: chart offsets -> full offsets
// (block n/2 slaved to block 0).
Mat reduce_quadratic(const Mat& full, int n, int d) {
  int half = n / 2, rd = (n - 1) * d;
  auto targets = [&](int a) {
    int block = a / d, k = a % d;
    int i = (block < half) ? block : block + 1;
    std::vector<int> t{i * d + k};
    if (block == 0) t.push_back(half * d + k);
    return t;
  };
  Mat out = Mat::Zero(rd, rd);
  for (int a = 0; a < rd; ++a) {
    auto ta = targets(a);
    for (int b = 0; b < rd; ++b) {
      auto tb = targets(b);
      double acc = 0.0;
      for (int ia : ta)
        for (int ib : tb) acc += full(ia, ib);
      out(a, b) = acc;
    }
  }
  return out;
}

std::shared_ptr<StiffModes> diagonalize_descent(const Mat& kinetic, const Vec& metric) {
  auto modes = std::make_shared<StiffModes>();
  Mat g = Mat(metric.asDiagonal());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(kinetic, g);
  if (es.info() != Eigen::Success) throw std::runtime_error("descent mode factorization failed");
  modes->basis = es.eigenvectors();
  modes->rates = es.eigenvalues().cwiseMax(0.0);
  modes->proj = modes->basis.transpose() * g;
  return modes;
}

}  // namespace

FiniteDimSpace::FiniteDimSpace(ModelManifold m) : manifold_(std::move(m)) {}

std::string FiniteDimSpace::description() const { return to_string(manifold_.kind()); }

Vec FiniteDimSpace::chart_point(const Vec& p, const Vec& u) const {
  if (manifold_.flat()) return manifold_.normalized(p + u);
  auto frame = manifold_.tangent_frame(p);
  Vec v = Vec::Zero(rep_dim());
  for (int k = 0; k < dim(); ++k) v += u[k] * frame[k];
  return manifold_.exp_map(p, v);
}

Vec FiniteDimSpace::metric_diag(const Vec&) const {
  Vec g(dim());
  if (manifold_.flat())
    for (int k = 0; k < dim(); ++k) g[k] = manifold_.radius(k) * manifold_.radius(k);
  else
    g.setOnes();  // tangent frame is metric-orthonormal
  return g;
}

PointSpace::PointSpace(Vec point, std::string label)
    : point_(std::move(point)), label_(std::move(label)) {}

LoopClassSpace::LoopClassSpace(ModelManifold m, std::vector<int> winding, int n)
    : manifold_(std::move(m)), winding_(std::move(winding)), n_(n) {
  if (!manifold_.flat()) throw std::invalid_argument("loop sectors require a flat model");
  if (static_cast<int>(winding_.size()) != manifold_.dim())
    throw std::invalid_argument("winding dimension mismatch");
  if (!power_of_two(n_) || n_ < 8)
    throw std::invalid_argument("loop discretization must be a power of two >= 8");
}

std::string LoopClassSpace::description() const {
  return "loops " + winding_str(winding_) + " n=" + std::to_string(n_);
}

Vec LoopClassSpace::normalize(const Vec& p) const {
  int d = manifold_.dim();
  Vec out = p;
  for (int k = 0; k < d; ++k) {
    double shift = kTwoPi * std::floor(p[k] / kTwoPi);
    for (int i = 0; i < n_; ++i) out[i * d + k] -= shift;
  }
  return out;
}

Vec LoopClassSpace::metric_diag(const Vec&) const {
  int d = manifold_.dim();
  Vec g(n_ * d);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < d; ++k) g[i * d + k] = manifold_.radius(k) * manifold_.radius(k) / n_;
  return g;
}

double LoopClassSpace::distance(const Vec& p, const Vec& q) const {
  int d = manifold_.dim();
  double acc = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < d; ++k) {
      double delta = wrap_angle_signed(p[i * d + k] - q[i * d + k]);
      acc += manifold_.radius(k) * manifold_.radius(k) * delta * delta;
    }
  return std::sqrt(acc / n_);
}

Vec LoopClassSpace::random_point(std::mt19937_64& rng) const {
  int d = manifold_.dim();
  std::uniform_real_distribution<double> shift(0.0, kTwoPi);
  std::normal_distribution<double> noise(0.0, 1.0);
  Vec z(n_ * d);
  for (int k = 0; k < d; ++k) {
    double s = shift(rng);
    double a[3], b[3];
    for (int h = 0; h < 3; ++h) {
      a[h] = 0.1 * noise(rng) / (h + 1);
      b[h] = 0.1 * noise(rng) / (h + 1);
    }
    for (int i = 0; i < n_; ++i) {
      double t = static_cast<double>(i) / n_;
      double v = s;
      for (int h = 1; h <= 3; ++h)
        v += a[h - 1] * std::cos(kTwoPi * h * t) + b[h - 1] * std::sin(kTwoPi * h * t);
      z[i * d + k] = v;
    }
  }
  return z;
}

DiscretizedLoop LoopClassSpace::to_loop(const Vec& p) const {
  int d = manifold_.dim();
  Vec base = base_rep();
  std::vector<Vec> pts(n_);
  for (int i = 0; i < n_; ++i)
    pts[i] = manifold_.normalized(base.segment(i * d, d) + p.segment(i * d, d));
  return {manifold_, std::move(pts)};
}

Vec LoopClassSpace::from_loop(const DiscretizedLoop& loop) const {
  if (loop.n() != n_) throw std::invalid_argument("loop resolution mismatch");
  int d = manifold_.dim();
  Vec base = base_rep();
  Vec z(n_ * d);
  Vec x = manifold_.normalized(loop.points[0]);
  z.segment(0, d) = x - base.segment(0, d);
  for (int i = 1; i < n_; ++i) {
    x = x + manifold_.log_map(loop.points[i - 1], loop.points[i]);
    z.segment(i * d, d) = x - base.segment(i * d, d);
  }
  Vec closing = x + manifold_.log_map(loop.points[n_ - 1], loop.points[0]);
  for (int k = 0; k < d; ++k)
    if (std::abs(closing[k] - manifold_.normalized(loop.points[0])[k] - kTwoPi * winding_[k]) >
        1e-6)
      throw std::invalid_argument("loop does not belong to winding class " +
                                  winding_str(winding_));
  return z;
}

Vec LoopClassSpace::base_rep() const {
  int d = manifold_.dim();
  Vec base(n_ * d);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < d; ++k)
      base[i * d + k] = kTwoPi * winding_[k] * static_cast<double>(i) / n_;
  return base;
}

ThetaClassSpace::ThetaClassSpace(ModelManifold m, std::vector<int> w1, std::vector<int> w2,
                                 int n)
    : manifold_(std::move(m)), w1_(std::move(w1)), w2_(std::move(w2)), n_(n) {
  if (!manifold_.flat()) throw std::invalid_argument("loop sectors require a flat model");
  if (static_cast<int>(w1_.size()) != manifold_.dim() ||
      static_cast<int>(w2_.size()) != manifold_.dim())
    throw std::invalid_argument("winding dimension mismatch");
  if (!power_of_two(n_) || n_ < 8)
    throw std::invalid_argument("loop discretization must be a power of two >= 8");
}

std::string ThetaClassSpace::description() const {
  return "figure-eights " + winding_str(w1_) + "#" + winding_str(w2_) +
         " n=" + std::to_string(n_);
}

Vec ThetaClassSpace::normalize(const Vec& p) const {
  int d = manifold_.dim();
  Vec out = p;
  for (int k = 0; k < d; ++k) {
    double shift = kTwoPi * std::floor(p[k] / kTwoPi);
    for (int i = 0; i < n_; ++i) out[i * d + k] -= shift;
  }
  return out;
}

Vec ThetaClassSpace::chart_point(const Vec& p, const Vec& u) const {
  return p + expand_offset(u);
}

Vec ThetaClassSpace::metric_diag(const Vec&) const {
  int d = manifold_.dim();
  Vec g((n_ - 1) * d);
  for (int j = 0; j < n_ - 1; ++j)
    for (int k = 0; k < d; ++k) {
      double w = (j == 0) ? 2.0 : 1.0;  // block 0 carries the slaved midpoint too
      g[j * d + k] = w * manifold_.radius(k) * manifold_.radius(k) / n_;
    }
  return g;
}

double ThetaClassSpace::distance(const Vec& p, const Vec& q) const {
  int d = manifold_.dim();
  double acc = 0.0;
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < d; ++k) {
      double delta = wrap_angle_signed(p[i * d + k] - q[i * d + k]);
      acc += manifold_.radius(k) * manifold_.radius(k) * delta * delta;
    }
  return std::sqrt(acc / n_);
}

Vec ThetaClassSpace::random_point(std::mt19937_64& rng) const {
  int d = manifold_.dim();
  std::uniform_real_distribution<double> shift(0.0, kTwoPi);
  std::normal_distribution<double> noise(0.0, 1.0);
  Vec u(dim());
  for (int j = 0; j < n_ - 1; ++j)
    for (int k = 0; k < d; ++k) u[j * d + k] = 0.05 * noise(rng);
  for (int k = 0; k < d; ++k) {
    double s = shift(rng);
    for (int j = 0; j < n_ - 1; ++j) u[j * d + k] += s;
  }
  return chart_point(base_rep(), u);
}

DiscretizedLoop ThetaClassSpace::to_loop(const Vec& p) const {
  int d = manifold_.dim();
  Vec base = base_rep();
  std::vector<Vec> pts(n_);
  for (int i = 0; i < n_; ++i)
    pts[i] = manifold_.normalized(base.segment(i * d, d) + p.segment(i * d, d));
  return {manifold_, std::move(pts)};
}

Vec ThetaClassSpace::from_loop(const DiscretizedLoop& loop, double fig8_tol) const {
  if (loop.n() != n_) throw std::invalid_argument("loop resolution mismatch");
  if (theta_defect(loop, 0.5).norm() >= fig8_tol)
    throw std::invalid_argument("loop is not a figure-eight within tolerance");
  int d = manifold_.dim();
  int half = n_ / 2;
  Vec base = base_rep();
  Vec z(n_ * d);
  Vec x = manifold_.normalized(loop.points[0]);
  z.segment(0, d) = x - base.segment(0, d);
  for (int i = 1; i < n_; ++i) {
    x = x + manifold_.log_map(loop.points[i - 1], loop.points[i]);
    z.segment(i * d, d) = x - base.segment(i * d, d);
  }
  for (int k = 0; k < d; ++k)
    if (std::abs(z[half * d + k] - z[k]) > 1e-5)
      throw std::invalid_argument("figure-eight halves do not match windings " +
                                  winding_str(w1_) + "#" + winding_str(w2_));
  // Metric projection onto the slaved set: average the two tied offsets.
  for (int k = 0; k < d; ++k) {
    double avg = 0.5 * (z[k] + z[half * d + k]);
    z[k] = avg;
    z[half * d + k] = avg;
  }
  return z;
}

Vec ThetaClassSpace::base_rep() const {
  int d = manifold_.dim();
  int half = n_ / 2;
  Vec base(n_ * d);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < d; ++k) {
      if (i <= half)
        base[i * d + k] = kTwoPi * w1_[k] * (2.0 * i / n_);
      else
        base[i * d + k] = kTwoPi * w1_[k] + kTwoPi * w2_[k] * (2.0 * (i - half) / n_);
    }
  return base;
}

Vec ThetaClassSpace::flow_coords(const Vec& p) const {
  int d = manifold_.dim();
  int half = n_ / 2;
  Vec u((n_ - 1) * d);
  for (int j = 0; j < n_ - 1; ++j) {
    int i = (j < half) ? j : j + 1;
    u.segment(j * d, d) = p.segment(i * d, d);
  }
  return u;
}

Vec ThetaClassSpace::expand_offset(const Vec& u) const {
  int d = manifold_.dim();
  int half = n_ / 2;
  Vec z(n_ * d);
  for (int j = 0; j < n_ - 1; ++j) {
    int i = (j < half) ? j : j + 1;
    z.segment(i * d, d) = u.segment(j * d, d);
  }
  z.segment(half * d, d) = u.segment(0, d);
  return z;
}

Vec ThetaClassSpace::reduce_gradient(const Vec& full_grad) const {
  int d = manifold_.dim();
  int half = n_ / 2;
  Vec u((n_ - 1) * d);
  for (int j = 0; j < n_ - 1; ++j) {
    int i = (j < half) ? j : j + 1;
    u.segment(j * d, d) = full_grad.segment(i * d, d);
  }
  u.segment(0, d) += full_grad.segment(half * d, d);
  return u;
}

double gradient_norm(const ConfigSpace& space, const Vec& chart_grad, const Vec& p) {
  Vec g = space.metric_diag(p);
  double acc = 0.0;
  for (int a = 0; a < g.size(); ++a) acc += chart_grad[a] * chart_grad[a] / g[a];
  return std::sqrt(acc);
}

Mat fd_chart_hess(const ConfigSpace& space, const Objective& obj, const Vec& p, double h) {
  int d = space.dim();
  Mat out(d, d);
  for (int a = 0; a < d; ++a) {
    Vec e = Vec::Zero(d);
    e[a] = h;
    Vec gp = obj.chart_grad(space.chart_point(p, e));
    e[a] = -h;
    Vec gm = obj.chart_grad(space.chart_point(p, e));
    out.col(a) = (gp - gm) / (2 * h);
  }
  return 0.5 * (out + out.transpose());
}

Objective scalar_objective(std::shared_ptr<const FiniteDimSpace> space, std::string name,
                           std::function<double(const Vec&)> f,
                           std::function<Vec(const Vec&)> grad) {
  Objective o;
  o.name = std::move(name);
  o.value = f;
  if (space->manifold().flat()) {
    o.chart_grad = grad;
    o.flow_rhs = [space, grad](const Vec& p) {
      const ModelManifold& mm = space->manifold();
      Vec g = grad(p);
      for (int k = 0; k < mm.dim(); ++k) g[k] /= -(mm.radius(k) * mm.radius(k));
      return g;
    };
  } else {
    o.chart_grad = [space, grad](const Vec& p) {
      auto frame = space->manifold().tangent_frame(p);
      Vec g = grad(p);
      Vec out(space->dim());
      for (int k = 0; k < space->dim(); ++k) out[k] = g.dot(frame[k]);
      return out;
    };
    o.flow_rhs = [space, grad](const Vec& p) {
      const ModelManifold& mm = space->manifold();
      Vec v = mm.project_tangent(p, grad(p));
      return Vec(-v / (mm.radius() * mm.radius()));
    };
    // Frame-based Hessian: differentiate the gradient pairing against the
    // center frame transported by tangent projection; the transport ambiguity
    // is O(h |grad|), immaterial at and near critical points where this runs.
    o.chart_hess = [space, grad](const Vec& p) {
      const ModelManifold& mm = space->manifold();
      auto frame = mm.tangent_frame(p);
      int d = space->dim();
      double h = 1e-5;
      Mat out(d, d);
      for (int b = 0; b < d; ++b) {
        Vec up = mm.exp_map(p, h * frame[b]);
        Vec dn = mm.exp_map(p, -h * frame[b]);
        Vec gp = grad(up), gm = grad(dn);
        for (int a = 0; a < d; ++a)
          out(a, b) =
              (gp.dot(mm.project_tangent(up, frame[a])) -
               gm.dot(mm.project_tangent(dn, frame[a]))) /
              (2 * h);
      }
      return Mat(0.5 * (out + out.transpose()));
    };
  }
  return o;
}

Objective point_objective(std::shared_ptr<const PointSpace> space, std::string name,
                          double value) {
  Objective o;
  o.name = std::move(name);
  int rd = space->rep_dim();
  o.value = [value](const Vec&) { return value; };
  o.chart_grad = [](const Vec&) { return Vec(0); };
  o.chart_hess = [](const Vec&) { return Mat(0, 0); };
  o.flow_rhs = [rd](const Vec&) { return Vec(Vec::Zero(rd)); };
  return o;
}

Objective loop_action_objective(std::shared_ptr<const LoopClassSpace> space, Lagrangian lagr) {
  const ModelManifold& m = space->manifold();
  int n = space->loop_points(), d = m.dim();
  Vec base = space->base_rep();
  std::vector<Vec> base_pts(n);
  for (int i = 0; i < n; ++i) base_pts[i] = base.segment(i * d, d);
  auto ra = std::make_shared<RepAction>(m, std::move(lagr), std::move(base_pts));

  Objective o;
  o.name = "action[" + space->description() + "]";
  o.value = [ra](const Vec& z) { return ra->value(z); };
  o.chart_grad = [ra](const Vec& z) { return ra->full_grad(z); };
  o.chart_hess = [ra](const Vec& z) { return ra->full_hess(z); };
  Vec metric_inv = space->metric_diag(base).cwiseInverse();
  o.flow_rhs = [ra, metric_inv](const Vec& z) {
    return Vec(-metric_inv.cwiseProduct(ra->full_grad(z)));
  };
  o.stiff = diagonalize_descent(ra->kinetic_matrix(), space->metric_diag(base));
  return o;
}

Objective theta_action_objective(std::shared_ptr<const ThetaClassSpace> space,
                                 Lagrangian lagr) {
  const ModelManifold& m = space->manifold();
  int n = space->loop_points(), d = m.dim();
  Vec base = space->base_rep();
  std::vector<Vec> base_pts(n);
  for (int i = 0; i < n; ++i) base_pts[i] = base.segment(i * d, d);
  auto ra = std::make_shared<RepAction>(m, std::move(lagr), std::move(base_pts));

  Objective o;
  o.name = "action[" + space->description() + "]";
  o.value = [ra](const Vec& z) { return ra->value(z); };
  o.chart_grad = [ra, space](const Vec& z) {
    return space->reduce_gradient(ra->full_grad(z));
  };
  o.chart_hess = [ra, space, n, d](const Vec& z) {
    return reduce_quadratic(ra->full_hess(z), n, d);
  };
  Vec metric_inv = space->metric_diag(base).cwiseInverse();
  o.flow_rhs = [ra, space, metric_inv](const Vec& z) {
    Vec u = -metric_inv.cwiseProduct(space->reduce_gradient(ra->full_grad(z)));
    return space->expand_offset(u);
  };
  o.stiff = diagonalize_descent(reduce_quadratic(ra->kinetic_matrix(), n, d),
                                space->metric_diag(base));
  return o;
}

}  // namespace loopmorse
