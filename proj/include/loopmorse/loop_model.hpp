#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "loopmorse/manifold.hpp"

namespace loopmorse {

// Closed polygon of N geodesic segments; points[i] sits at time i/N and the
// list is cyclic (index N wraps to 0).
struct DiscretizedLoop {
  ModelManifold manifold;
  std::vector<Vec> points;

  int n() const { return static_cast<int>(points.size()); }
  double time(int i) const { return static_cast<double>(i) / n(); }
  const Vec& at(int i) const { return points[((i % n()) + n()) % n()]; }

  // Checks closed-polygon health: every segment below the injectivity radius.
  bool segments_ok() const;
};

DiscretizedLoop constant_loop(const ModelManifold& m, const Vec& p, int n);
// Straight (geodesic) representative of a winding class on a flat model.
DiscretizedLoop straight_loop(const ModelManifold& m, const Vec& base,
                              const std::vector<int>& winding, int n);

// Lagrangian kappa * |v|^2 - V(t, q) with V smooth, positive, 1-periodic in t.
class Lagrangian {
 public:
  using Potential = std::function<double(double, const Vec&)>;
  using PotentialGrad = std::function<Vec(double, const Vec&)>;

  static Lagrangian pure_kinetic(double kappa = 1.0);
  static Lagrangian with_potential(Potential v, PotentialGrad dv, double sup_norm,
                                   double kappa = 1.0, std::string name = "custom");

  double kappa() const { return kappa_; }
  double sup_norm() const { return sup_norm_; }
  const std::string& name() const { return name_; }
  double potential(double t, const Vec& q) const { return v_ ? v_(t, q) : 0.0; }
  Vec potential_grad(double t, const Vec& q) const;
  // Pointwise Lagrangian value kappa |v|^2_g - V(t, q).
  double value(const ModelManifold& m, double t, const Vec& q, const Vec& v) const;

 private:
  Lagrangian(double kappa, Potential v, PotentialGrad dv, double sup_norm, std::string name);

  double kappa_;
  Potential v_;
  PotentialGrad dv_;
  double sup_norm_;
  std::string name_;
};

// Desk potential family on flat models:
//   V(t, q) = delta * (1 + coupling * w(t) * sum_k cos q_k)
//   w(t)    = 1 + 2 * osc * rho(t) * sum_{k=1..3} cos(2 pi k t + phase_k)
// rho is a bump window vanishing to all orders at t = 0, 1, so any two family
// members agree at the seam with all time derivatives (concatenation-safe),
// while the interior time dependence breaks the phase symmetry of closed
// geodesics that would otherwise appear in degenerate circles.
double time_window(double t);
Lagrangian windowed_cosine_lagrangian(const ModelManifold& m, double delta, double coupling,
                                      double osc, const std::array<double, 3>& phases,
                                      double kappa = 1.0, std::string name = "windowed-cosine");

// Trapezoidal action sum_i [kappa N d^2(x_i, x_{i+1}) - (1/N) V(t_i, x_i)].
double action(const DiscretizedLoop& loop, const Lagrangian& lagr);

// Piecewise rescaling 2 L1(2t, q, v/2) on [0,1/2], 2 L2(2t-1, q, v/2) on
// [1/2,1]; checks the seam L1(1,.) = L2(0,.) on sampled points.
Lagrangian concat_lagrangian(const Lagrangian& l1, const Lagrangian& l2,
                             const ModelManifold& m, double seam_tol = 1e-8);

// Piecewise-linear reparametrization with theta(1/2) = s.
double theta_reparam(double s, double t);
// C^2 corner blend of theta_reparam with half-width w * s * (1 - s) around
// t = 1/2; agrees with theta_reparam as s approaches 0 or 1.
double theta_reparam_smooth(double s, double t, double width);

// Geodesic interpolation of the loop at time s in [0, 1].
Vec ev(const DiscretizedLoop& loop, double s);

DiscretizedLoop gamma(const DiscretizedLoop& loop, double s);
DiscretizedLoop gamma_smooth(const DiscretizedLoop& loop, double s, double width);

// Tangent-frame coordinates at ev(loop, 0) of log(ev(loop, 0) -> ev(loop, s));
// zero iff the loop lies in Theta_s.
Vec theta_defect(const DiscretizedLoop& loop, double s);

// Concatenation traversing a on [0,1/2] and b on [1/2,1], downsampling each
// input to its even-index points; requires a(0) = b(0) within tol.
DiscretizedLoop concat_loops(const DiscretizedLoop& a, const DiscretizedLoop& b,
                             double tol = 1e-9);
// Cutting of a figure-eight loop (|theta_defect(., 1/2)| < fig8_tol) into two
// halves, each resampled back to N points via geodesic midpoints.
std::pair<DiscretizedLoop, DiscretizedLoop> cut(const DiscretizedLoop& loop, double fig8_tol);
// Same cut without resampling: each half keeps its N/2 points, making the
// concatenated-Lagrangian action additivity exact.
std::pair<DiscretizedLoop, DiscretizedLoop> cut_raw(const DiscretizedLoop& loop,
                                                    double fig8_tol);

// Gradient of action(., lagr) in the discrete L^2 loop metric
// <u, v> = (1/N) sum_i g(u_i, v_i); vanishes exactly at discrete
// Euler-Lagrange solutions.
std::vector<Vec> loop_gradient(const DiscretizedLoop& loop, const Lagrangian& lagr);

// L^2 loop distance sqrt((1/N) sum_i d^2(a_i, b_i)).
double loop_distance(const DiscretizedLoop& a, const DiscretizedLoop& b);

// Integer winding vector of a loop on a flat model.
std::vector<int> winding_vector(const DiscretizedLoop& loop);

std::string loop_to_csv(const DiscretizedLoop& loop);
DiscretizedLoop loop_from_csv(const ModelManifold& m, const std::string& csv);

}  // namespace loopmorse
