#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "loopmorse/loop_model.hpp"
#include "loopmorse/manifold.hpp"

namespace loopmorse {

enum class SpaceKind { Finite, Point, LoopClass, ThetaClass };

// A configuration space with one chart convention per kind:
//  - Finite/flat: chart = rep = angle coordinates, chart_point wraps;
//  - Finite/sphere: rep = embedded R^3, chart = tangent frame at the center;
//  - LoopClass: rep = N*d unwrapped point coordinates, chart = rep offsets;
//  - ThetaClass: same but point N/2 is slaved to point 0, chart skips it.
// metric_diag is the Riemannian inner product in the chart basis (always
// diagonal for these charts); normalize produces the canonical representative.
class ConfigSpace {
 public:
  virtual ~ConfigSpace() = default;
  virtual SpaceKind kind() const = 0;
  virtual std::string description() const = 0;
  virtual int dim() const = 0;
  virtual int rep_dim() const = 0;
  virtual Vec normalize(const Vec& p) const = 0;
  virtual Vec chart_point(const Vec& p, const Vec& u) const = 0;
  virtual Vec metric_diag(const Vec& p) const = 0;
  virtual double distance(const Vec& p, const Vec& q) const = 0;
  virtual Vec random_point(std::mt19937_64& rng) const = 0;
  // Coordinates the descent flow integrates in: identity except on slaved
  // charts, where the rep collapses to the chart.
  virtual Vec flow_coords(const Vec& p) const { return p; }
  virtual Vec from_flow_coords(const Vec& u) const { return u; }
};

class FiniteDimSpace : public ConfigSpace {
 public:
  explicit FiniteDimSpace(ModelManifold m);
  SpaceKind kind() const override { return SpaceKind::Finite; }
  std::string description() const override;
  int dim() const override { return manifold_.dim(); }
  int rep_dim() const override { return manifold_.rep_dim(); }
  Vec normalize(const Vec& p) const override { return manifold_.normalized(p); }
  Vec chart_point(const Vec& p, const Vec& u) const override;
  Vec metric_diag(const Vec& p) const override;
  double distance(const Vec& p, const Vec& q) const override {
    return manifold_.distance(p, q);
  }
  Vec random_point(std::mt19937_64& rng) const override { return manifold_.random_point(rng); }
  const ModelManifold& manifold() const { return manifold_; }

 private:
  ModelManifold manifold_;
};

// Single-point space (zero-dimensional submanifold target).
class PointSpace : public ConfigSpace {
 public:
  explicit PointSpace(Vec point, std::string label = "point");
  SpaceKind kind() const override { return SpaceKind::Point; }
  std::string description() const override { return label_; }
  int dim() const override { return 0; }
  int rep_dim() const override { return static_cast<int>(point_.size()); }
  Vec normalize(const Vec&) const override { return point_; }
  Vec chart_point(const Vec&, const Vec&) const override { return point_; }
  Vec metric_diag(const Vec&) const override { return Vec(0); }
  double distance(const Vec&, const Vec&) const override { return 0.0; }
  Vec random_point(std::mt19937_64&) const override { return point_; }
  const Vec& point() const { return point_; }

 private:
  Vec point_;
  std::string label_;
};

// Discretized free-loop-space sector of a fixed winding class on a flat model.
// Representation: the N loop points flattened, kept unwrapped so that
// neighbor differences are plain coordinate differences; normalize shifts the
// whole loop by one lattice vector and re-unwraps, preserving the winding.
class LoopClassSpace : public ConfigSpace {
 public:
  LoopClassSpace(ModelManifold m, std::vector<int> winding, int n);
  SpaceKind kind() const override { return SpaceKind::LoopClass; }
  std::string description() const override;
  int dim() const override { return n_ * manifold_.dim(); }
  int rep_dim() const override { return n_ * manifold_.dim(); }
  Vec normalize(const Vec& p) const override;
  Vec chart_point(const Vec& p, const Vec& u) const override { return p + u; }
  Vec metric_diag(const Vec& p) const override;
  double distance(const Vec& p, const Vec& q) const override;
  Vec random_point(std::mt19937_64& rng) const override;

  const ModelManifold& manifold() const { return manifold_; }
  const std::vector<int>& winding() const { return winding_; }
  int loop_points() const { return n_; }
  DiscretizedLoop to_loop(const Vec& p) const;
  Vec from_loop(const DiscretizedLoop& loop) const;
  Vec base_rep() const;  // straight loop of the class, basepoint at the origin

 private:
  ModelManifold manifold_;
  std::vector<int> winding_;
  int n_;
};

// Figure-eight sector: loops whose midpoint coincides with the basepoint,
// carrying winding w1 on the first half and w2 on the second. The chart drops
// the slaved point N/2 (its offset equals the basepoint offset).
class ThetaClassSpace : public ConfigSpace {
 public:
  ThetaClassSpace(ModelManifold m, std::vector<int> w1, std::vector<int> w2, int n);
  SpaceKind kind() const override { return SpaceKind::ThetaClass; }
  std::string description() const override;
  int dim() const override { return (n_ - 1) * manifold_.dim(); }
  int rep_dim() const override { return n_ * manifold_.dim(); }
  Vec normalize(const Vec& p) const override;
  Vec chart_point(const Vec& p, const Vec& u) const override;
  Vec metric_diag(const Vec& p) const override;
  double distance(const Vec& p, const Vec& q) const override;
  Vec random_point(std::mt19937_64& rng) const override;
  Vec flow_coords(const Vec& p) const override;
  Vec from_flow_coords(const Vec& u) const override { return expand_offset(u); }

  const ModelManifold& manifold() const { return manifold_; }
  const std::vector<int>& winding_first() const { return w1_; }
  const std::vector<int>& winding_second() const { return w2_; }
  int loop_points() const { return n_; }
  DiscretizedLoop to_loop(const Vec& p) const;
  Vec from_loop(const DiscretizedLoop& loop, double fig8_tol) const;
  Vec base_rep() const;
  // Chart <-> full-offset conversions (the full offset repeats block 0 at N/2).
  Vec expand_offset(const Vec& u) const;
  Vec reduce_gradient(const Vec& full_grad) const;

 private:
  ModelManifold manifold_;
  std::vector<int> w1_, w2_;
  int n_;
};

// Diagonalized linear part of the descent flow z' = A z + nonlinear(z):
// columns of basis are metric-orthonormal eigenvectors, A basis_j = -rates_j.
struct StiffModes {
  Mat basis;  // dim x dim
  Mat proj;   // basis^{-1} = basis^T G
  Vec rates;  // decay rates, all >= 0 for descent of a convex kinetic part
};

// Smooth function on a configuration space with enough structure to run
// descent flows and second-order classification.
struct Objective {
  std::string name;
  std::function<double(const Vec&)> value;            // on reps
  std::function<Vec(const Vec&)> chart_grad;          // partials in the chart at p
  std::function<Mat(const Vec&)> chart_hess;          // optional, FD fallback otherwise
  std::function<Vec(const Vec&)> flow_rhs;            // rep-space velocity of descent
  std::shared_ptr<const StiffModes> stiff;            // optional exact linear part

  bool has_hess() const { return static_cast<bool>(chart_hess); }
};

// Metric norm of the differential at p: sqrt(sum grad_a^2 / g_a).
double gradient_norm(const ConfigSpace& space, const Vec& chart_grad, const Vec& p);

// Chart Hessian by central differences of chart_grad along chart directions.
Mat fd_chart_hess(const ConfigSpace& space, const Objective& obj, const Vec& p,
                  double h = 1e-5);

// Scalar field on a finite-dimensional model manifold. grad returns ambient
// partials (flat: angle partials; sphere: unconstrained R^3 partials).
Objective scalar_objective(std::shared_ptr<const FiniteDimSpace> space, std::string name,
                           std::function<double(const Vec&)> f,
                           std::function<Vec(const Vec&)> grad);

// Constant objective on a point space.
Objective point_objective(std::shared_ptr<const PointSpace> space, std::string name,
                          double value);

// Discretized action functional on a loop sector.
Objective loop_action_objective(std::shared_ptr<const LoopClassSpace> space, Lagrangian lagr);
Objective theta_action_objective(std::shared_ptr<const ThetaClassSpace> space, Lagrangian lagr);

}  // namespace loopmorse
