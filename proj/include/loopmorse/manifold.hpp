#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace loopmorse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ManifoldKind { Circle, FlatTorus, RoundSphere };

std::string to_string(ManifoldKind k);
ManifoldKind manifold_kind_from_string(const std::string& s);

// Wraps an angle into [0, 2*pi).
double wrap_angle(double theta);
// Signed representative of theta in (-pi, pi].
double wrap_angle_signed(double theta);

// Flat circle, flat torus, and round sphere with exact geodesics.
//
// Flat models use one global periodic chart with coordinates in [0, 2*pi)^d
// and metric sum_i r_i^2 dtheta_i^2; tangent vectors live in chart
// coordinates. The sphere is stored extrinsically as unit 3-vectors with
// tangent vectors in the ambient orthogonal complement and metric R^2 times
// the unit round metric, so projection-based integrators apply directly.
class ModelManifold {
 public:
  static ModelManifold circle(double radius = 1.0);
  static ModelManifold flat_torus(std::vector<double> radii);
  static ModelManifold round_sphere(double radius = 1.0);

  ManifoldKind kind() const { return kind_; }
  bool flat() const { return kind_ != ManifoldKind::RoundSphere; }
  int dim() const;      // intrinsic dimension
  int rep_dim() const;  // coordinate representation dimension
  double radius(int axis = 0) const { return radii_.at(axis); }
  const std::vector<double>& radii() const { return radii_; }

  // Wraps flat coordinates into the fundamental domain; renormalizes sphere
  // points. Throws if a sphere point is too far from the sphere to trust.
  Vec normalized(Vec x) const;
  bool is_valid(const Vec& x, double tol = 1e-12) const;

  // Geodesic endpoint at time 1 starting from p with initial velocity v.
  Vec exp_map(const Vec& p, const Vec& v) const;
  // Inverse of exp_map for q within the injectivity radius of p. At the cut
  // locus a deterministic representative is chosen.
  Vec log_map(const Vec& p, const Vec& q) const;

  double distance(const Vec& p, const Vec& q) const;
  double distance_sq(const Vec& p, const Vec& q) const;

  double metric_inner(const Vec& p, const Vec& u, const Vec& v) const;
  double metric_norm(const Vec& p, const Vec& v) const;

  // Orthonormal tangent frame at p (dim() vectors, unit metric norm).
  std::vector<Vec> tangent_frame(const Vec& p) const;

  // Projects an ambient displacement onto the tangent space at p. Identity
  // for flat models.
  Vec project_tangent(const Vec& p, const Vec& v) const;

  // Geodesic point at parameter t in [0, 1] from p toward q.
  Vec geodesic(const Vec& p, const Vec& q, double t) const;

  double shortest_closed_geodesic_length() const;
  double injectivity_radius() const;

  Vec random_point(std::mt19937_64& rng) const;

  bool operator==(const ModelManifold& o) const {
    return kind_ == o.kind_ && radii_ == o.radii_;
  }

 private:
  ModelManifold(ManifoldKind kind, std::vector<double> radii);

  ManifoldKind kind_;
  std::vector<double> radii_;
};

}  // namespace loopmorse
