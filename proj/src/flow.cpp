#include "loopmorse/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace loopmorse {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 35.0 / 384 - 5179.0 / 57600, E3 = 500.0 / 1113 - 7571.0 / 16695,
                 E4 = 125.0 / 192 - 393.0 / 640, E5 = -2187.0 / 6784 + 92097.0 / 339200,
                 E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;

struct DormandPrince {
  const std::function<Vec(const Vec&)>& rhs;
  // One attempted step from y with size h; fills out and the error estimate.
  void step(const Vec& y, double h, Vec& out, double& err_norm) const {
    Vec k1 = rhs(y);
    Vec k2 = rhs(y + h * (A21 * k1));
    Vec k3 = rhs(y + h * (A31 * k1 + A32 * k2));
    Vec k4 = rhs(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
    Vec k5 = rhs(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
    Vec k6 = rhs(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
    out = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    Vec k7 = rhs(out);
    Vec err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    err_norm = err.norm() / (1.0 + y.norm());
  }
};

// phi1(x) = (1 - e^-x)/x and phi2(x) = (e^-x - 1 + x)/x^2 for x >= 0.
double phi1(double x) {
  if (x < 1e-4) return 1.0 - x / 2 + x * x / 6;
  return (1.0 - std::exp(-x)) / x;
}
double phi2(double x) {
  if (x < 1e-4) return 0.5 - x / 6 + x * x / 24;
  return (std::exp(-x) - 1.0 + x) / (x * x);
}

// Exponential two-stage step in the diagonalized descent basis. State is the
// mode coefficient vector c with u = basis c; nl(u) supplies the full rhs.
struct ExpStepper {
  const StiffModes& modes;
  const std::function<Vec(const Vec&)>& rhs_flow;  // in flow coordinates

  Vec mode_nl(const Vec& u, const Vec& c) const {
    return modes.proj * rhs_flow(u) + modes.rates.cwiseProduct(c);
  }
  Vec step(const Vec& c, double h) const {
    int n = static_cast<int>(c.size());
    Vec u = modes.basis * c;
    Vec g1 = mode_nl(u, c);
    Vec a(n), e(n);
    for (int j = 0; j < n; ++j) {
      double x = modes.rates[j] * h;
      e[j] = std::exp(-x);
      a[j] = e[j] * c[j] + h * phi1(x) * g1[j];
    }
    Vec ua = modes.basis * a;
    Vec g2 = mode_nl(ua, a);
    Vec out(n);
    for (int j = 0; j < n; ++j) {
      double x = modes.rates[j] * h;
      out[j] = a[j] + h * phi2(x) * (g2[j] - g1[j]);
    }
    return out;
  }
};

}  // namespace

std::string to_string(FlowOutcome o) {
  switch (o) {
    case FlowOutcome::Converged: return "converged";
    case FlowOutcome::Escaped: return "escaped";
    case FlowOutcome::MaxTime: return "max-time";
  }
  return "?";
}

FlowResult flow_to_limit(const ConfigSpace& space, const Objective& obj, Vec start,
                         const FlowParams& params) {
  FlowResult res;
  res.endpoint = space.normalize(start);
  res.value = obj.value(res.endpoint);
  double last_trace = -1e300;
  auto record = [&](double t, const Vec& p) {
    if (params.observer) params.observer(t, p);
    if (params.record_trace && t - last_trace >= params.trace_stride) {
      res.trace.push_back(p);
      last_trace = t;
    }
  };
  record(0.0, res.endpoint);

  double h = params.h0;
  const double hmin = 1e-13;
  bool stiff = static_cast<bool>(obj.stiff);

  std::function<Vec(const Vec&)> rhs_flow;
  if (stiff)
    rhs_flow = [&](const Vec& u) {
      return Vec(space.flow_coords(obj.flow_rhs(space.from_flow_coords(u))));
    };
  else
    rhs_flow = [&](const Vec& p) { return obj.flow_rhs(p); };

  Vec state = stiff ? Vec(space.flow_coords(res.endpoint)) : res.endpoint;
  Vec mode_state;
  if (stiff) mode_state = obj.stiff->proj * state;

  while (true) {
    if (res.value < params.value_floor) {
      res.outcome = FlowOutcome::Escaped;
      return res;
    }
    Vec g = obj.chart_grad(res.endpoint);
    if (gradient_norm(space, g, res.endpoint) < params.grad_tol) {
      res.outcome = FlowOutcome::Converged;
      return res;
    }
    if (res.time >= params.max_time || res.steps >= params.max_steps) {
      res.outcome = FlowOutcome::MaxTime;
      return res;
    }

    bool accepted = false;
    while (!accepted) {
      if (h < hmin) throw std::runtime_error("descent flow step size underflow");
      // Clamp so the budget is hit exactly; fixed-horizon runs rely on this.
      double h_try = std::min(h, params.max_time - res.time);
      Vec cand_rep;
      double err = 0.0;
      Vec cand_state;
      if (stiff) {
        ExpStepper stepper{*obj.stiff, rhs_flow};
        Vec full = stepper.step(mode_state, h_try);
        Vec half = stepper.step(stepper.step(mode_state, h_try / 2), h_try / 2);
        err = (obj.stiff->basis * (full - half)).norm() / (1.0 + state.norm());
        cand_state = obj.stiff->basis * half;
        cand_rep = space.normalize(space.from_flow_coords(cand_state));
      } else {
        DormandPrince stepper{rhs_flow};
        Vec out;
        stepper.step(state, h_try, out, err);
        cand_state = out;
        cand_rep = space.normalize(out);
      }
      double cand_value = err <= params.atol ? obj.value(cand_rep) : 0.0;
      bool monotone =
          err <= params.atol &&
          cand_value <= res.value + 10 * params.atol + 1e-12 * (1.0 + std::abs(res.value));
      if (err <= params.atol && monotone) {
        accepted = true;
        res.time += h_try;
        if (params.max_time - res.time < 1e-12 * (1.0 + params.max_time))
          res.time = params.max_time;
        res.steps += 1;
        res.endpoint = cand_rep;
        res.value = cand_value;
        state = stiff ? Vec(space.flow_coords(res.endpoint)) : res.endpoint;
        if (stiff) mode_state = obj.stiff->proj * state;
        record(res.time, res.endpoint);
        double grow = err > 0 ? 0.9 * std::pow(params.atol / err, stiff ? 1.0 / 3 : 1.0 / 5)
                              : 5.0;
        h = h_try * std::min(5.0, std::max(0.2, grow));
      } else {
        h = h_try * (err > params.atol
                         ? std::min(0.5, 0.9 * std::pow(params.atol / std::max(err, 1e-300),
                                                        stiff ? 1.0 / 3 : 1.0 / 5))
                         : 0.5);
      }
    }
  }
}

}  // namespace loopmorse
