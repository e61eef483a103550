#pragma once

#include <functional>

#include "loopmorse/morse_problem.hpp"

namespace loopmorse {

enum class FlowOutcome { Converged, Escaped, MaxTime };

std::string to_string(FlowOutcome o);

struct FlowParams {
  double grad_tol = 1e-6;      // metric gradient norm declaring convergence
  double value_floor = -1e300; // classify Escaped once the value drops below
  double max_time = 1e5;
  double h0 = 1e-3;
  double atol = 1e-9;          // local error tolerance per step
  int max_steps = 5000000;
  bool record_trace = false;
  double trace_stride = 0.0;
  std::function<void(double, const Vec&)> observer;  // called on accepted steps
};

struct FlowResult {
  FlowOutcome outcome;
  Vec endpoint;
  double value = 0.0;
  double time = 0.0;
  long steps = 0;
  std::vector<Vec> trace;
};

// Integrates the negative-gradient flow of obj from start until the gradient
// norm drops below grad_tol (Converged), the value crosses value_floor
// (Escaped: descent is monotone, so the region below the floor is absorbing),
// or the budget runs out (MaxTime). Uses an adaptive Dormand-Prince scheme, or
// an exponential two-stage scheme in the diagonalized basis when the objective
// carries its stiff kinetic part. The value is asserted non-increasing along
// accepted steps.
FlowResult flow_to_limit(const ConfigSpace& space, const Objective& obj, Vec start,
                         const FlowParams& params);

}  // namespace loopmorse
