#pragma once

// Central finite-difference verification of the backward rules, used by the
// `gradcheck` subcommand.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smile/tensor.hpp"

namespace smile {

struct GradcheckOptions {
  double step = 1e-4;
  // Fourth-order stencil; keeps round-off of O(10) losses below the tolerance
  // on gradients as small as 1e-6.
  bool five_point = true;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  // Coordinates probed per parameter tensor of the recognizer cases, drawn
  // without replacement; 0 probes all (several minutes on one core).
  std::size_t coords_per_tensor = 64;
};

struct GradcheckCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

// |a - b| / max(|a|, |b|, 1e-6).
double relative_error(double analytic, double numeric);

// Compares tape gradients of `loss()` w.r.t. `leaves` against central
// differences. `coords` limits the probed coordinates per leaf (0 = all).
GradcheckCase check_gradients(const std::string& name, std::vector<Tensor> leaves,
                              const std::function<Tensor()>& loss, const GradcheckOptions& opts,
                              std::size_t coords = 0);

std::vector<GradcheckCase> run_gradcheck(const GradcheckOptions& opts);

}  // namespace smile
