#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "argem/tape.hpp"

namespace argem {

/// Builds a scalar loss from parameter leaves, in the same order they were
/// handed to check_gradients.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  double step = 0.0;
  double tol = 0.0;
  bool pass = true;
  std::vector<GradCheckEntry> entries;
};

/// Compares the tape gradient of `build` against central finite differences,
/// coordinate by coordinate. A non-finite loss at any evaluation point marks
/// the parameter as failed rather than throwing.
GradCheckReport check_gradients(
    const LossBuilder& build,
    const std::vector<std::pair<std::string, DenseMat>>& params,
    double step = 1e-5, double tol = 1e-4);

}  // namespace argem
