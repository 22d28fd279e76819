#include "argem/gradcheck.hpp"

#include <cmath>
#include <limits>

namespace argem {

namespace {

double evaluate(const LossBuilder& build,
                const std::vector<std::pair<std::string, DenseMat>>& params) {
  try {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& [name, value] : params) {
      (void)name;
      vars.push_back(tape.constant(value));
    }
    Var loss = build(tape, vars);
    return tape.value(loss)(0, 0);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

GradCheckReport check_gradients(
    const LossBuilder& build,
    const std::vector<std::pair<std::string, DenseMat>>& params, double step,
    double tol) {
  GradCheckReport report;
  report.step = step;
  report.tol = tol;

  // Analytic gradients from one recorded pass.
  std::vector<DenseMat> analytic;
  try {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& [name, value] : params) {
      (void)name;
      vars.push_back(tape.leaf(value, /*requires_grad=*/true));
    }
    Var loss = build(tape, vars);
    tape.backward(loss);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  } catch (const NumericError&) {
    for (const auto& [name, value] : params) {
      (void)value;
      report.entries.push_back(
          {name, std::numeric_limits<double>::infinity(), false});
    }
    report.pass = false;
    return report;
  }

  auto perturbed = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry;
    entry.name = params[p].first;
    DenseMat& theta = perturbed[p].second;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double saved = theta.data[k];
      theta.data[k] = saved + step;
      const double fp = evaluate(build, perturbed);
      theta.data[k] = saved - step;
      const double fm = evaluate(build, perturbed);
      theta.data[k] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        entry.pass = false;
        entry.max_rel_err = std::numeric_limits<double>::infinity();
        break;
      }
      const double fd = (fp - fm) / (2.0 * step);
      const double a = analytic[p].data[k];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
      const double rel = std::abs(a - fd) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.pass && entry.max_rel_err < tol;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace argem
