#ifndef PROTODA_NUMERICS_GRAD_CHECK_HPP
#define PROTODA_NUMERICS_GRAD_CHECK_HPP

#include "protoda/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace protoda {

struct GradCheckEntry {
  std::string name;
  Index worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  double max_rel_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0;
  double tolerance = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

using LossFn = std::function<Var<double>(Tape<double>&, const ParameterSet<double>&)>;
// Applied to the reverse-mode gradients before comparison. Test-only hook.
using GradientHook = std::function<void(GradientMap<double>&)>;

class NondeterministicLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error is |a - n| / max(|a|, |n|, 1e-6): relative for ordinary gradients,
/// absolute near zero where central differences are roundoff-dominated.
inline double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// (f(x+h) - f(x-h)) / 2h for every element of every trainable parameter.
inline GradCheckReport grad_check(const LossFn& loss_fn, ParameterSet<double> params,
                                  double h = 1e-4, double tol = 1e-4,
                                  const GradientHook& hook = {}) {
  auto evaluate = [&](const ParameterSet<double>& ps) {
    Tape<double> tape;
    return loss_fn(tape, ps).scalar();
  };

  GradientMap<double> analytic;
  double base = 0;
  {
    Tape<double> tape;
    Var<double> loss = loss_fn(tape, params);
    base = loss.scalar();
    tape.backward(loss);
    analytic = tape.parameter_gradients();
  }
  if (evaluate(params) != base) {
    throw NondeterministicLoss("grad_check: loss differs between identical evaluations");
  }
  if (hook) hook(analytic);

  GradCheckReport report;
  report.tolerance = tol;
  for (const auto& [name, p] : params) {
    if (!p.trainable) continue;
    Tensor<double> a = Tensor<double>::Zero(p.value.rows(), p.value.cols());
    if (auto it = analytic.find(name); it != analytic.end()) a = it->second;

    GradCheckEntry entry;
    entry.name = name;
    for (Index i = 0; i < p.value.size(); ++i) {
      double& slot = params.value(name).data()[i];
      const double saved = slot;
      slot = saved + h;
      const double up = evaluate(params);
      slot = saved - h;
      const double down = evaluate(params);
      slot = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = gradient_relative_error(a.data()[i], numeric);
      if (err >= entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = a.data()[i];
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace protoda

#endif  // PROTODA_NUMERICS_GRAD_CHECK_HPP
