#ifndef PROTODA_NUMERICS_ADAM_HPP
#define PROTODA_NUMERICS_ADAM_HPP

#include "protoda/numerics/parameter_set.hpp"

#include <cmath>
#include <stdexcept>

namespace protoda {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every trainable parameter named in
/// `gradients`. Frozen parameters are skipped entirely; parameters without a
/// gradient entry keep their state and step count.
template <typename Scalar>
void adam_step(ParameterSet<Scalar>& params, const GradientMap<Scalar>& gradients,
               const AdamOptions& opt) {
  for (const auto& [name, g] : gradients) {
    if (!params.contains(name)) {
      throw std::invalid_argument("adam_step: gradient for unknown parameter '" + name + "'");
    }
    require_same_shape(params.value(name), g, ("adam_step: " + name).c_str());
  }
  const Scalar b1 = static_cast<Scalar>(opt.beta1);
  const Scalar b2 = static_cast<Scalar>(opt.beta2);
  for (const auto& [name, g] : gradients) {
    Parameter<Scalar>& p = params.at(name);
    if (!p.trainable) continue;
    p.step += 1;
    p.first_moment = b1 * p.first_moment + (Scalar(1) - b1) * g;
    p.second_moment = b2 * p.second_moment + (Scalar(1) - b2) * g.cwiseAbs2();
    const double t = static_cast<double>(p.step);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(opt.beta1, t));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(opt.beta2, t));
    p.value.array() -= static_cast<Scalar>(opt.lr) * (p.first_moment.array() / c1) /
                       ((p.second_moment.array() / c2).sqrt() + static_cast<Scalar>(opt.epsilon));
  }
}

}  // namespace protoda

#endif  // PROTODA_NUMERICS_ADAM_HPP
