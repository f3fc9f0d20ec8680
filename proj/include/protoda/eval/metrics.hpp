#ifndef PROTODA_EVAL_METRICS_HPP
#define PROTODA_EVAL_METRICS_HPP

#include "protoda/numerics/tensor.hpp"

#include <vector>

namespace protoda {

/// Fraction of positions where prediction equals gold.
double accuracy(const std::vector<Index>& predictions, const std::vector<Index>& gold);

/// Micro-averaged F1 from aggregated TP/FP/FN over all classes, in [0, 1].
/// Throws std::logic_error if it disagrees with accuracy (single-label
/// multiclass makes them equal).
double micro_f1(const std::vector<Index>& predictions, const std::vector<Index>& gold);

/// Two-sided 97.5% quantile of Student's t with `dof` degrees of freedom.
double t_quantile_975(double dof);

/// 95% Student-t half-width: t(0.975, n-1) * sample std / sqrt(n).
double confidence_interval(const std::vector<double>& scores);

}  // namespace protoda

#endif  // PROTODA_EVAL_METRICS_HPP
