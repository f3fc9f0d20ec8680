#include "protoda/eval/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace protoda {

namespace {

void check_pairs(const std::vector<Index>& predictions, const std::vector<Index>& gold) {
  if (predictions.size() != gold.size()) {
    throw std::invalid_argument("micro_f1: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) throw std::invalid_argument("micro_f1: no predictions");
}

}  // namespace

double accuracy(const std::vector<Index>& predictions, const std::vector<Index>& gold) {
  check_pairs(predictions, gold);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predictions[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

double micro_f1(const std::vector<Index>& predictions, const std::vector<Index>& gold) {
  check_pairs(predictions, gold);
  std::map<Index, std::size_t> tp, fp, fn;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i] == gold[i]) {
      ++tp[gold[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[gold[i]];
    }
  }
  auto total = [](const std::map<Index, std::size_t>& m) {
    return std::accumulate(m.begin(), m.end(), std::size_t{0}, [](std::size_t a, const auto& kv) { return a + kv.second; });
  };
  const double TP = static_cast<double>(total(tp));
  const double FP = static_cast<double>(total(fp));
  const double FN = static_cast<double>(total(fn));
  const double precision = TP + FP > 0 ? TP / (TP + FP) : 0.0;
  const double recall = TP + FN > 0 ? TP / (TP + FN) : 0.0;
  const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  const double acc = accuracy(predictions, gold);
  if (std::abs(f1 - acc) > 1e-12) {
    throw std::logic_error("micro_f1 " + std::to_string(f1) + " disagrees with accuracy " + std::to_string(acc));
  }
  return f1;
}

double t_quantile_975(double dof) {
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.975);
}

double confidence_interval(const std::vector<double>& scores) {
  if (scores.size() < 2) throw std::invalid_argument("confidence_interval: needs at least 2 scores");
  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  if (ss == 0.0) return 0.0;
  return t_quantile_975(n - 1) * std::sqrt(ss / (n - 1)) / std::sqrt(n);
}

}  // namespace protoda
