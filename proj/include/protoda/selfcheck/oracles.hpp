#ifndef PROTODA_SELFCHECK_ORACLES_HPP
#define PROTODA_SELFCHECK_ORACLES_HPP

// Brute-force reference formulas on std::vector, written without the
// library's tape or Eigen expressions.

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

namespace protoda::oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Vec mean(const Mat& rows) {
  Vec out(rows.at(0).size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  for (auto& v : out) v /= static_cast<double>(rows.size());
  return out;
}

inline double sq_dist(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

/// p(c | q) = exp(-d_c) / sum exp(-d_c'), evaluated literally in long double.
inline Vec posteriors(const Vec& q, const Mat& protos, bool squared = true) {
  std::vector<long double> e(protos.size());
  long double total = 0;
  for (std::size_t c = 0; c < protos.size(); ++c) {
    const double d = squared ? sq_dist(q, protos[c]) : std::sqrt(sq_dist(q, protos[c]));
    e[c] = std::exp(-static_cast<long double>(d));
    total += e[c];
  }
  Vec p(protos.size());
  for (std::size_t c = 0; c < protos.size(); ++c) p[c] = static_cast<double>(e[c] / total);
  return p;
}

/// -(1/|Q|) sum log p(y_i | x_i)
inline double episode_loss(const Mat& queries, const std::vector<std::size_t>& labels, const Mat& protos,
                           bool squared = true) {
  double total = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    total -= std::log(posteriors(queries[i], protos, squared)[labels[i]]);
  }
  return total / static_cast<double>(queries.size());
}

/// relu(relu(x W1^T + b1) W2^T + b2)
inline Vec two_layer(const Vec& x, const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2) {
  auto layer = [](const Vec& in, const Mat& w, const Vec& b) {
    Vec out(w.size());
    for (std::size_t o = 0; o < w.size(); ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in.size(); ++i) acc += w[o][i] * in[i];
      out[o] = acc > 0 ? acc : 0.0;
    }
    return out;
  };
  return layer(layer(x, w1, b1), w2, b2);
}

/// Micro-F1 from aggregated per-class TP/FP/FN counts.
inline double micro_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
  std::map<int, long> tp, fp, fn;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == gold[i]) {
      ++tp[pred[i]];
    } else {
      ++fp[pred[i]];
      ++fn[gold[i]];
    }
  }
  long TP = 0, FP = 0, FN = 0;
  for (auto& [c, n] : tp) TP += n;
  for (auto& [c, n] : fp) FP += n;
  for (auto& [c, n] : fn) FN += n;
  const double precision = TP + FP ? static_cast<double>(TP) / static_cast<double>(TP + FP) : 0.0;
  const double recall = TP + FN ? static_cast<double>(TP) / static_cast<double>(TP + FN) : 0.0;
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

/// A two-layer relu network given as plain nested vectors.
struct TwoLayer {
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
  Vec operator()(const Vec& x) const { return two_layer(x, w1, b1, w2, b2); }
};

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// (sum_i f(e_i) + sum_j f(g([e_s(j), z_j]))) / (n + m)
inline Vec augmented_prototype_sentence(const Mat& e, const std::vector<std::size_t>& subset, const Mat& z,
                                        const TwoLayer& f, const TwoLayer& g) {
  Mat rows;
  for (const auto& x : e) rows.push_back(f(x));
  for (std::size_t j = 0; j < subset.size(); ++j) rows.push_back(f(g(concat(e[subset[j]], z[j]))));
  return mean(rows);
}

/// (sum_i f(e_i) + sum_j g([f(e_s(j)), z_j])) / (n + m)
inline Vec augmented_prototype_proto(const Mat& e, const std::vector<std::size_t>& subset, const Mat& z,
                                     const TwoLayer& f, const TwoLayer& g) {
  Mat rows;
  for (const auto& x : e) rows.push_back(f(x));
  for (std::size_t j = 0; j < subset.size(); ++j) rows.push_back(g(concat(f(e[subset[j]]), z[j])));
  return mean(rows);
}

}  // namespace protoda::oracle

#endif  // PROTODA_SELFCHECK_ORACLES_HPP
