#ifndef PROTODA_PROTONET_PROTONET_HPP
#define PROTODA_PROTONET_PROTONET_HPP

#include "protoda/numerics/ops.hpp"

#include <string>
#include <vector>

namespace protoda {

enum class Distance { squared_euclidean, euclidean };

std::string to_string(Distance d);
Distance parse_distance(const std::string& s);

struct ProtoHeadConfig {
  Index input_dim = 768;
  Index hidden = 128;
  Index output_dim = 128;
  double dropout = 0.2;
  Distance distance = Distance::squared_euclidean;
};

inline constexpr const char* kProtoPrefix = "protonet/";

/// Two dense layers under "protonet/", uniform(+-1/sqrt(fan_in)) weights and zero biases.
template <typename Scalar>
void init_proto_head(ParameterSet<Scalar>& params, const ProtoHeadConfig& cfg, Rng& rng) {
  const std::string p = kProtoPrefix;
  auto fan_in = [&rng](Index rows, Index cols) {
    return uniform<Scalar>(rows, cols, 1.0 / std::sqrt(static_cast<double>(cols)), rng);
  };
  params.add(p + "l1/w", fan_in(cfg.hidden, cfg.input_dim));
  params.add(p + "l1/b", Tensor<Scalar>::Zero(1, cfg.hidden));
  params.add(p + "l2/w", fan_in(cfg.output_dim, cfg.hidden));
  params.add(p + "l2/b", Tensor<Scalar>::Zero(1, cfg.output_dim));
}

/// f_theta: rows of `e` -> proto-embeddings. Dropout is active in train mode only.
template <typename Scalar>
Var<Scalar> project(Var<Scalar> e, const ParameterSet<Scalar>& params, const ProtoHeadConfig& cfg,
                    Mode mode, Rng& rng) {
  if (e.cols() != cfg.input_dim) {
    throw ShapeError("project: expected " + std::to_string(cfg.input_dim) + "-d embeddings, got " +
                     shape_string(e.value()));
  }
  Tape<Scalar>& t = *e.tape;
  const std::string p = kProtoPrefix;
  Var<Scalar> h = dense_forward(e, t.parameter(params, p + "l1/w"), t.parameter(params, p + "l1/b"));
  h = dropout(relu(h), cfg.dropout, mode, rng);
  h = dense_forward(h, t.parameter(params, p + "l2/w"), t.parameter(params, p + "l2/b"));
  return dropout(relu(h), cfg.dropout, mode, rng);
}

/// Mean of the support rows, duplicates counted with multiplicity.
template <typename Scalar>
Var<Scalar> compute_prototype(Var<Scalar> supports) {
  if (supports.rows() == 0) throw std::invalid_argument("compute_prototype: empty support set");
  return reduce_rows_mean(supports);
}

/// [n x C] distances from each query row to each prototype row.
template <typename Scalar>
Var<Scalar> class_distances(Var<Scalar> queries, Var<Scalar> prototypes, Distance d) {
  Var<Scalar> sq = squared_distances(queries, prototypes);
  return d == Distance::squared_euclidean ? sq : elementwise_sqrt(sq);
}

/// Mean negative log posterior of each query's true class. labels[i] indexes
/// a row of `prototypes`.
template <typename Scalar>
Var<Scalar> episode_loss(Var<Scalar> queries, const std::vector<Index>& labels,
                         Var<Scalar> prototypes, Distance d) {
  for (Index y : labels) {
    if (y < 0 || y >= prototypes.rows()) {
      throw std::invalid_argument("episode_loss: label " + std::to_string(y) + " has no prototype (" +
                                  std::to_string(prototypes.rows()) + " classes)");
    }
  }
  return softmax_cross_entropy(scale(class_distances(queries, prototypes, d), Scalar(-1)), labels);
}

/// Distances of one query to every prototype row, outside any tape.
template <typename Scalar>
RowVector<Scalar> prototype_distances(const RowVector<Scalar>& query, const Tensor<Scalar>& prototypes,
                                      Distance d) {
  if (prototypes.rows() == 0) throw std::invalid_argument("no prototypes");
  if (query.cols() != prototypes.cols()) {
    throw ShapeError("prototype distances: query " + shape_string(query) + " vs prototypes " +
                     shape_string(prototypes));
  }
  RowVector<Scalar> dist(prototypes.rows());
  for (Index c = 0; c < prototypes.rows(); ++c) {
    const Scalar sq = (query - prototypes.row(c)).squaredNorm();
    dist(c) = d == Distance::squared_euclidean ? sq : std::sqrt(sq);
  }
  return dist;
}

/// Softmax over negative distances with max-subtraction.
template <typename Scalar>
RowVector<Scalar> posteriors(const RowVector<Scalar>& query, const Tensor<Scalar>& prototypes,
                             Distance d = Distance::squared_euclidean) {
  const RowVector<Scalar> logits = -prototype_distances(query, prototypes, d);
  const RowVector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Nearest prototype; exact ties go to the lowest class index.
template <typename Scalar>
Index predict(const RowVector<Scalar>& query, const Tensor<Scalar>& prototypes,
              Distance d = Distance::squared_euclidean) {
  const RowVector<Scalar> dist = prototype_distances(query, prototypes, d);
  Index best = 0;
  for (Index c = 1; c < dist.size(); ++c) {
    if (dist(c) < dist(best)) best = c;
  }
  return best;
}

}  // namespace protoda

#endif  // PROTODA_PROTONET_PROTONET_HPP
