#ifndef PROTODA_AUGMENT_AUGMENT_HPP
#define PROTODA_AUGMENT_AUGMENT_HPP

#include "protoda/protonet/protonet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace protoda {

enum class AugmentMethod { none, noise, hallucinate };
enum class AugmentSpace { sentence, proto };

/// Layer-1 initialisation of the hallucinator over [u || z].
enum class IdentityLayout {
  sum,          // [I || I]: the initial generator outputs relu(u + z)
  conditioning  // [I || 0]: the initial generator ignores z
};

std::string to_string(AugmentMethod m);
std::string to_string(AugmentSpace s);
std::string to_string(IdentityLayout l);
AugmentMethod parse_augment_method(const std::string& s);
AugmentSpace parse_augment_space(const std::string& s);
IdentityLayout parse_identity_layout(const std::string& s);

struct AugmentConfig {
  AugmentMethod method = AugmentMethod::none;
  AugmentSpace space = AugmentSpace::proto;
  double ratio = 0.2;
  double noise_variance_fraction = 0.1;
  double hallucinator_dropout = 0.2;
  IdentityLayout identity_layout = IdentityLayout::sum;
};

inline constexpr const char* kHallucinatorPrefix = "hallucinator/";

/// Number of synthetic samples for n real ones: max(1, round-half-up(ratio * n)).
inline std::size_t augmentation_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("augmentation ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  if (n == 0) throw std::invalid_argument("augmentation of an empty support set");
  const auto m = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
  return std::max<std::size_t>(1, m);
}

/// Uniform random subset (without replacement) of the indices 0..n-1, in
/// draw order.
inline std::vector<Index> select_hallucination_subset(std::size_t n, double ratio, Rng& rng) {
  const std::size_t m = augmentation_count(n, ratio);
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), Index{0});
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  return idx;
}

/// Writes identity-initialised hallucinator weights for embeddings of width
/// `dim`. Existing hallucinator weights of another width are rejected.
template <typename Scalar>
void init_identity(ParameterSet<Scalar>& params, Index dim, IdentityLayout layout = IdentityLayout::sum) {
  const std::string p = kHallucinatorPrefix;
  const std::vector<std::pair<std::string, std::pair<Index, Index>>> shapes = {
      {p + "l1/w", {dim, 2 * dim}}, {p + "l1/b", {1, dim}}, {p + "l2/w", {dim, dim}}, {p + "l2/b", {1, dim}}};
  for (const auto& [name, shape] : shapes) {
    if (!params.contains(name)) continue;
    const auto& v = params.value(name);
    if (v.rows() != shape.first || v.cols() != shape.second) {
      throw ShapeError("init_identity: " + name + " is " + shape_string(v) + ", expected [" +
                       std::to_string(shape.first) + "x" + std::to_string(shape.second) + "]");
    }
  }
  Tensor<Scalar> w1 = Tensor<Scalar>::Zero(dim, 2 * dim);
  w1.leftCols(dim).setIdentity();
  if (layout == IdentityLayout::sum) w1.rightCols(dim).setIdentity();
  params.add(p + "l1/w", std::move(w1));
  params.add(p + "l1/b", Tensor<Scalar>::Zero(1, dim));
  params.add(p + "l2/w", Tensor<Scalar>::Identity(dim, dim));
  params.add(p + "l2/b", Tensor<Scalar>::Zero(1, dim));
}

/// Width of the embeddings the stored hallucinator accepts.
template <typename Scalar>
Index hallucinator_dim(const ParameterSet<Scalar>& params) {
  return params.value(std::string(kHallucinatorPrefix) + "l2/w").rows();
}

/// G([u || z]) row by row: dense -> relu -> dropout -> dense -> relu -> dropout.
template <typename Scalar>
Var<Scalar> hallucinate(Var<Scalar> u, Var<Scalar> z, const ParameterSet<Scalar>& params,
                        double dropout_p, Mode mode, Rng& rng) {
  require_same_shape(u.value(), z.value(), "hallucinate: embedding vs noise");
  const Index dim = hallucinator_dim(params);
  if (u.cols() != dim) {
    throw ShapeError("hallucinate: generator expects " + std::to_string(dim) + "-d embeddings, got " +
                     shape_string(u.value()));
  }
  Tape<Scalar>& t = *u.tape;
  const std::string p = kHallucinatorPrefix;
  Var<Scalar> h = dense_forward(concat_cols({u, z}), t.parameter(params, p + "l1/w"), t.parameter(params, p + "l1/b"));
  h = dropout(relu(h), dropout_p, mode, rng);
  h = dense_forward(h, t.parameter(params, p + "l2/w"), t.parameter(params, p + "l2/b"));
  return dropout(relu(h), dropout_p, mode, rng);
}

/// Hallucinate in sentence space, then project: the mean of f(e_i) over the
/// originals and f(G(e_j, z_j)) over the selected subset. Row j of `z` is the
/// noise for subset[j].
template <typename Scalar>
Var<Scalar> augmented_prototype_sentence(Var<Scalar> supports, const std::vector<Index>& subset,
                                         const Tensor<Scalar>& z, const ParameterSet<Scalar>& params,
                                         const ProtoHeadConfig& head, const AugmentConfig& aug, Mode mode,
                                         Rng& rng) {
  if (supports.rows() == 0) throw std::invalid_argument("augmented prototype: empty support set");
  Tape<Scalar>& t = *supports.tape;
  Var<Scalar> fake = hallucinate(gather_rows(supports, subset), t.constant(z), params,
                                 aug.hallucinator_dropout, mode, rng);
  return compute_prototype(project(concat_rows({supports, fake}), params, head, mode, rng));
}

/// Project, then hallucinate in proto space: the mean of f(e_i) over the
/// originals and G(f(e_j), z_j) over the selected subset.
template <typename Scalar>
Var<Scalar> augmented_prototype_proto(Var<Scalar> supports, const std::vector<Index>& subset,
                                      const Tensor<Scalar>& z, const ParameterSet<Scalar>& params,
                                      const ProtoHeadConfig& head, const AugmentConfig& aug, Mode mode,
                                      Rng& rng) {
  if (supports.rows() == 0) throw std::invalid_argument("augmented prototype: empty support set");
  Tape<Scalar>& t = *supports.tape;
  Var<Scalar> projected = project(supports, params, head, mode, rng);
  Var<Scalar> fake = hallucinate(gather_rows(projected, subset), t.constant(z), params,
                                 aug.hallucinator_dropout, mode, rng);
  return compute_prototype(concat_rows({projected, fake}));
}

/// Per-dimension population variance over the rows of `batch`.
template <typename Scalar>
RowVector<Scalar> batch_variance(const Tensor<Scalar>& batch) {
  if (batch.rows() == 0) throw std::invalid_argument("batch_variance: empty batch");
  const RowVector<Scalar> mean = batch.colwise().mean();
  return (batch.rowwise() - mean).array().square().colwise().mean().matrix();
}

/// Multiplicative (eta) and additive (eps) noise for `rows` samples, each
/// N(0, fraction * variance_d) in dimension d.
template <typename Scalar>
struct NoiseDraw {
  Tensor<Scalar> eta;
  Tensor<Scalar> eps;
};

template <typename Scalar>
NoiseDraw<Scalar> draw_noise(Index rows, const RowVector<Scalar>& variance, double fraction, Rng& rng) {
  const RowVector<Scalar> sd = (variance.array() * static_cast<Scalar>(fraction)).sqrt().matrix();
  NoiseDraw<Scalar> d;
  d.eta = standard_normal<Scalar>(rows, variance.cols(), rng) * sd.asDiagonal();
  d.eps = standard_normal<Scalar>(rows, variance.cols(), rng) * sd.asDiagonal();
  return d;
}

/// x' = x .* (1 + eta) + eps, differentiable in x.
template <typename Scalar>
Var<Scalar> perturb(Var<Scalar> x, const NoiseDraw<Scalar>& noise) {
  Tensor<Scalar> gain = noise.eta.array() + Scalar(1);
  return add_const(mul_const(x, std::move(gain)), noise.eps);
}

/// Supports followed by one perturbed copy of each member of a random subset.
template <typename Scalar>
Tensor<Scalar> noise_augment(const Tensor<Scalar>& supports, const RowVector<Scalar>& variance, double ratio,
                             double fraction, Rng& rng) {
  const auto subset = select_hallucination_subset(static_cast<std::size_t>(supports.rows()), ratio, rng);
  const Index m = static_cast<Index>(subset.size());
  const auto noise = draw_noise<Scalar>(m, variance, fraction, rng);
  Tensor<Scalar> out(supports.rows() + m, supports.cols());
  out.topRows(supports.rows()) = supports;
  for (Index j = 0; j < m; ++j) {
    const auto x = supports.row(subset[static_cast<std::size_t>(j)]);
    out.row(supports.rows() + j) =
        x.cwiseProduct((noise.eta.row(j).array() + Scalar(1)).matrix()) + noise.eps.row(j);
  }
  return out;
}

}  // namespace protoda

#endif  // PROTODA_AUGMENT_AUGMENT_HPP
