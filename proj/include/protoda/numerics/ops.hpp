#ifndef PROTODA_NUMERICS_OPS_HPP
#define PROTODA_NUMERICS_OPS_HPP

#include "protoda/numerics/tape.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

// Differentiable operations over Tape nodes. Each op computes its value
// eagerly and records a closure that maps the upstream gradient onto its
// inputs.

namespace protoda {

/// input[n x d_in] * weights[d_out x d_in]^T + bias[1 x d_out]
template <typename Scalar>
Var<Scalar> dense_forward(Var<Scalar> input, Var<Scalar> weights, Var<Scalar> bias) {
  Tape<Scalar>& t = *input.tape;
  const auto& x = input.value();
  const auto& w = weights.value();
  const auto& b = bias.value();
  if (x.cols() != w.cols()) {
    throw ShapeError("dense_forward: input " + shape_string(x) + " incompatible with weights " +
                     shape_string(w));
  }
  if (b.rows() != 1 || b.cols() != w.rows()) {
    throw ShapeError("dense_forward: bias " + shape_string(b) + " incompatible with weights " +
                     shape_string(w));
  }
  Tensor<Scalar> y = x * w.transpose();
  y.rowwise() += b.row(0);
  return t.record(std::move(y), {input, weights, bias},
                  [input, weights, bias](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                    if (tp.needs_grad(input)) tp.accumulate(input, g * weights.value());
                    if (tp.needs_grad(weights))
                      tp.accumulate(weights, g.transpose() * input.value());
                    if (tp.needs_grad(bias)) tp.accumulate(bias, g.colwise().sum());
                  });
}

/// input * weights^T, no bias.
template <typename Scalar>
Var<Scalar> linear(Var<Scalar> input, Var<Scalar> weights) {
  Tape<Scalar>& t = *input.tape;
  if (input.cols() != weights.cols()) {
    throw ShapeError("linear: input " + shape_string(input.value()) +
                     " incompatible with weights " + shape_string(weights.value()));
  }
  Tensor<Scalar> y = input.value() * weights.value().transpose();
  return t.record(std::move(y), {input, weights},
                  [input, weights](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                    if (tp.needs_grad(input)) tp.accumulate(input, g * weights.value());
                    if (tp.needs_grad(weights))
                      tp.accumulate(weights, g.transpose() * input.value());
                  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> input) {
  Tensor<Scalar> y = input.value().cwiseMax(Scalar(0));
  return input.tape->record(std::move(y), {input},
                            [input](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                              const auto& x = input.value();
                              tp.accumulate(input, (x.array() > Scalar(0)).select(g, Scalar(0)));
                            });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> input) {
  Tensor<Scalar> y = (Scalar(1) / (Scalar(1) + (-input.value().array()).exp())).matrix();
  Tape<Scalar>& t = *input.tape;
  if (!t.needs_grad(input)) return t.constant(std::move(y));
  Tensor<Scalar> saved = y;
  return t.record(std::move(y), {input},
                  [input, saved = std::move(saved)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                    const auto s = saved.array();
                    tp.accumulate(input, (g.array() * s * (Scalar(1) - s)).matrix());
                  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> input) {
  Tensor<Scalar> y = input.value().array().tanh().matrix();
  Tape<Scalar>& t = *input.tape;
  if (!t.needs_grad(input)) return t.constant(std::move(y));
  Tensor<Scalar> saved = y;
  return t.record(std::move(y), {input},
                  [input, saved = std::move(saved)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                    tp.accumulate(input,
                                  (g.array() * (Scalar(1) - saved.array().square())).matrix());
                  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<Scalar> y = a.value() + b.value();
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor<Scalar> y = a.value() - b.value();
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<Scalar> y = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  Tensor<Scalar> y = a.value() * s;
  return a.tape->record(std::move(y), {a}, [a, s](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(a, g * s);
  });
}

template <typename Scalar>
Var<Scalar> add_const(Var<Scalar> a, const Tensor<Scalar>& c) {
  require_same_shape(a.value(), c, "add_const");
  Tensor<Scalar> y = a.value() + c;
  return a.tape->record(std::move(y), {a}, [a](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    tp.accumulate(a, g);
  });
}

template <typename Scalar>
Var<Scalar> mul_const(Var<Scalar> a, Tensor<Scalar> c) {
  require_same_shape(a.value(), c, "mul_const");
  Tensor<Scalar> y = a.value().cwiseProduct(c);
  return a.tape->record(std::move(y), {a},
                        [a, c = std::move(c)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                          tp.accumulate(a, g.cwiseProduct(c));
                        });
}

/// Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the
/// identity. Mask elements are drawn in column-major order.
template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> input, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout: probability must lie in [0, 1), got " +
                                std::to_string(p));
  }
  if (mode == Mode::eval || p == 0.0) return input;
  std::bernoulli_distribution keep(1.0 - p);
  const Scalar survivor = static_cast<Scalar>(1.0 / (1.0 - p));
  Tensor<Scalar> mask(input.rows(), input.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? survivor : Scalar(0);
  return mul_const(input, std::move(mask));
}

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(parts.front().value()) +
                       " vs " + shape_string(p.value()));
    }
    cols += p.cols();
  }
  Tensor<Scalar> y(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return parts.front().tape->record(
      std::move(y), inputs, [inputs](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Index off = 0;
        for (const auto& p : inputs) {
          if (tp.needs_grad(p)) tp.accumulate(p, g.middleCols(off, p.cols()));
          off += p.cols();
        }
      });
}

template <typename Scalar>
Var<Scalar> concat_cols(std::initializer_list<Var<Scalar>> parts) {
  return concat_cols(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_string(parts.front().value()) +
                       " vs " + shape_string(p.value()));
    }
    rows += p.rows();
  }
  Tensor<Scalar> y(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var<Scalar>> inputs(parts.begin(), parts.end());
  return parts.front().tape->record(
      std::move(y), inputs, [inputs](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Index off = 0;
        for (const auto& p : inputs) {
          if (tp.needs_grad(p)) tp.accumulate(p, g.middleRows(off, p.rows()));
          off += p.rows();
        }
      });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::initializer_list<Var<Scalar>> parts) {
  return concat_rows(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> input, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > input.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_string(input.value()));
  }
  Tensor<Scalar> y = input.value().middleCols(start, count);
  return input.tape->record(
      std::move(y), {input}, [input, start, count](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Tensor<Scalar> full = Tensor<Scalar>::Zero(input.rows(), input.cols());
        full.middleCols(start, count) = g;
        tp.accumulate(input, full);
      });
}

/// Rows picked by index; duplicates allowed (gradients scatter-add).
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> input, std::vector<Index> rows) {
  Tensor<Scalar> y(static_cast<Index>(rows.size()), input.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= input.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                       shape_string(input.value()));
    }
    y.row(static_cast<Index>(i)) = input.value().row(rows[i]);
  }
  return input.tape->record(
      std::move(y), {input},
      [input, rows = std::move(rows)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Tensor<Scalar> full = Tensor<Scalar>::Zero(input.rows(), input.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) full.row(rows[i]) += g.row(static_cast<Index>(i));
        tp.accumulate(input, full);
      });
}

/// Sliding windows over rows for 1-D convolution: output row i is the
/// concatenation of input rows i-pad .. i-pad+kernel-1, zero outside range.
template <typename Scalar>
Var<Scalar> unfold_rows(Var<Scalar> input, Index kernel, Index pad) {
  const Index len = input.rows();
  const Index ch = input.cols();
  const Index out_len = len + 2 * pad - kernel + 1;
  if (kernel < 1 || out_len < 1) {
    throw ShapeError("unfold_rows: kernel " + std::to_string(kernel) + " with pad " +
                     std::to_string(pad) + " does not fit " + shape_string(input.value()));
  }
  Tensor<Scalar> y = Tensor<Scalar>::Zero(out_len, kernel * ch);
  for (Index i = 0; i < out_len; ++i) {
    for (Index j = 0; j < kernel; ++j) {
      const Index src = i + j - pad;
      if (src >= 0 && src < len) y.block(i, j * ch, 1, ch) = input.value().row(src);
    }
  }
  return input.tape->record(
      std::move(y), {input},
      [input, kernel, pad, out_len, len, ch](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Tensor<Scalar> full = Tensor<Scalar>::Zero(len, ch);
        for (Index i = 0; i < out_len; ++i) {
          for (Index j = 0; j < kernel; ++j) {
            const Index src = i + j - pad;
            if (src >= 0 && src < len) full.row(src) += g.block(i, j * ch, 1, ch);
          }
        }
        tp.accumulate(input, full);
      });
}

/// Non-overlapping max pooling over rows; a trailing partial window is
/// pooled over the rows it has. Ties go to the first row.
template <typename Scalar>
Var<Scalar> max_pool_rows(Var<Scalar> input, Index width) {
  if (width < 1) throw ShapeError("max_pool_rows: width must be positive");
  const Index len = input.rows();
  const Index cols = input.cols();
  const Index out_len = (len + width - 1) / width;
  Tensor<Scalar> y(out_len, cols);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> arg(out_len, cols);
  const auto& x = input.value();
  for (Index o = 0; o < out_len; ++o) {
    const Index begin = o * width;
    const Index end = std::min(len, begin + width);
    for (Index c = 0; c < cols; ++c) {
      Index best = begin;
      for (Index r = begin + 1; r < end; ++r) {
        if (x(r, c) > x(best, c)) best = r;
      }
      y(o, c) = x(best, c);
      arg(o, c) = best;
    }
  }
  return input.tape->record(
      std::move(y), {input}, [input, arg](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Tensor<Scalar> full = Tensor<Scalar>::Zero(input.rows(), input.cols());
        for (Index o = 0; o < arg.rows(); ++o)
          for (Index c = 0; c < arg.cols(); ++c) full(arg(o, c), c) += g(o, c);
        tp.accumulate(input, full);
      });
}

namespace detail {
template <typename Scalar, typename Better>
Var<Scalar> reduce_rows_extreme(Var<Scalar> input, Better better) {
  const auto& x = input.value();
  if (x.rows() == 0) throw ShapeError("reduce over zero rows");
  Tensor<Scalar> y(1, x.cols());
  std::vector<Index> arg(static_cast<std::size_t>(x.cols()));
  for (Index c = 0; c < x.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < x.rows(); ++r) {
      if (better(x(r, c), x(best, c))) best = r;
    }
    y(0, c) = x(best, c);
    arg[static_cast<std::size_t>(c)] = best;
  }
  return input.tape->record(
      std::move(y), {input}, [input, arg](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Tensor<Scalar> full = Tensor<Scalar>::Zero(input.rows(), input.cols());
        for (std::size_t c = 0; c < arg.size(); ++c)
          full(arg[c], static_cast<Index>(c)) = g(0, static_cast<Index>(c));
        tp.accumulate(input, full);
      });
}
}  // namespace detail

/// Column-wise maximum over rows -> [1 x cols].
template <typename Scalar>
Var<Scalar> reduce_rows_max(Var<Scalar> input) {
  return detail::reduce_rows_extreme(input, [](Scalar a, Scalar b) { return a > b; });
}

template <typename Scalar>
Var<Scalar> reduce_rows_min(Var<Scalar> input) {
  return detail::reduce_rows_extreme(input, [](Scalar a, Scalar b) { return a < b; });
}

template <typename Scalar>
Var<Scalar> reduce_rows_mean(Var<Scalar> input) {
  const Index n = input.rows();
  if (n == 0) throw ShapeError("reduce_rows_mean: zero rows");
  Tensor<Scalar> y = input.value().colwise().sum() / static_cast<Scalar>(n);
  return input.tape->record(std::move(y), {input},
                            [input, n](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                              tp.accumulate(input, g.replicate(n, 1) / static_cast<Scalar>(n));
                            });
}

template <typename Scalar>
Var<Scalar> sum_all(Var<Scalar> input) {
  Tensor<Scalar> y(1, 1);
  y(0, 0) = input.value().sum();
  return input.tape->record(std::move(y), {input},
                            [input](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
                              tp.accumulate(input, Tensor<Scalar>::Constant(
                                                       input.rows(), input.cols(), g(0, 0)));
                            });
}

/// Pairwise squared Euclidean distances: out(i, j) = |a_i - b_j|^2.
template <typename Scalar>
Var<Scalar> squared_distances(Var<Scalar> a, Var<Scalar> b) {
  const auto& x = a.value();
  const auto& p = b.value();
  if (x.cols() != p.cols()) {
    throw ShapeError("squared_distances: dimension mismatch " + shape_string(x) + " vs " +
                     shape_string(p));
  }
  Tensor<Scalar> d(x.rows(), p.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < p.rows(); ++j) d(i, j) = (x.row(i) - p.row(j)).squaredNorm();
  return a.tape->record(std::move(d), {a, b}, [a, b](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
    const auto& xv = a.value();
    const auto& pv = b.value();
    if (tp.needs_grad(a)) {
      Tensor<Scalar> ga = Scalar(2) * (g.rowwise().sum().asDiagonal() * xv - g * pv);
      tp.accumulate(a, ga);
    }
    if (tp.needs_grad(b)) {
      Tensor<Scalar> gb =
          Scalar(2) * (g.colwise().sum().transpose().asDiagonal() * pv - g.transpose() * xv);
      tp.accumulate(b, gb);
    }
  });
}

/// Elementwise square root with the derivative at 0 defined as 0.
template <typename Scalar>
Var<Scalar> elementwise_sqrt(Var<Scalar> input) {
  Tensor<Scalar> y = input.value().cwiseMax(Scalar(0)).cwiseSqrt();
  Tensor<Scalar> saved = y;
  return input.tape->record(
      std::move(y), {input},
      [input, saved = std::move(saved)](Tape<Scalar>& tp, const Tensor<Scalar>& g) {
        Tensor<Scalar> d = (saved.array() > Scalar(0))
                               .select(g.array() / (Scalar(2) * saved.array()), Scalar(0))
                               .matrix();
        tp.accumulate(input, d);
      });
}

/// Mean negative log-softmax of the labelled column of each row.
/// Softmax uses max-subtraction, so arbitrarily negative logits are safe.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, std::vector<Index> labels) {
  const auto& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_string(z));
  }
  if (z.rows() == 0) throw ShapeError("softmax_cross_entropy: no rows");
  Tensor<Scalar> prob(z.rows(), z.cols());
  Scalar total = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    const Index y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= z.cols()) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) +
                              " outside " + std::to_string(z.cols()) + " classes");
    }
    const Scalar m = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - m).eval();
    const Scalar lse = std::log(shifted.exp().sum());
    prob.row(i) = (shifted - lse).exp().matrix();
    total -= shifted(y) - lse;
  }
  Tensor<Scalar> out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(z.rows());
  return logits.tape->record(
      std::move(out), {logits},
      [logits, labels = std::move(labels), prob = std::move(prob)](Tape<Scalar>& tp,
                                                                   const Tensor<Scalar>& g) {
        Tensor<Scalar> d = prob;
        for (std::size_t i = 0; i < labels.size(); ++i) d(static_cast<Index>(i), labels[i]) -= 1;
        tp.accumulate(logits, d * (g(0, 0) / static_cast<Scalar>(labels.size())));
      });
}

}  // namespace protoda

#endif  // PROTODA_NUMERICS_OPS_HPP
