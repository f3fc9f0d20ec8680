#ifndef PROTODA_ENCODER_ENCODER_HPP
#define PROTODA_ENCODER_ENCODER_HPP

#include "protoda/corpus/utterance.hpp"
#include "protoda/corpus/vocab.hpp"
#include "protoda/numerics/ops.hpp"

#include <string>
#include <vector>

namespace protoda {

enum class EncoderKind {
  bilstm,  // char CNN + word vectors + BiLSTM + statistics pooling
  mean,    // mean word vector -> one dense layer; a fast stand-in, not the reference model
};

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& s);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::bilstm;
  Index char_dim = static_cast<Index>(CharAlphabet::kOneHotDim);
  Index kernel = 5;
  Index filters1 = 32;
  Index filters2 = 64;
  Index pool = 2;
  double dropout = 0.2;
  Index word_dim = static_cast<Index>(kWordVectorDim);
  Index hidden = 128;
  Index mean_output_dim = 768;

  Index char_feature_dim() const { return filters2; }
  Index output_dim() const { return kind == EncoderKind::bilstm ? 6 * hidden : mean_output_dim; }
};

inline constexpr const char* kEncoderPrefix = "encoder/";

/// Everything besides parameters that turns text into encoder input.
struct TextResources {
  const CharAlphabet* alphabet = nullptr;
  const EmbeddingTable* vectors = nullptr;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> fan_in_uniform(Index rows, Index cols, Rng& rng) {
  return uniform<Scalar>(rows, cols, 1.0 / std::sqrt(static_cast<double>(cols)), rng);
}

// Square orthogonal matrix from the QR factorisation of a Gaussian draw,
// with column signs fixed so the result is unique for a given draw.
template <typename Scalar>
Tensor<Scalar> orthogonal(Index n, Rng& rng) {
  const Eigen::MatrixXd a = standard_normal<double>(n, n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q.cast<Scalar>();
}

template <typename Scalar>
void add_lstm(ParameterSet<Scalar>& params, const std::string& prefix, Index input, Index hidden,
              Rng& rng) {
  params.add(prefix + "w_ih", fan_in_uniform<Scalar>(4 * hidden, input, rng));
  Tensor<Scalar> w_hh(4 * hidden, hidden);
  for (Index g = 0; g < 4; ++g) w_hh.middleRows(g * hidden, hidden) = orthogonal<Scalar>(hidden, rng);
  params.add(prefix + "w_hh", std::move(w_hh));
  params.add(prefix + "b", Tensor<Scalar>::Zero(1, 4 * hidden));
}

template <typename Scalar>
Var<Scalar> conv_block(Var<Scalar> x, const ParameterSet<Scalar>& params, const std::string& name,
                       const EncoderConfig& cfg, Mode mode, Rng& rng) {
  Tape<Scalar>& t = *x.tape;
  Var<Scalar> windows = unfold_rows(x, cfg.kernel, cfg.kernel / 2);
  Var<Scalar> y = dense_forward(windows, t.parameter(params, name + "w"), t.parameter(params, name + "b"));
  y = dropout(relu(y), cfg.dropout, mode, rng);
  return max_pool_rows(y, cfg.pool);
}

// One LSTM direction over the rows of `x`; returns hidden states in the
// original row order. Gate layout in the stacked weights: input, forget,
// cell candidate, output.
template <typename Scalar>
Var<Scalar> lstm_direction(Var<Scalar> x, const ParameterSet<Scalar>& params,
                           const std::string& prefix, Index hidden, bool reverse) {
  Tape<Scalar>& t = *x.tape;
  const Index n = x.rows();
  Var<Scalar> w_hh = t.parameter(params, prefix + "w_hh");
  Var<Scalar> projected =
      dense_forward(x, t.parameter(params, prefix + "w_ih"), t.parameter(params, prefix + "b"));
  std::vector<Var<Scalar>> outputs(static_cast<std::size_t>(n));
  Var<Scalar> h, c;
  for (Index step = 0; step < n; ++step) {
    const Index pos = reverse ? n - 1 - step : step;
    Var<Scalar> gates = gather_rows(projected, {pos});
    if (step > 0) gates = add(gates, linear(h, w_hh));
    Var<Scalar> i = sigmoid(slice_cols(gates, 0, hidden));
    Var<Scalar> f = sigmoid(slice_cols(gates, hidden, hidden));
    Var<Scalar> g = tanh(slice_cols(gates, 2 * hidden, hidden));
    Var<Scalar> o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    c = step > 0 ? add(mul(f, c), mul(i, g)) : mul(i, g);
    h = mul(o, tanh(c));
    outputs[static_cast<std::size_t>(pos)] = h;
  }
  return concat_rows<Scalar>(outputs);
}

}  // namespace detail

/// Adds freshly initialised encoder parameters under "encoder/".
template <typename Scalar>
void init_encoder(ParameterSet<Scalar>& params, const EncoderConfig& cfg, Rng& rng) {
  const std::string p = kEncoderPrefix;
  if (cfg.kind == EncoderKind::mean) {
    params.add(p + "mean_proj/w", detail::fan_in_uniform<Scalar>(cfg.mean_output_dim, cfg.word_dim, rng));
    params.add(p + "mean_proj/b", Tensor<Scalar>::Zero(1, cfg.mean_output_dim));
    return;
  }
  params.add(p + "char_conv1/w", detail::fan_in_uniform<Scalar>(cfg.filters1, cfg.kernel * cfg.char_dim, rng));
  params.add(p + "char_conv1/b", Tensor<Scalar>::Zero(1, cfg.filters1));
  params.add(p + "char_conv2/w", detail::fan_in_uniform<Scalar>(cfg.filters2, cfg.kernel * cfg.filters1, rng));
  params.add(p + "char_conv2/b", Tensor<Scalar>::Zero(1, cfg.filters2));
  const Index lstm_in = cfg.char_feature_dim() + cfg.word_dim;
  detail::add_lstm(params, p + "lstm_fwd/", lstm_in, cfg.hidden, rng);
  detail::add_lstm(params, p + "lstm_bwd/", lstm_in, cfg.hidden, rng);
}

/// Marks every encoder parameter non-trainable. Returns how many were touched.
template <typename Scalar>
std::size_t freeze_encoder(ParameterSet<Scalar>& params) {
  return params.set_trainable(kEncoderPrefix, false);
}

/// One-hot character matrix [len x char_dim] of a word.
template <typename Scalar>
Tensor<Scalar> char_one_hot(const std::string& word, const CharAlphabet& alphabet, Index char_dim) {
  const std::u32string chars = decode_utf8(word);
  if (chars.empty()) throw std::invalid_argument("char_one_hot: empty word");
  Tensor<Scalar> m = Tensor<Scalar>::Zero(static_cast<Index>(chars.size()), char_dim);
  for (std::size_t i = 0; i < chars.size(); ++i) {
    m(static_cast<Index>(i), static_cast<Index>(alphabet.index(chars[i]))) = Scalar(1);
  }
  return m;
}

/// Char-CNN word feature [1 x filters2] from a one-hot character matrix.
template <typename Scalar>
Var<Scalar> encode_word_chars(Var<Scalar> one_hot, const ParameterSet<Scalar>& params,
                              const EncoderConfig& cfg, Mode mode, Rng& rng) {
  if (one_hot.rows() == 0) throw ShapeError("encode_word_chars: empty word");
  if (one_hot.cols() != cfg.char_dim) {
    throw ShapeError("encode_word_chars: expected " + std::to_string(cfg.char_dim) +
                     " one-hot columns, got " + shape_string(one_hot.value()));
  }
  const std::string p = kEncoderPrefix;
  Var<Scalar> y = detail::conv_block(one_hot, params, p + "char_conv1/", cfg, mode, rng);
  y = detail::conv_block(y, params, p + "char_conv2/", cfg, mode, rng);
  return reduce_rows_max(y);
}

/// [n x d] token states -> [1 x 3d]: columnwise min, max and mean.
template <typename Scalar>
Var<Scalar> stats_pool(Var<Scalar> states) {
  return concat_cols({reduce_rows_min(states), reduce_rows_max(states), reduce_rows_mean(states)});
}

/// Sentence embedding [1 x output_dim] of a token sequence.
template <typename Scalar>
Var<Scalar> encode_tokens(Tape<Scalar>& tape, const std::vector<std::string>& tokens,
                          const ParameterSet<Scalar>& params, const EncoderConfig& cfg,
                          const TextResources& text, Mode mode, Rng& rng) {
  if (tokens.empty()) throw std::invalid_argument("encode_sentence: empty token list");
  if (text.vectors == nullptr) throw std::invalid_argument("encode_sentence: no word vectors");
  const Index n = static_cast<Index>(tokens.size());
  Tensor<Scalar> words(n, cfg.word_dim);
  for (Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd v = text.vectors->lookup(tokens[static_cast<std::size_t>(i)]);
    if (v.size() != cfg.word_dim) {
      throw ShapeError("encode_sentence: word vectors have dimension " + std::to_string(v.size()) +
                       ", encoder expects " + std::to_string(cfg.word_dim));
    }
    words.row(i) = v.cast<Scalar>();
  }
  const std::string p = kEncoderPrefix;
  if (cfg.kind == EncoderKind::mean) {
    Var<Scalar> mean = reduce_rows_mean(tape.constant(std::move(words)));
    return dense_forward(mean, tape.parameter(params, p + "mean_proj/w"),
                         tape.parameter(params, p + "mean_proj/b"));
  }
  if (text.alphabet == nullptr) throw std::invalid_argument("encode_sentence: no char alphabet");
  std::vector<Var<Scalar>> char_features;
  char_features.reserve(tokens.size());
  for (const auto& tok : tokens) {
    Var<Scalar> oh = tape.constant(char_one_hot<Scalar>(tok, *text.alphabet, cfg.char_dim));
    char_features.push_back(encode_word_chars(oh, params, cfg, mode, rng));
  }
  Var<Scalar> x = concat_cols({concat_rows<Scalar>(char_features), tape.constant(std::move(words))});
  Var<Scalar> fwd = detail::lstm_direction(x, params, p + "lstm_fwd/", cfg.hidden, false);
  Var<Scalar> bwd = detail::lstm_direction(x, params, p + "lstm_bwd/", cfg.hidden, true);
  return stats_pool(concat_cols({fwd, bwd}));
}

template <typename Scalar>
Var<Scalar> encode_sentence(Tape<Scalar>& tape, const Utterance& u, const ParameterSet<Scalar>& params,
                            const EncoderConfig& cfg, const TextResources& text, Mode mode, Rng& rng) {
  return encode_tokens(tape, u.tokens, params, cfg, text, mode, rng);
}

}  // namespace protoda

#endif  // PROTODA_ENCODER_ENCODER_HPP
