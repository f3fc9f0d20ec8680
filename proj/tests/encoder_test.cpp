#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "protoda/encoder/encoder.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <numeric>

using namespace protoda;
using protoda::testing::random_matrix;

namespace {

CharAlphabet test_alphabet() {
  std::vector<char32_t> chars;
  for (char32_t c = U'a'; c <= U'z'; ++c) chars.push_back(c);
  for (char32_t c : {U'0', U'1', U'2', U'\'', U'.'}) chars.push_back(c);
  return CharAlphabet(chars);
}

EmbeddingTable test_vectors(std::size_t dim, Rng& rng) {
  EmbeddingTable table(dim);
  for (const char* w : {"play", "some", "music", "now", "the", "weather", "book", "a"}) {
    std::vector<float> v(dim);
    std::normal_distribution<float> normal(0.0f, 0.5f);
    for (auto& x : v) x = normal(rng);
    table.insert(w, v);
  }
  return table;
}

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.filters1 = 3;
  cfg.filters2 = 4;
  cfg.word_dim = 5;
  cfg.hidden = 3;
  return cfg;
}

// Plain-loop reference for the char CNN in eval mode.
Eigen::RowVectorXd direct_char_cnn(const Tensor<double>& one_hot, const ParameterSet<double>& ps,
                                   const EncoderConfig& cfg) {
  auto conv_relu_pool = [&](const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
    const Index len = x.rows(), ch = x.cols(), pad = cfg.kernel / 2;
    Tensor<double> y(len, w.rows());
    for (Index i = 0; i < len; ++i) {
      for (Index f = 0; f < w.rows(); ++f) {
        double acc = b(0, f);
        for (Index j = 0; j < cfg.kernel; ++j) {
          const Index src = i + j - pad;
          if (src < 0 || src >= len) continue;
          for (Index c = 0; c < ch; ++c) acc += w(f, j * ch + c) * x(src, c);
        }
        y(i, f) = std::max(0.0, acc);
      }
    }
    const Index out_len = (len + cfg.pool - 1) / cfg.pool;
    Tensor<double> pooled(out_len, y.cols());
    for (Index o = 0; o < out_len; ++o) {
      for (Index f = 0; f < y.cols(); ++f) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index r = o * cfg.pool; r < std::min(len, (o + 1) * cfg.pool); ++r) m = std::max(m, y(r, f));
        pooled(o, f) = m;
      }
    }
    return pooled;
  };
  Tensor<double> h = conv_relu_pool(one_hot, ps.value("encoder/char_conv1/w"), ps.value("encoder/char_conv1/b"));
  h = conv_relu_pool(h, ps.value("encoder/char_conv2/w"), ps.value("encoder/char_conv2/b"));
  return h.colwise().maxCoeff();
}

Tensor<double> eval_word(const std::string& word, const ParameterSet<double>& ps,
                         const EncoderConfig& cfg, const CharAlphabet& alpha) {
  Tape<double> tape;
  Rng rng(0);
  return encode_word_chars(tape.constant(char_one_hot<double>(word, alpha, cfg.char_dim)), ps, cfg,
                           Mode::eval, rng)
      .value();
}

}  // namespace

TEST_CASE("full-size encoder emits 768-d sentence embeddings") {
  Rng rng(1);
  EncoderConfig cfg;
  CHECK(cfg.output_dim() == 768);
  ParameterSet<double> ps;
  init_encoder(ps, cfg, rng);
  for (const auto& name : ps.names()) CHECK(name.starts_with("encoder/"));
  const auto alpha = test_alphabet();
  const auto vectors = test_vectors(100, rng);
  const TextResources text{&alpha, &vectors};
  for (const char* s : {"play", "play some music now", "what's the weather in 2020 ?"}) {
    Tape<double> tape;
    auto e = encode_sentence(tape, make_utterance(s, "I", "t", Split::train), ps, cfg, text, Mode::train, rng);
    CHECK(e.rows() == 1);
    CHECK(e.cols() == 768);
    CHECK(e.value().allFinite());
  }
  Tape<double> tape;
  CHECK_THROWS_AS(encode_tokens(tape, {}, ps, cfg, text, Mode::eval, rng), std::invalid_argument);
}

TEST_CASE("single-token sentence repeats one state in all pooling blocks") {
  Rng rng(2);
  EncoderConfig cfg;
  ParameterSet<double> ps;
  init_encoder(ps, cfg, rng);
  const auto alpha = test_alphabet();
  const auto vectors = test_vectors(100, rng);
  Tape<double> tape;
  auto e = encode_tokens(tape, {"music"}, ps, cfg, {&alpha, &vectors}, Mode::eval, rng).value();
  CHECK((e.middleCols(0, 256) - e.middleCols(256, 256)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((e.middleCols(0, 256) - e.middleCols(512, 256)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("stats pooling: min, max, mean blocks and permutation invariance") {
  Tape<double> tape;
  Tensor<double> x(2, 2);
  x << 1, 2, 3, 4;
  Tensor<double> expected(1, 6);
  expected << 1, 2, 3, 4, 2, 3;
  CHECK(stats_pool(tape.constant(x)).value() == expected);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 7);
    Tensor<double> m = random_matrix(n, 5, rng);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor<double> shuffled(n, 5);
    for (Index i = 0; i < n; ++i) shuffled.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
    const auto a = stats_pool(tape.constant(m)).value();
    const auto b = stats_pool(tape.constant(shuffled)).value();
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("char CNN matches a direct convolution and has a fixed width") {
  Rng rng(4);
  EncoderConfig cfg;
  ParameterSet<double> ps;
  init_encoder(ps, cfg, rng);
  // biases are zero at init; exercise them too
  ps.value("encoder/char_conv1/b") = random_matrix(1, cfg.filters1, rng, 0.1);
  ps.value("encoder/char_conv2/b") = random_matrix(1, cfg.filters2, rng, 0.1);
  const auto alpha = test_alphabet();
  for (const std::string word : {"a", "ab", "abab", "weather", "supercalifragilistic", "zé"}) {
    CAPTURE(word);
    const auto got = eval_word(word, ps, cfg, alpha);
    CHECK(got.cols() == cfg.filters2);
    const auto want = direct_char_cnn(char_one_hot<double>(word, alpha, cfg.char_dim), ps, cfg);
    CHECK((got.row(0) - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("encoder gradients pass finite-difference checks on lengths 1 to 6") {
  Rng rng(5);
  const EncoderConfig cfg = small_config();
  const auto alpha = test_alphabet();
  const auto vectors = test_vectors(static_cast<std::size_t>(cfg.word_dim), rng);
  const std::vector<std::string> pool{"play", "some", "music", "now", "the", "unknownword"};
  for (std::size_t len = 1; len <= 6; ++len) {
    CAPTURE(len);
    ParameterSet<double> ps;
    init_encoder(ps, cfg, rng);
    for (auto& [name, p] : ps) p.value += random_matrix(p.value.rows(), p.value.cols(), rng, 0.1);
    std::vector<std::string> tokens(pool.begin(), pool.begin() + static_cast<long>(len));
    const Tensor<double> weights = random_matrix(1, cfg.output_dim(), rng);
    LossFn loss = [&](Tape<double>& tape, const ParameterSet<double>& p) {
      Rng unused(0);
      auto e = encode_tokens(tape, tokens, p, cfg, {&alpha, &vectors}, Mode::eval, unused);
      return sum_all(mul_const(e, weights));
    };
    // h = 1e-5: at 1e-4 a pooled maximum can change hands inside the stencil
    const auto report = grad_check(loss, ps, 1e-5);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("mean encoder: shape and gradients") {
  Rng rng(6);
  EncoderConfig cfg;
  cfg.kind = EncoderKind::mean;
  cfg.word_dim = 5;
  cfg.mean_output_dim = 7;
  ParameterSet<double> ps;
  init_encoder(ps, cfg, rng);
  CHECK(ps.size() == 2);
  const auto vectors = test_vectors(5, rng);
  const Tensor<double> weights = random_matrix(1, 7, rng);
  LossFn loss = [&](Tape<double>& tape, const ParameterSet<double>& p) {
    Rng unused(0);
    auto e = encode_tokens(tape, {"play", "music"}, p, cfg, {nullptr, &vectors}, Mode::eval, unused);
    return sum_all(mul_const(e, weights));
  };
  CHECK(grad_check(loss, ps).passed());
  CHECK(parse_encoder_kind(to_string(EncoderKind::mean)) == EncoderKind::mean);
  CHECK_THROWS_AS(parse_encoder_kind("transformer"), std::invalid_argument);
}

TEST_CASE("eval-mode encoding is deterministic; train mode applies dropout") {
  Rng rng(7);
  EncoderConfig cfg;
  ParameterSet<double> ps;
  init_encoder(ps, cfg, rng);
  const auto alpha = test_alphabet();
  const auto vectors = test_vectors(100, rng);
  const TextResources text{&alpha, &vectors};
  auto run = [&](Mode mode, std::uint64_t seed) {
    Tape<double> tape;
    Rng r(seed);
    return encode_tokens(tape, {"book", "a", "table"}, ps, cfg, text, mode, r).value();
  };
  CHECK(run(Mode::eval, 1) == run(Mode::eval, 2));
  CHECK(run(Mode::train, 1) == run(Mode::train, 1));
  CHECK(run(Mode::train, 1) != run(Mode::train, 2));
}

TEST_CASE("freezing the encoder") {
  Rng rng(8);
  const EncoderConfig cfg = small_config();
  ParameterSet<double> ps;
  init_encoder(ps, cfg, rng);
  ps.add("protonet/l1/w", random_matrix(2, 2, rng));
  const std::size_t n_encoder = ps.names("encoder/").size();
  CHECK(freeze_encoder(ps) == n_encoder);
  const auto digest = parameter_digest(ps, "encoder/");
  CHECK(freeze_encoder(ps) == n_encoder);
  CHECK(parameter_digest(ps, "encoder/") == digest);
  for (const auto& name : ps.names("encoder/")) CHECK_FALSE(ps.at(name).trainable);
  CHECK(ps.at("protonet/l1/w").trainable);

  const Tensor<double> head_before = ps.value("protonet/l1/w");
  for (int step = 0; step < 100; ++step) {
    GradientMap<double> g;
    for (const auto& [name, p] : ps) g.emplace(name, Tensor<double>::Ones(p.value.rows(), p.value.cols()));
    adam_step(ps, g, AdamOptions{});
  }
  CHECK(parameter_digest(ps, "encoder/") == digest);
  CHECK(ps.value("protonet/l1/w") != head_before);
}
