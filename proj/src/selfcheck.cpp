#include "protoda/selfcheck/selfcheck.hpp"

#include "protoda/augment/augment.hpp"
#include "protoda/encoder/encoder.hpp"
#include "protoda/eval/metrics.hpp"
#include "protoda/numerics/grad_check.hpp"
#include "protoda/protonet/protonet.hpp"
#include "protoda/selfcheck/oracles.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>

namespace protoda {

bool SelfcheckReport::passed() const {
  return std::all_of(items.begin(), items.end(), [](const SelfcheckItem& i) { return i.passed; });
}

std::vector<std::string> SelfcheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& i : items)
    if (!i.passed) out.push_back(i.name);
  return out;
}

std::string SelfcheckReport::text() const {
  std::string out;
  char buf[256];
  for (const auto& i : items) {
    std::snprintf(buf, sizeof(buf), "%s  %-8s  %-32s  error %.3e  tol %.1e", i.passed ? "PASS" : "FAIL",
                  i.group.c_str(), i.name.c_str(), i.error, i.tolerance);
    out += buf;
    if (!i.detail.empty()) out += "  (" + i.detail + ")";
    out += "\n";
  }
  std::size_t failed = 0;
  for (const auto& i : items) failed += !i.passed;
  std::snprintf(buf, sizeof(buf), "%zu checks, %zu failed\n", items.size(), failed);
  return out + buf;
}

namespace {

using Mat = Tensor<double>;
using MakeLoss = std::function<LossFn(Rng&, ParameterSet<double>&)>;

Mat randn(Index r, Index c, Rng& rng, double s = 1.0) { return standard_normal<double>(r, c, rng) * s; }

/// Entries pairwise >= 0.06 apart and >= 0.03 away from zero, so relu and
/// max kinks stay far outside the finite-difference stencil.
Mat separated(Index r, Index c, Rng& rng) {
  const Index n = r * c;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = (static_cast<double>(i) - static_cast<double>(n) / 2.0 + 0.5) * 0.1;
  std::shuffle(v.begin(), v.end(), rng);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  Mat m(r, c);
  for (Index i = 0; i < n; ++i) m.data()[i] = v[static_cast<std::size_t>(i)] + jitter(rng);
  return m;
}

Mat positive(Index r, Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Index dim(Rng& rng, Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); }

/// sum(w .* y) with weights fixed by the output shape.
Var<double> weighted_sum(Var<double> y, std::uint64_t seed) {
  Rng r(seed);
  return sum_all(mul_const(y, randn(y.rows(), y.cols(), r)));
}

MakeLoss unary(std::function<Var<double>(Var<double>)> op, std::function<Mat(Rng&)> gen) {
  return [op, gen](Rng& rng, ParameterSet<double>& ps) -> LossFn {
    ps.add("x", gen(rng));
    const std::uint64_t w = rng();
    return [op, w](Tape<double>& t, const ParameterSet<double>& p) { return weighted_sum(op(t.parameter(p, "x")), w); };
  };
}

MakeLoss binary(std::function<Var<double>(Var<double>, Var<double>)> op,
                std::function<std::pair<Mat, Mat>(Rng&)> gen) {
  return [op, gen](Rng& rng, ParameterSet<double>& ps) -> LossFn {
    auto [a, b] = gen(rng);
    ps.add("a", a);
    ps.add("b", b);
    const std::uint64_t w = rng();
    return [op, w](Tape<double>& t, const ParameterSet<double>& p) {
      return weighted_sum(op(t.parameter(p, "a"), t.parameter(p, "b")), w);
    };
  };
}

ProtoHeadConfig small_head(Index in, Index hidden, Index out) {
  ProtoHeadConfig h;
  h.input_dim = in;
  h.hidden = hidden;
  h.output_dim = out;
  return h;
}

/// Head (and optionally generator) with nonzero biases.
void init_head(ParameterSet<double>& ps, const ProtoHeadConfig& h, Rng& rng) {
  init_proto_head(ps, h, rng);
  ps.value("protonet/l1/b") = randn(1, h.hidden, rng, 0.1);
  ps.value("protonet/l2/b") = randn(1, h.output_dim, rng, 0.1);
}

void init_generator(ParameterSet<double>& ps, Index d, Rng& rng) {
  init_identity(ps, d);
  for (const char* n : {"hallucinator/l1/w", "hallucinator/l2/w"}) ps.value(n).array() += randn(ps.value(n).rows(), ps.value(n).cols(), rng, 0.2).array();
  ps.value("hallucinator/l1/b") = randn(1, d, rng, 0.1);
  ps.value("hallucinator/l2/b") = randn(1, d, rng, 0.1);
}

/// Finite differences are meaningless within a stencil of a relu kink or of
/// sqrt at zero, so composed checks redraw instances until every
/// pre-activation (and every euclidean distance) clears this margin.
constexpr double kKinkMargin = 1e-2;

/// Forward pass of the two-layer relu net under `prefix`, outside any tape.
/// `margin` tracks the smallest |pre-activation|.
Mat relu_net(const ParameterSet<double>& ps, const std::string& prefix, const Mat& x, double& margin) {
  Mat a = (x * ps.value(prefix + "l1/w").transpose()).rowwise() + ps.value(prefix + "l1/b").row(0);
  margin = std::min(margin, a.cwiseAbs().minCoeff());
  Mat b = (a.cwiseMax(0.0) * ps.value(prefix + "l2/w").transpose()).rowwise() + ps.value(prefix + "l2/b").row(0);
  margin = std::min(margin, b.cwiseAbs().minCoeff());
  return b.cwiseMax(0.0);
}

double min_sq_distance(const Mat& a, const Mat& b) {
  double m = 1e300;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) m = std::min(m, (a.row(i) - b.row(j)).squaredNorm());
  return m;
}

/// Calls draw(local) on fresh parameter sets until it reports a margin above
/// kKinkMargin, then moves the winner into `ps`.
template <typename Draw>
void draw_clear_of_kinks(ParameterSet<double>& ps, Draw draw) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    ParameterSet<double> local;
    if (draw(local) > kKinkMargin) {
      ps = std::move(local);
      return;
    }
  }
  throw std::runtime_error("selfcheck: no instance clear of kinks");
}

/// Episode loss over 2 classes x 3 supports with hallucinated prototypes.
MakeLoss augmented_episode(AugmentSpace space) {
  return [space](Rng& rng, ParameterSet<double>& ps) -> LossFn {
    const Index E = dim(rng, 3, 5), P = dim(rng, 2, 4);
    const ProtoHeadConfig head = small_head(E, 4, P);
    const Index zd = space == AugmentSpace::sentence ? E : P;
    Mat s, q, z0, z1;
    draw_clear_of_kinks(ps, [&](ParameterSet<double>& local) {
      init_head(local, head, rng);
      init_generator(local, zd, rng);
      s = randn(6, E, rng);
      q = randn(4, E, rng);
      z0 = randn(1, zd, rng);
      z1 = randn(1, zd, rng);
      double m = 1e300;
      const Mat fs = relu_net(local, "protonet/", s, m);
      relu_net(local, "protonet/", q, m);
      Mat u(2, zd);
      if (space == AugmentSpace::sentence) {
        u << s.row(1), s.row(4);
      } else {
        u << fs.row(1), fs.row(4);
      }
      Mat uz(2, 2 * zd);
      uz << u, (Mat(2, zd) << z0, z1).finished();
      const Mat fake = relu_net(local, "hallucinator/", uz, m);
      if (space == AugmentSpace::sentence) relu_net(local, "protonet/", fake, m);
      return m;
    });
    return [=](Tape<double>& t, const ParameterSet<double>& p) {
      Rng unused(0);
      AugmentConfig aug;
      aug.space = space;
      Var<double> sv = t.constant(s);
      auto proto = [&](std::vector<Index> rows, const Mat& z) {
        Var<double> cls = gather_rows(sv, rows);
        return space == AugmentSpace::sentence
                   ? augmented_prototype_sentence(cls, {1}, z, p, head, aug, Mode::eval, unused)
                   : augmented_prototype_proto(cls, {1}, z, p, head, aug, Mode::eval, unused);
      };
      Var<double> protos = concat_rows({proto({0, 1, 2}, z0), proto({3, 4, 5}, z1)});
      return episode_loss(project(t.constant(q), p, head, Mode::eval, unused), {0, 0, 1, 1}, protos,
                          Distance::squared_euclidean);
    };
  };
}

struct GradientCheck {
  std::string name;
  MakeLoss make;
  double h = 1e-4;
  /// Redraw instances that fail smooth_at (composed losses only).
  bool screen = false;
};

/// Central differences at h and 2h agree for every coordinate. Uses no
/// analytic gradient, so it cannot hide a wrong backward pass; it only
/// rejects points where some max or relu switches inside the stencil.
bool smooth_at(const LossFn& loss, ParameterSet<double> ps, double h) {
  auto f = [&] {
    Tape<double> t;
    return loss(t, ps).scalar();
  };
  for (auto& [name, p] : ps) {
    if (!p.trainable) continue;
    for (Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      auto diff = [&](double step) {
        x = saved + step;
        const double up = f();
        x = saved - step;
        const double down = f();
        x = saved;
        return (up - down) / (2 * step);
      };
      if (gradient_relative_error(diff(h), diff(2 * h)) > 1e-5) return false;
    }
  }
  return true;
}

std::vector<GradientCheck> gradient_checks() {
  auto pair_same = [](Rng& rng) {
    const Index r = dim(rng, 1, 4), c = dim(rng, 1, 5);
    return std::pair{randn(r, c, rng), randn(r, c, rng)};
  };
  std::vector<GradientCheck> g;
  g.push_back({"dense_forward", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 const Index n = dim(rng, 1, 4), in = dim(rng, 1, 5), out = dim(rng, 1, 5);
                 ps.add("x", randn(n, in, rng));
                 ps.add("w", randn(out, in, rng));
                 ps.add("b", randn(1, out, rng));
                 const std::uint64_t w = rng();
                 return [w](Tape<double>& t, const ParameterSet<double>& p) {
                   return weighted_sum(dense_forward(t.parameter(p, "x"), t.parameter(p, "w"), t.parameter(p, "b")), w);
                 };
               }});
  g.push_back({"linear", binary([](Var<double> a, Var<double> b) { return linear(a, b); },
                                [](Rng& rng) {
                                  const Index in = dim(rng, 1, 5);
                                  return std::pair{randn(dim(rng, 1, 4), in, rng), randn(dim(rng, 1, 4), in, rng)};
                                })});
  auto shape = [](Rng& rng) { return std::pair{dim(rng, 1, 4), dim(rng, 1, 5)}; };
  g.push_back({"relu", unary([](Var<double> x) { return relu(x); },
                             [shape](Rng& rng) { auto [r, c] = shape(rng); return separated(r, c, rng); })});
  g.push_back({"sigmoid", unary([](Var<double> x) { return sigmoid(x); },
                                [shape](Rng& rng) { auto [r, c] = shape(rng); return randn(r, c, rng, 2.0); })});
  g.push_back({"tanh", unary([](Var<double> x) { return protoda::tanh(x); },
                             [shape](Rng& rng) { auto [r, c] = shape(rng); return randn(r, c, rng); })});
  g.push_back({"add", binary([](Var<double> a, Var<double> b) { return add(a, b); }, pair_same)});
  g.push_back({"sub", binary([](Var<double> a, Var<double> b) { return sub(a, b); }, pair_same)});
  g.push_back({"mul", binary([](Var<double> a, Var<double> b) { return mul(a, b); }, pair_same)});
  g.push_back({"scale", unary([](Var<double> x) { return scale(x, -2.5); },
                              [shape](Rng& rng) { auto [r, c] = shape(rng); return randn(r, c, rng); })});
  g.push_back({"add_const", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 const Index r = dim(rng, 1, 4), c = dim(rng, 1, 5);
                 ps.add("x", randn(r, c, rng));
                 const Mat k = randn(r, c, rng);
                 const std::uint64_t w = rng();
                 return [k, w](Tape<double>& t, const ParameterSet<double>& p) { return weighted_sum(add_const(t.parameter(p, "x"), k), w); };
               }});
  g.push_back({"mul_const", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 const Index r = dim(rng, 1, 4), c = dim(rng, 1, 5);
                 ps.add("x", randn(r, c, rng));
                 const Mat k = randn(r, c, rng);
                 const std::uint64_t w = rng();
                 return [k, w](Tape<double>& t, const ParameterSet<double>& p) { return weighted_sum(mul_const(t.parameter(p, "x"), k), w); };
               }});
  g.push_back({"dropout", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 ps.add("x", randn(dim(rng, 1, 4), dim(rng, 2, 6), rng));
                 const std::uint64_t mask = rng(), w = rng();
                 return [mask, w](Tape<double>& t, const ParameterSet<double>& p) {
                   Rng r(mask);  // same mask on every evaluation
                   return weighted_sum(dropout(t.parameter(p, "x"), 0.3, Mode::train, r), w);
                 };
               }});
  g.push_back({"concat_cols", binary([](Var<double> a, Var<double> b) { return concat_cols({a, b, a}); },
                                     [](Rng& rng) {
                                       const Index r = dim(rng, 1, 4);
                                       return std::pair{randn(r, dim(rng, 1, 3), rng), randn(r, dim(rng, 1, 3), rng)};
                                     })});
  g.push_back({"concat_rows", binary([](Var<double> a, Var<double> b) { return concat_rows({b, a, b}); },
                                     [](Rng& rng) {
                                       const Index c = dim(rng, 1, 4);
                                       return std::pair{randn(dim(rng, 1, 3), c, rng), randn(dim(rng, 1, 3), c, rng)};
                                     })});
  g.push_back({"slice_cols", unary([](Var<double> x) { return slice_cols(x, 1, x.cols() - 2); },
                                   [](Rng& rng) { return randn(dim(rng, 1, 4), dim(rng, 3, 6), rng); })});
  g.push_back({"gather_rows", unary([](Var<double> x) { return gather_rows(x, {2, 0, 2, 1}); },
                                    [](Rng& rng) { return randn(3, dim(rng, 1, 4), rng); })});
  g.push_back({"unfold_rows", unary([](Var<double> x) { return unfold_rows(x, 3, 1); },
                                    [](Rng& rng) { return randn(dim(rng, 1, 6), dim(rng, 1, 3), rng); })});
  g.push_back({"max_pool_rows", unary([](Var<double> x) { return max_pool_rows(x, 2); },
                                      [](Rng& rng) { return separated(dim(rng, 1, 7), dim(rng, 1, 3), rng); })});
  g.push_back({"reduce_rows_max", unary([](Var<double> x) { return reduce_rows_max(x); },
                                        [](Rng& rng) { return separated(dim(rng, 1, 5), dim(rng, 1, 4), rng); })});
  g.push_back({"reduce_rows_min", unary([](Var<double> x) { return reduce_rows_min(x); },
                                        [](Rng& rng) { return separated(dim(rng, 1, 5), dim(rng, 1, 4), rng); })});
  g.push_back({"reduce_rows_mean", unary([](Var<double> x) { return reduce_rows_mean(x); },
                                         [](Rng& rng) { return randn(dim(rng, 1, 5), dim(rng, 1, 4), rng); })});
  g.push_back({"sum_all", unary([](Var<double> x) { return scale(sum_all(x), 1.7); },
                                [](Rng& rng) { return randn(dim(rng, 1, 5), dim(rng, 1, 4), rng); })});
  g.push_back({"squared_distances", binary([](Var<double> a, Var<double> b) { return squared_distances(a, b); },
                                           [](Rng& rng) {
                                             const Index c = dim(rng, 1, 5);
                                             return std::pair{randn(dim(rng, 1, 4), c, rng), randn(dim(rng, 1, 4), c, rng)};
                                           })});
  g.push_back({"elementwise_sqrt", unary([](Var<double> x) { return elementwise_sqrt(x); },
                                         [](Rng& rng) { return positive(dim(rng, 1, 4), dim(rng, 1, 4), rng); })});
  g.push_back({"softmax_cross_entropy", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 const Index n = dim(rng, 1, 5), c = dim(rng, 2, 5);
                 ps.add("x", randn(n, c, rng, 2.0));
                 std::vector<Index> labels;
                 for (Index i = 0; i < n; ++i) labels.push_back(dim(rng, 0, c - 1));
                 return [labels](Tape<double>& t, const ParameterSet<double>& p) {
                   return softmax_cross_entropy(t.parameter(p, "x"), labels);
                 };
               }});

  // composed losses
  g.push_back({"prototype", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 const Index E = dim(rng, 2, 5);
                 const ProtoHeadConfig head = small_head(E, 4, 3);
                 Mat s;
                 draw_clear_of_kinks(ps, [&](ParameterSet<double>& local) {
                   init_head(local, head, rng);
                   s = randn(dim(rng, 1, 5), E, rng);
                   double m = 1e300;
                   relu_net(local, "protonet/", s, m);
                   return m;
                 });
                 const std::uint64_t w = rng();
                 return [=](Tape<double>& t, const ParameterSet<double>& p) {
                   Rng unused(0);
                   return weighted_sum(compute_prototype(project(t.constant(s), p, head, Mode::eval, unused)), w);
                 };
               },
               1e-4, true});
  for (Distance d : {Distance::squared_euclidean, Distance::euclidean}) {
    g.push_back({"episode_loss_" + to_string(d), [d](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                   const Index E = dim(rng, 2, 5);
                   const ProtoHeadConfig head = small_head(E, 5, 4);
                   Mat s, q;
                   draw_clear_of_kinks(ps, [&](ParameterSet<double>& local) {
                     init_head(local, head, rng);
                     s = randn(6, E, rng);
                     q = randn(4, E, rng);
                     double m = 1e300;
                     const Mat fs = relu_net(local, "protonet/", s, m);
                     const Mat fq = relu_net(local, "protonet/", q, m);
                     Mat protos(2, fs.cols());
                     protos << fs.topRows(3).colwise().mean(), fs.bottomRows(3).colwise().mean();
                     if (d == Distance::euclidean) m = std::min(m, min_sq_distance(fq, protos));
                     return m;
                   });
                   return [=](Tape<double>& t, const ParameterSet<double>& p) {
                     Rng unused(0);
                     Var<double> sp = project(t.constant(s), p, head, Mode::eval, unused);
                     Var<double> protos = concat_rows({compute_prototype(gather_rows(sp, {0, 1, 2})),
                                                       compute_prototype(gather_rows(sp, {3, 4, 5}))});
                     return episode_loss(project(t.constant(q), p, head, Mode::eval, unused), {0, 1, 1, 0}, protos, d);
                   };
                 },
                 1e-4, true});
  }
  g.push_back({"augmented_prototype_sentence", augmented_episode(AugmentSpace::sentence), 1e-4, true});
  g.push_back({"augmented_prototype_proto", augmented_episode(AugmentSpace::proto), 1e-4, true});
  g.push_back({"noise_perturb", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 const Index r = dim(rng, 1, 4), c = dim(rng, 1, 5);
                 ps.add("x", randn(r, c, rng));
                 const auto noise = draw_noise<double>(r, RowVector<double>::Ones(c), 0.5, rng);
                 const std::uint64_t w = rng();
                 return [noise, w](Tape<double>& t, const ParameterSet<double>& p) {
                   return weighted_sum(perturb(t.parameter(p, "x"), noise), w);
                 };
               }});
  // max pooling inside the character CNN puts kinks closer together than
  // any input spacing can guarantee; a narrower stencil keeps them outside
  g.push_back({"sentence_encoder", [](Rng& rng, ParameterSet<double>& ps) -> LossFn {
                 EncoderConfig cfg;
                 cfg.kernel = 3;
                 cfg.filters1 = 3;
                 cfg.filters2 = 4;
                 cfg.word_dim = 5;
                 cfg.hidden = 3;
                 init_encoder(ps, cfg, rng);
                 for (auto& [name, prm] : ps)
                   if (name.ends_with("/b")) prm.value = randn(prm.value.rows(), prm.value.cols(), rng, 0.1);
                 static const std::vector<std::string> words{"play", "some", "jazz", "now", "a", "weather"};
                 auto vectors = std::make_shared<EmbeddingTable>(5);
                 for (const auto& wd : words) {
                   std::vector<float> v(5);
                   for (auto& x : v) x = static_cast<float>(std::normal_distribution<double>()(rng));
                   vectors->insert(wd, v);
                 }
                 auto alphabet = std::make_shared<CharAlphabet>(std::vector<char32_t>{U'a', U'e', U'o', U'p', U's', U'n', U'w'});
                 std::vector<std::string> tokens;
                 const Index len = dim(rng, 1, 4);
                 for (Index i = 0; i < len; ++i) tokens.push_back(words[static_cast<std::size_t>(dim(rng, 0, 5))]);
                 const std::uint64_t w = rng();
                 return [=](Tape<double>& t, const ParameterSet<double>& p) {
                   Rng unused(0);
                   return weighted_sum(encode_tokens(t, tokens, p, cfg, TextResources{alphabet.get(), vectors.get()}, Mode::eval, unused), w);
                 };
               },
               1e-5, true});
  return g;
}

oracle::Mat rows_of(const Mat& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(m(i, j));
  return out;
}

oracle::Vec vec_of(const Mat& m) { return rows_of(m).at(0); }

double max_diff(const Mat& got, const oracle::Vec& want) {
  double e = 0;
  for (Index j = 0; j < got.cols(); ++j) e = std::max(e, std::abs(got(0, j) - want[static_cast<std::size_t>(j)]));
  return e;
}

oracle::TwoLayer net(const ParameterSet<double>& ps, const std::string& prefix) {
  return {rows_of(ps.value(prefix + "l1/w")), vec_of(ps.value(prefix + "l1/b")), rows_of(ps.value(prefix + "l2/w")),
          vec_of(ps.value(prefix + "l2/b"))};
}

SelfcheckItem item(std::string group, std::string name, double err, double tol, std::string detail = {}) {
  return {std::move(group), std::move(name), err < tol || (tol == 0.0 && err == 0.0), err, tol, std::move(detail)};
}

void oracle_checks(const SelfcheckOptions& opt, SelfcheckReport& rep) {
  const std::size_t N = opt.instances;
  Rng rng(opt.seed ^ 0x5eedULL);
  double e_proto = 0, e_post = 0, e_loss = 0, e_sent = 0, e_pspace = 0, e_f1 = 0;
  for (std::size_t it = 0; it < N; ++it) {
    Tape<double> tape;
    const Index C = dim(rng, 1, 5), d = dim(rng, 1, 6), k = dim(rng, 1, 6);
    const Mat s = randn(C * k, d, rng);
    Mat protos(C, d);
    oracle::Mat want_protos;
    for (Index c = 0; c < C; ++c) {
      protos.row(c) = compute_prototype(tape.constant(Mat(s.middleRows(c * k, k)))).value();
      want_protos.push_back(oracle::mean(rows_of(s.middleRows(c * k, k))));
      e_proto = std::max(e_proto, max_diff(protos.row(c), want_protos.back()));
    }
    const Mat q = randn(dim(rng, 1, 6), d, rng);
    std::vector<Index> labels;
    std::vector<std::size_t> olabels;
    for (Index i = 0; i < q.rows(); ++i) {
      labels.push_back(dim(rng, 0, C - 1));
      olabels.push_back(static_cast<std::size_t>(labels.back()));
    }
    for (Distance dist : {Distance::squared_euclidean, Distance::euclidean}) {
      const bool sq = dist == Distance::squared_euclidean;
      const auto p = posteriors(RowVector<double>(q.row(0)), protos, dist);
      e_post = std::max(e_post, max_diff(p, oracle::posteriors(vec_of(q), want_protos, sq)));
      const double got = episode_loss(tape.constant(q), labels, tape.constant(protos), dist).scalar();
      e_loss = std::max(e_loss, std::abs(got - oracle::episode_loss(rows_of(q), olabels, want_protos, sq)));
    }

    // augmented prototypes with random head and generator
    const Index E = dim(rng, 1, 5), P = dim(rng, 1, 4), n = dim(rng, 1, 6);
    const ProtoHeadConfig head = small_head(E, dim(rng, 1, 5), P);
    const Mat e = randn(n, E, rng);
    const std::vector<Index> subset = select_hallucination_subset(static_cast<std::size_t>(n), 0.5, rng);
    std::vector<std::size_t> osubset(subset.begin(), subset.end());
    const Index m = static_cast<Index>(subset.size());
    AugmentConfig aug;
    Rng unused(0);
    for (AugmentSpace space : {AugmentSpace::sentence, AugmentSpace::proto}) {
      ParameterSet<double> ps;
      init_head(ps, head, rng);
      const Index gd = space == AugmentSpace::sentence ? E : P;
      init_generator(ps, gd, rng);
      const Mat z = randn(m, gd, rng);
      Tape<double> t;
      const auto f = net(ps, "protonet/");
      const auto g = net(ps, "hallucinator/");
      if (space == AugmentSpace::sentence) {
        const Mat got = augmented_prototype_sentence(t.constant(e), subset, z, ps, head, aug, Mode::eval, unused).value();
        e_sent = std::max(e_sent, max_diff(got, oracle::augmented_prototype_sentence(rows_of(e), osubset, rows_of(z), f, g)));
      } else {
        const Mat got = augmented_prototype_proto(t.constant(e), subset, z, ps, head, aug, Mode::eval, unused).value();
        e_pspace = std::max(e_pspace, max_diff(got, oracle::augmented_prototype_proto(rows_of(e), osubset, rows_of(z), f, g)));
      }
    }

    const std::size_t len = static_cast<std::size_t>(dim(rng, 1, 30));
    std::vector<Index> pred, gold;
    std::vector<int> opred, ogold;
    for (std::size_t i = 0; i < len; ++i) {
      pred.push_back(dim(rng, 0, C));
      gold.push_back(dim(rng, 0, C));
      opred.push_back(static_cast<int>(pred.back()));
      ogold.push_back(static_cast<int>(gold.back()));
    }
    e_f1 = std::max(e_f1, std::abs(micro_f1(pred, gold) - oracle::micro_f1(opred, ogold)));
  }
  const std::string n = std::to_string(N) + " instances";
  rep.items.push_back(item("oracle", "compute_prototype", e_proto, 1e-12, n));
  rep.items.push_back(item("oracle", "posteriors", e_post, 1e-10, n));
  rep.items.push_back(item("oracle", "episode_loss", e_loss, 1e-10, n));
  rep.items.push_back(item("oracle", "augmented_prototype_sentence", e_sent, 1e-10, n));
  rep.items.push_back(item("oracle", "augmented_prototype_proto", e_pspace, 1e-10, n));
  rep.items.push_back(item("oracle", "micro_f1", e_f1, 1e-12, n));
}

void property_checks(const SelfcheckOptions& opt, SelfcheckReport& rep) {
  Rng rng(opt.seed ^ 0x9e3779b9ULL);
  Rng unused(0);

  double e_id = 0;
  for (Index d : {Index(1), Index(7), Index(128), Index(768)}) {
    ParameterSet<double> ps;
    init_identity(ps, d);
    const Mat u = randn(4, d, rng).cwiseAbs();
    Tape<double> t;
    const Mat g = hallucinate(t.constant(u), t.constant(Mat::Zero(4, d)), ps, 0.2, Mode::eval, unused).value();
    e_id = std::max(e_id, (g - u).cwiseAbs().maxCoeff());
  }
  rep.items.push_back(item("property", "identity_hallucinator", e_id, 1e-12, "dims 1, 7, 128, 768"));

  // identity generator, zero noise, nonnegative inputs: weighted means
  double e_deg = 0;
  for (int it = 0; it < 50; ++it) {
    const Index E = dim(rng, 1, 6), P = dim(rng, 1, 5), n = dim(rng, 1, 10);
    const ProtoHeadConfig head = small_head(E, 4, P);
    const Mat e = randn(n, E, rng).cwiseAbs();
    const auto subset = select_hallucination_subset(static_cast<std::size_t>(n), 0.2, rng);
    for (AugmentSpace space : {AugmentSpace::sentence, AugmentSpace::proto}) {
      ParameterSet<double> ps;
      init_head(ps, head, rng);
      const Index gd = space == AugmentSpace::sentence ? E : P;
      init_identity(ps, gd);
      const Mat z = Mat::Zero(static_cast<Index>(subset.size()), gd);
      Tape<double> t;
      AugmentConfig aug;
      const Mat f = project(t.constant(e), ps, head, Mode::eval, unused).value();
      Mat want = f.colwise().sum();
      for (Index j : subset) want += f.row(j);
      want /= static_cast<double>(n + static_cast<Index>(subset.size()));
      const Mat got = space == AugmentSpace::sentence
                          ? augmented_prototype_sentence(t.constant(e), subset, z, ps, head, aug, Mode::eval, unused).value()
                          : augmented_prototype_proto(t.constant(e), subset, z, ps, head, aug, Mode::eval, unused).value();
      e_deg = std::max(e_deg, (got - want).cwiseAbs().maxCoeff());
    }
  }
  rep.items.push_back(item("property", "identity_degeneracy", e_deg, 1e-12, "both spaces reduce to weighted means"));

  double e_sum = 0;
  for (int it = 0; it < 200; ++it) {
    const Index C = dim(rng, 1, 8), d = dim(rng, 1, 6);
    const auto p = posteriors(RowVector<double>(randn(1, d, rng, 3.0)), randn(C, d, rng, 3.0));
    e_sum = std::max(e_sum, std::abs(p.sum() - 1.0));
  }
  rep.items.push_back(item("property", "posteriors_sum_to_one", e_sum, 1e-6));

  double e_noise = 0;
  for (int it = 0; it < 50; ++it) {
    const Mat s = randn(dim(rng, 1, 10), dim(rng, 1, 6), rng);
    const Mat out = noise_augment<double>(s, RowVector<double>::Zero(s.cols()), 0.2, 0.1, rng);
    for (Index r = s.rows(); r < out.rows(); ++r) {
      double best = 1e300;
      for (Index i = 0; i < s.rows(); ++i) best = std::min(best, (out.row(r) - s.row(i)).cwiseAbs().maxCoeff());
      e_noise = std::max(e_noise, best);
    }
  }
  rep.items.push_back(item("property", "zero_variance_noise_noop", e_noise, 0.0));

  double e_size = 0;
  for (std::size_t k : {std::size_t{5}, std::size_t{10}}) {
    const double aug = static_cast<double>(k + augmentation_count(k, 0.2));
    e_size = std::max(e_size, std::abs(aug - 1.2 * static_cast<double>(k)));
  }
  rep.items.push_back(item("property", "augmented_support_size", e_size, 1e-12, "k = 5, 10"));
}

}  // namespace

std::vector<std::string> selfcheck_names() {
  std::vector<std::string> out;
  for (const auto& g : gradient_checks()) out.push_back(g.name);
  for (const char* n : {"compute_prototype", "posteriors", "episode_loss", "augmented_prototype_sentence",
                        "augmented_prototype_proto", "micro_f1", "identity_hallucinator", "identity_degeneracy",
                        "posteriors_sum_to_one", "zero_variance_noise_noop", "augmented_support_size"}) {
    out.push_back(n);
  }
  return out;
}

SelfcheckReport run_selfcheck(const SelfcheckOptions& opt) {
  SelfcheckReport rep;
  std::uint64_t salt = 0;
  for (const auto& check : gradient_checks()) {
    ++salt;
    double worst = 0;
    std::size_t redrawn = 0;
    std::string detail;
    GradientHook hook;
    if (check.name == opt.corrupt) {
      hook = [](GradientMap<double>& g) {
        for (auto& [n, t] : g) t = (t * 1.5).array() + 0.1;
      };
    }
    try {
      for (std::size_t s = 0; s < opt.seeds; ++s) {
        Rng rng(opt.seed * 1000003ULL + salt * 7919ULL + s);
        ParameterSet<double> ps;
        LossFn loss = check.make(rng, ps);
        for (int attempt = 1; check.screen && !smooth_at(loss, ps, check.h); ++attempt) {
          if (attempt == 100) throw std::runtime_error("no smooth instance in 100 draws");
          ++redrawn;
          ps = {};
          loss = check.make(rng, ps);
        }
        const auto r = grad_check(loss, ps, check.h, 1e-4, hook);
        if (r.max_rel_error >= worst) {
          worst = r.max_rel_error;
          for (const auto& e : r.entries)
            if (e.max_rel_error == r.max_rel_error) detail = "worst at " + e.name;
        }
      }
      if (redrawn) detail += ", " + std::to_string(redrawn) + " non-smooth draws replaced";
      rep.items.push_back(item("gradient", check.name, worst, 1e-4,
                               detail + ", " + std::to_string(opt.seeds) + " seeds"));
    } catch (const std::exception& e) {
      rep.items.push_back({"gradient", check.name, false, worst, 1e-4, std::string("threw: ") + e.what()});
    }
  }
  oracle_checks(opt, rep);
  property_checks(opt, rep);
  return rep;
}

}  // namespace protoda
