#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "protoda/selfcheck/oracles.hpp"
#include "protoda/augment/augment.hpp"
#include "test_util.hpp"

#include <set>

using namespace protoda;
using protoda::testing::random_matrix;
using protoda::testing::to_rows;
using protoda::testing::to_vec;

namespace {

Tensor<double> run_hallucinator(const ParameterSet<double>& ps, const Tensor<double>& u, const Tensor<double>& z) {
  Tape<double> tape;
  Rng rng(0);
  return hallucinate(tape.constant(u), tape.constant(z), ps, 0.2, Mode::eval, rng).value();
}

ProtoHeadConfig head_config(Index in, Index out) {
  ProtoHeadConfig cfg;
  cfg.input_dim = in;
  cfg.hidden = out;
  cfg.output_dim = out;
  return cfg;
}

oracle::Vec concat(const oracle::Vec& a, const oracle::Vec& b) {
  oracle::Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

oracle::Vec head_oracle(const ParameterSet<double>& ps, const oracle::Vec& x) {
  return oracle::two_layer(x, to_rows(ps.value("protonet/l1/w")), to_vec(ps.value("protonet/l1/b")),
                           to_rows(ps.value("protonet/l2/w")), to_vec(ps.value("protonet/l2/b")));
}

oracle::Vec generator_oracle(const ParameterSet<double>& ps, const oracle::Vec& u, const oracle::Vec& z) {
  return oracle::two_layer(concat(u, z), to_rows(ps.value("hallucinator/l1/w")),
                           to_vec(ps.value("hallucinator/l1/b")), to_rows(ps.value("hallucinator/l2/w")),
                           to_vec(ps.value("hallucinator/l2/b")));
}

void randomize_generator(ParameterSet<double>& ps, Rng& rng) {
  for (const auto& name : ps.names("hallucinator/")) {
    auto& v = ps.value(name);
    v += random_matrix(v.rows(), v.cols(), rng, 0.3);
  }
}

}  // namespace

TEST_CASE("identity initialisation") {
  ParameterSet<double> ps;
  init_identity(ps, 3);
  Tensor<double> u(1, 3), zero = Tensor<double>::Zero(1, 3), z(1, 3);
  u << 1, 2, 0;
  z << 0.5, -0.5, 0;
  CHECK(run_hallucinator(ps, u, zero) == u);
  Tensor<double> expected(1, 3);
  expected << 0.5, 0, 0;
  CHECK(run_hallucinator(ps, zero, z) == expected);

  ParameterSet<double> again;
  init_identity(again, 3);
  CHECK(parameter_digest(ps) == parameter_digest(again));

  ParameterSet<double> cond;
  init_identity(cond, 3, IdentityLayout::conditioning);
  CHECK(run_hallucinator(cond, u, z) == u);

  ParameterSet<double> wrong;
  wrong.add("hallucinator/l1/w", Tensor<double>::Zero(4, 8));
  CHECK_THROWS_AS(init_identity(wrong, 3), ShapeError);

  for (auto s : {"sum", "conditioning"}) CHECK(to_string(parse_identity_layout(s)) == s);
  for (auto s : {"none", "noise", "hallucinate"}) CHECK(to_string(parse_augment_method(s)) == s);
  for (auto s : {"sentence", "proto"}) CHECK(to_string(parse_augment_space(s)) == s);
  CHECK_THROWS_AS(parse_augment_method("mixup"), std::invalid_argument);
}

TEST_CASE("identity generator with zero noise is the identity on nonnegative inputs") {
  Rng rng(1);
  for (Index dim : {1, 7, 128, 768}) {
    ParameterSet<double> ps;
    init_identity(ps, dim);
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor<double> u = random_matrix(3, dim, rng).cwiseAbs();
      const auto out = run_hallucinator(ps, u, Tensor<double>::Zero(3, dim));
      CHECK(out.cols() == dim);
      CHECK(out == u);
    }
  }
  ParameterSet<double> ps;
  init_identity(ps, 4);
  CHECK_THROWS_AS(run_hallucinator(ps, Tensor<double>::Ones(1, 4), Tensor<double>::Ones(1, 3)), ShapeError);
  CHECK_THROWS_AS(run_hallucinator(ps, Tensor<double>::Ones(1, 5), Tensor<double>::Ones(1, 5)), ShapeError);
}

TEST_CASE("hallucination subset sizes") {
  CHECK(augmentation_count(5, 0.2) == 1);
  CHECK(augmentation_count(10, 0.2) == 2);
  CHECK(augmentation_count(1, 0.2) == 1);
  CHECK(5 + augmentation_count(5, 0.2) == 6);
  CHECK(10 + augmentation_count(10, 0.2) == 12);
  CHECK(augmentation_count(3, 0.5) == 2);  // 1.5 rounds half up
  CHECK_THROWS_AS(augmentation_count(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(augmentation_count(5, 1.5), std::invalid_argument);

  Rng rng(2);
  std::vector<int> hits(10, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    const auto s = select_hallucination_subset(10, 0.2, rng);
    REQUIRE(s.size() == 2);
    REQUIRE(s[0] != s[1]);
    for (Index i : s) ++hits[static_cast<std::size_t>(i)];
  }
  for (int h : hits) CHECK(std::abs(h - 4000) < 300);  // each index drawn with probability 0.2
  for (std::size_t n = 1; n <= 50; ++n) {
    const auto s = select_hallucination_subset(n, 0.2, rng);
    CHECK(s.size() == std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.2 * n + 0.5))));
    CHECK(std::set<Index>(s.begin(), s.end()).size() == s.size());
  }
}

TEST_CASE("sentence-space augmented prototype") {
  Rng rng(3);
  const Index D = 6, P = 4;
  const ProtoHeadConfig head = head_config(D, P);
  const AugmentConfig aug;
  ParameterSet<double> ps;
  init_proto_head(ps, head, rng);
  init_identity(ps, D);
  const Tensor<double> S = random_matrix(5, D, rng).cwiseAbs();
  const std::vector<Index> subset{3};

  Tape<double> tape;
  auto v = augmented_prototype_sentence(tape.constant(S), subset, Tensor<double>(Tensor<double>::Zero(1, D)), ps,
                                        head, aug, Mode::eval, rng);
  Tensor<double> multiset(6, D);
  multiset << S, S.row(3);
  Tape<double> t2;
  const auto plain = compute_prototype(project(t2.constant(multiset), ps, head, Mode::eval, rng)).value();
  CHECK((v.value() - plain).cwiseAbs().maxCoeff() < 1e-10);

  // generic generator and noise: literal evaluation of the formula, denominator 6
  randomize_generator(ps, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<double> E = random_matrix(5, D, rng);
    const Tensor<double> z = random_matrix(1, D, rng);
    const Index j = static_cast<Index>(rng() % 5);
    Tape<double> t;
    const auto got = augmented_prototype_sentence(t.constant(E), {j}, z, ps, head, aug, Mode::eval, rng).value();
    oracle::Vec want(static_cast<std::size_t>(P), 0.0);
    for (const auto& e : to_rows(E)) {
      const auto f = head_oracle(ps, e);
      for (std::size_t c = 0; c < want.size(); ++c) want[c] += f[c];
    }
    const auto g = head_oracle(ps, generator_oracle(ps, to_rows(E)[static_cast<std::size_t>(j)], to_vec(z)));
    for (std::size_t c = 0; c < want.size(); ++c) want[c] = (want[c] + g[c]) / 6.0;
    for (Index c = 0; c < P; ++c) CHECK(std::abs(got(0, c) - want[static_cast<std::size_t>(c)]) < 1e-10);
  }
}

TEST_CASE("proto-space augmented prototype") {
  Rng rng(4);
  const Index D = 6, P = 4;
  const ProtoHeadConfig head = head_config(D, P);
  const AugmentConfig aug;
  ParameterSet<double> ps;
  init_proto_head(ps, head, rng);
  init_identity(ps, P);
  const Tensor<double> S = random_matrix(10, D, rng);
  const std::vector<Index> subset{7, 2};

  Tape<double> tape;
  auto v = augmented_prototype_proto(tape.constant(S), subset, Tensor<double>(Tensor<double>::Zero(2, P)), ps, head,
                                     aug, Mode::eval, rng);
  Tensor<double> multiset(12, D);
  multiset << S, S.row(7), S.row(2);
  Tape<double> t2;
  const auto plain = compute_prototype(project(t2.constant(multiset), ps, head, Mode::eval, rng)).value();
  CHECK((v.value() - plain).cwiseAbs().maxCoeff() < 1e-10);

  Tape<double> t3;
  CHECK_THROWS_AS(augmented_prototype_proto(t3.constant(S), subset, Tensor<double>(Tensor<double>::Zero(2, D)), ps,
                                            head, aug, Mode::eval, rng),
                  ShapeError);

  randomize_generator(ps, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor<double> E = random_matrix(10, D, rng);
    const Tensor<double> z = random_matrix(2, P, rng);
    Tape<double> t;
    const auto got = augmented_prototype_proto(t.constant(E), subset, z, ps, head, aug, Mode::eval, rng).value();
    oracle::Vec want(static_cast<std::size_t>(P), 0.0);
    const auto rows = to_rows(E);
    for (const auto& e : rows) {
      const auto f = head_oracle(ps, e);
      for (std::size_t c = 0; c < want.size(); ++c) want[c] += f[c];
    }
    for (std::size_t j = 0; j < subset.size(); ++j) {
      const auto g = generator_oracle(ps, head_oracle(ps, rows[static_cast<std::size_t>(subset[j])]),
                                      to_rows(z)[j]);
      for (std::size_t c = 0; c < want.size(); ++c) want[c] += g[c];
    }
    for (auto& w : want) w /= 12.0;
    for (Index c = 0; c < P; ++c) CHECK(std::abs(got(0, c) - want[static_cast<std::size_t>(c)]) < 1e-10);
  }
}

TEST_CASE("noise augmentation") {
  Rng rng(5);
  const Tensor<double> same = Tensor<double>::Constant(5, 3, 0.7);
  const auto var0 = batch_variance(same);
  CHECK(var0.isZero(0));
  const auto out = noise_augment(same, var0, 0.2, 0.1, rng);
  CHECK(out.rows() == 6);
  CHECK(out == Tensor<double>::Constant(6, 3, 0.7));

  Tensor<double> b(2, 2);
  b << 0, 1, 2, 5;
  const auto v = batch_variance(b);
  CHECK(v(0) == doctest::Approx(1.0));
  CHECK(v(1) == doctest::Approx(4.0));

  const Index n = 100000;
  const RowVector<double> unit = RowVector<double>::Ones(4);
  const auto noise = draw_noise<double>(n, unit, 0.1, rng);
  for (Index d = 0; d < 4; ++d) {
    const double eps_var = noise.eps.col(d).squaredNorm() / static_cast<double>(n);
    const double eta_var = noise.eta.col(d).squaredNorm() / static_cast<double>(n);
    CHECK(std::abs(eps_var - 0.1) < 0.002);
    CHECK(std::abs(eta_var - 0.1) < 0.002);
  }

  // E[x'] = x for a fixed sample
  Tensor<double> x(1, 3);
  x << 2.0, -1.0, 0.5;
  Tensor<double> sum = Tensor<double>::Zero(1, 3);
  for (Index i = 0; i < n; ++i) {
    sum += noise_augment(x, RowVector<double>(RowVector<double>::Ones(3)), 0.2, 0.1, rng).row(1);
  }
  const Tensor<double> mean = sum / static_cast<double>(n);
  for (Index d = 0; d < 3; ++d) {
    const double sd = std::sqrt((x(0, d) * x(0, d) * 0.1 + 0.1) / static_cast<double>(n));
    CHECK(std::abs(mean(0, d) - x(0, d)) < 5 * sd);
  }
}

TEST_CASE("perturb is differentiable and matches noise_augment") {
  Rng rng(6);
  const Tensor<double> x = random_matrix(2, 3, rng);
  const auto noise = draw_noise<double>(2, RowVector<double>(RowVector<double>::Ones(3)), 0.1, rng);
  Tape<double> t;
  const auto y = perturb(t.constant(x), noise).value();
  CHECK((y - (x.array() * (1 + noise.eta.array()) + noise.eps.array()).matrix()).cwiseAbs().maxCoeff() < 1e-15);
  const auto report = protoda::testing::check_unary_op([&](Var<double> v) { return perturb(v, noise); }, x, rng);
  CHECK(report.passed());
}

TEST_CASE("hallucinator gradients from the episode loss") {
  Rng rng(7);
  const Index D = 5, P = 4;
  const ProtoHeadConfig head = head_config(D, P);
  const AugmentConfig aug;
  const Tensor<double> supports = random_matrix(6, D, rng);  // 2 classes x 3
  const Tensor<double> queries = random_matrix(4, D, rng);
  for (AugmentSpace space : {AugmentSpace::sentence, AugmentSpace::proto}) {
    ParameterSet<double> ps;
    init_proto_head(ps, head, rng);
    init_identity(ps, space == AugmentSpace::sentence ? D : P);
    randomize_generator(ps, rng);
    // nonzero biases keep pre-activations off the ReLU kink at exactly 0
    ps.value("protonet/l1/b") = random_matrix(1, P, rng, 0.1);
    ps.value("protonet/l2/b") = random_matrix(1, P, rng, 0.1);
    const Index zdim = space == AugmentSpace::sentence ? D : P;
    const Tensor<double> z = random_matrix(1, zdim, rng);
    LossFn loss = [&](Tape<double>& tape, const ParameterSet<double>& p) {
      Rng unused(0);
      std::vector<Var<double>> protos;
      for (Index c = 0; c < 2; ++c) {
        Var<double> s = tape.constant(Tensor<double>(supports.middleRows(3 * c, 3)));
        protos.push_back(space == AugmentSpace::sentence
                             ? augmented_prototype_sentence(s, {1}, z, p, head, aug, Mode::eval, unused)
                             : augmented_prototype_proto(s, {1}, z, p, head, aug, Mode::eval, unused));
      }
      Var<double> q = project(tape.constant(queries), p, head, Mode::eval, unused);
      return episode_loss(q, {0, 0, 1, 1}, concat_rows<double>(protos), Distance::squared_euclidean);
    };
    Tape<double> tape;
    Var<double> l = loss(tape, ps);
    tape.backward(l);
    const auto grads = tape.parameter_gradients();
    CHECK(grads.at("hallucinator/l1/w").cwiseAbs().maxCoeff() > 0.0);
    const auto report = grad_check(loss, ps);
    CHECK(report.max_rel_error < 1e-4);
  }
}
