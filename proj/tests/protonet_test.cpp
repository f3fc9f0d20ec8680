#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "protoda/selfcheck/oracles.hpp"
#include "protoda/protonet/protonet.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <numeric>

using namespace protoda;
using protoda::testing::random_matrix;
using protoda::testing::to_rows;
using protoda::testing::to_vec;

namespace {

ProtoHeadConfig toy_head(Index in, Index hidden, Index out) {
  ProtoHeadConfig cfg;
  cfg.input_dim = in;
  cfg.hidden = hidden;
  cfg.output_dim = out;
  return cfg;
}

RowVector<double> row(std::initializer_list<double> v) {
  RowVector<double> r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) r(i++) = x;
  return r;
}

}  // namespace

TEST_CASE("project: width, zero input, hand-rolled oracle, mismatch") {
  Rng rng(1);
  ProtoHeadConfig cfg;
  ParameterSet<double> ps;
  init_proto_head(ps, cfg, rng);
  for (const auto& n : ps.names()) CHECK(n.starts_with("protonet/"));
  Tape<double> tape;
  auto y = project(tape.constant(random_matrix(3, 768, rng)), ps, cfg, Mode::train, rng);
  CHECK(y.cols() == 128);
  CHECK(y.rows() == 3);
  CHECK(project(tape.constant(Tensor<double>::Zero(1, 768)), ps, cfg, Mode::eval, rng).value().isZero(0));

  ps.value("protonet/l1/b") = random_matrix(1, 128, rng, 0.1);
  ps.value("protonet/l2/b") = random_matrix(1, 128, rng, 0.1);
  const Tensor<double> x = random_matrix(4, 768, rng);
  Tape<double> fresh;  // parameter nodes are cached per tape
  const Tensor<double> got = project(fresh.constant(x), ps, cfg, Mode::eval, rng).value();
  for (Index i = 0; i < 4; ++i) {
    const auto want = oracle::two_layer(to_rows(x)[static_cast<std::size_t>(i)],
                                        to_rows(ps.value("protonet/l1/w")), to_vec(ps.value("protonet/l1/b")),
                                        to_rows(ps.value("protonet/l2/w")), to_vec(ps.value("protonet/l2/b")));
    for (Index j = 0; j < 128; ++j) CHECK(std::abs(got(i, j) - want[static_cast<std::size_t>(j)]) < 1e-10);
  }
  CHECK_THROWS_AS(project(tape.constant(random_matrix(1, 767, rng)), ps, cfg, Mode::eval, rng), ShapeError);
}

TEST_CASE("compute_prototype") {
  Tape<double> tape;
  Tensor<double> s(2, 2);
  s << 0, 2, 2, 0;
  CHECK(compute_prototype(tape.constant(s)).value() == row({1, 1}));
  CHECK(compute_prototype(tape.constant(Tensor<double>(row({3, -4})))).value() == row({3, -4}));
  CHECK_THROWS_AS(compute_prototype(tape.constant(Tensor<double>(0, 2))), std::invalid_argument);

  Rng rng(2);
  const Tensor<double> m = random_matrix(50, 128, rng);
  const auto got = compute_prototype(tape.constant(m)).value();
  const auto want = oracle::mean(to_rows(m));
  for (Index j = 0; j < 128; ++j) CHECK(std::abs(got(0, j) - want[static_cast<std::size_t>(j)]) < 1e-12);

  // permutation invariance
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<double> a = random_matrix(7, 5, rng);
    std::vector<Index> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor<double> b(7, 5);
    for (Index i = 0; i < 7; ++i) b.row(i) = a.row(perm[static_cast<std::size_t>(i)]);
    CHECK((compute_prototype(tape.constant(a)).value() - compute_prototype(tape.constant(b)).value())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  }
}

TEST_CASE("posteriors: examples") {
  Tensor<double> one(1, 2);
  one << 5, 5;
  CHECK(posteriors(row({0, 0}), one)(0) == doctest::Approx(1.0));

  Tensor<double> two(2, 1);
  two << 0, std::sqrt(2.0);
  const auto p = posteriors(row({0}), two);
  CHECK(p(0) == doctest::Approx(1 / (1 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(std::exp(-2.0) / (1 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(p(0) == doctest::Approx(0.8808).epsilon(1e-4));

  Tensor<double> ring(4, 2);
  ring << 1, 0, 0, 1, -1, 0, 0, -1;
  const auto u = posteriors(row({0, 0}), ring);
  for (Index c = 0; c < 4; ++c) CHECK(u(c) == doctest::Approx(0.25));
}

TEST_CASE("posteriors: properties and oracle agreement") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const Index C = 1 + static_cast<Index>(rng() % 6);
    const Index d = 1 + static_cast<Index>(rng() % 8);
    const Tensor<double> protos = random_matrix(C, d, rng, 2.0);
    const RowVector<double> q = random_matrix(1, d, rng, 2.0);
    for (Distance dist : {Distance::squared_euclidean, Distance::euclidean}) {
      const auto p = posteriors(q, protos, dist);
      CHECK(std::abs(p.sum() - 1.0) < 1e-6);
      CHECK(p.minCoeff() > 0.0);
      CHECK(p.maxCoeff() <= 1.0);
      const auto want = oracle::posteriors(to_vec(q), to_rows(protos), dist == Distance::squared_euclidean);
      for (Index c = 0; c < C; ++c) CHECK(std::abs(p(c) - want[static_cast<std::size_t>(c)]) < 1e-10);

      const RowVector<double> shift = random_matrix(1, d, rng, 10.0);
      const Tensor<double> moved = protos.rowwise() + shift;
      CHECK((posteriors(RowVector<double>(q + shift), moved, dist) - p).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  // far-away prototypes do not overflow
  Tensor<double> far(2, 1);
  far << 0, 1e4;
  const auto p = posteriors(row({0}), far);
  CHECK(p.allFinite());
}

TEST_CASE("episode_loss: limits, oracle, and errors") {
  Tape<double> tape;
  // queries on their own prototype, the other prototype at squared distance 50
  Tensor<double> protos(2, 1);
  protos << 0, std::sqrt(50.0);
  Tensor<double> queries(2, 1);
  queries << 0, std::sqrt(50.0);
  auto l = episode_loss(tape.constant(queries), {0, 1}, tape.constant(protos), Distance::squared_euclidean);
  CHECK(l.scalar() < 1e-6);
  CHECK(l.scalar() >= 0.0);

  Tensor<double> ring(3, 2);
  ring << 1, 0, -0.5, std::sqrt(3.0) / 2, -0.5, -std::sqrt(3.0) / 2;
  auto eq = episode_loss(tape.constant(Tensor<double>::Zero(3, 2)), {0, 1, 2}, tape.constant(ring),
                         Distance::squared_euclidean);
  CHECK(eq.scalar() == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor<double> support = random_matrix(3 * 4, 4, rng);  // 3 classes, 4 supports
    const Tensor<double> q = random_matrix(3 * 2, 4, rng);
    std::vector<Index> labels{0, 0, 1, 1, 2, 2};
    Tensor<double> p(3, 4);
    oracle::Mat oracle_protos;
    for (Index c = 0; c < 3; ++c) {
      p.row(c) = compute_prototype(tape.constant(Tensor<double>(support.middleRows(4 * c, 4)))).value();
      oracle_protos.push_back(oracle::mean(to_rows(support.middleRows(4 * c, 4))));
    }
    for (Distance dist : {Distance::squared_euclidean, Distance::euclidean}) {
      const double got = episode_loss(tape.constant(q), labels, tape.constant(p), dist).scalar();
      const double want = oracle::episode_loss(to_rows(q), {0, 0, 1, 1, 2, 2}, oracle_protos,
                                               dist == Distance::squared_euclidean);
      CHECK(std::abs(got - want) < 1e-10);
    }
  }
  CHECK_THROWS_AS(episode_loss(tape.constant(queries), {0, 2}, tape.constant(protos), Distance::squared_euclidean),
                  std::invalid_argument);
}

TEST_CASE("predict: examples, tie-break and argmax agreement") {
  Tensor<double> protos(4, 2);
  protos << 0, 0, 5, 5, -3, 1, 7, -7;
  CHECK(predict(row({-3, 1}), protos) == 2);

  Tensor<double> tie(4, 1);
  tie << 10, 1, 20, -1;  // classes 1 and 3 both at distance 1 from 0
  CHECK(predict(row({0}), tie) == 1);

  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index C = 2 + static_cast<Index>(rng() % 5);
    const Tensor<double> ps = random_matrix(C, 3, rng);
    const RowVector<double> q = random_matrix(1, 3, rng);
    const auto post = posteriors(q, ps);
    Index arg = 0;
    for (Index c = 1; c < C; ++c)
      if (post(c) > post(arg)) arg = c;
    CHECK(predict(q, ps) == arg);
    // strictly monotone transform of distances keeps the argmin
    CHECK(predict(q, ps, Distance::euclidean) == predict(q, ps, Distance::squared_euclidean));
  }
}

TEST_CASE("episode loss gradients through a two-layer head") {
  Rng rng(6);
  const ProtoHeadConfig cfg = toy_head(6, 5, 4);
  ParameterSet<double> ps;
  init_proto_head(ps, cfg, rng);
  ps.value("protonet/l1/b") = random_matrix(1, 5, rng, 0.1);
  ps.value("protonet/l2/b") = random_matrix(1, 4, rng, 0.1);
  const Tensor<double> supports = random_matrix(6, 6, rng);  // 2 classes x 3 supports
  const Tensor<double> queries = random_matrix(4, 6, rng);
  for (Distance dist : {Distance::squared_euclidean, Distance::euclidean}) {
    LossFn loss = [&](Tape<double>& tape, const ParameterSet<double>& p) {
      Rng unused(0);
      Var<double> s = project(tape.constant(supports), p, cfg, Mode::eval, unused);
      Var<double> protos = concat_rows({compute_prototype(gather_rows(s, {0, 1, 2})),
                                        compute_prototype(gather_rows(s, {3, 4, 5}))});
      Var<double> q = project(tape.constant(queries), p, cfg, Mode::eval, unused);
      return episode_loss(q, {0, 0, 1, 1}, protos, dist);
    };
    const auto report = grad_check(loss, ps);
    CHECK(report.max_rel_error < 1e-4);
  }
  CHECK(parse_distance(to_string(Distance::euclidean)) == Distance::euclidean);
  CHECK_THROWS_AS(parse_distance("cosine"), std::invalid_argument);
}
