#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "protoda/eval/metrics.hpp"
#include "protoda/eval/report.hpp"
#include "protoda/eval/synthetic.hpp"
#include "protoda/eval/trial.hpp"
#include "protoda/selfcheck/oracles.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <set>

using namespace protoda;

namespace {

enum { A, B };

SyntheticTaskSpec spec(std::size_t classes, double separation, std::size_t val = 50) {
  SyntheticTaskSpec s;
  s.classes = classes;
  s.dim = 8;
  s.separation = separation;
  s.train_per_class = 20;
  s.validation_per_class = val;
  s.seed = 21;
  return s;
}

/// Head that is the identity on nonnegative inputs; negative coordinates
/// are clipped, so inputs are shifted positive first.
ModelConfig identity_model(Index dim, ParameterSet<double>& params) {
  ModelConfig m;
  m.text = false;
  m.head.input_dim = dim;
  m.head.hidden = dim;
  m.head.output_dim = dim;
  params.add("protonet/l1/w", Tensor<double>::Identity(dim, dim));
  params.add("protonet/l1/b", Tensor<double>::Zero(1, dim));
  params.add("protonet/l2/w", Tensor<double>::Identity(dim, dim));
  params.add("protonet/l2/b", Tensor<double>::Zero(1, dim));
  return m;
}

/// Nearest class mean on raw features with every train sample as support.
double ncm_oracle(const TestTask<EmbeddedSample>& t) {
  std::vector<Eigen::RowVectorXd> means;
  for (const auto& group : t.train) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(group.front().vector.size());
    for (const auto& s : group) m += s.vector;
    means.push_back(m / static_cast<double>(group.size()));
  }
  std::size_t ok = 0, n = 0;
  for (std::size_t c = 0; c < t.validation.size(); ++c) {
    for (const auto& s : t.validation[c]) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < means.size(); ++j)
        if ((s.vector - means[j]).squaredNorm() < (s.vector - means[best]).squaredNorm()) best = j;
      ok += best == c;
      ++n;
    }
  }
  return 100.0 * static_cast<double>(ok) / static_cast<double>(n);
}

TestTask<EmbeddedSample> shifted_task(const SyntheticTaskSpec& s, double shift) {
  auto reg = generate_synthetic_tasks(s);
  EmbeddedRegistry moved;
  for (const auto& [task, intents] : reg.tasks())
    for (const auto& [intent, pool] : intents)
      for (Split sp : {Split::train, Split::validation})
        for (auto x : pool.split(sp)) {
          x.vector.array() += shift;
          moved.add(task, intent, sp, x);
        }
  return make_test_task(moved, synthetic_task_id(0), {});
}

}  // namespace

TEST_CASE("micro_f1 examples") {
  CHECK(micro_f1({A, A, B}, {A, B, B}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(micro_f1({A, B, A}, {A, B, A}) == 1.0);
  CHECK(micro_f1({B, A, B}, {A, B, A}) == 0.0);
  CHECK_THROWS_AS(micro_f1({A}, {A, B}), std::invalid_argument);
  CHECK_THROWS_AS(micro_f1({}, {}), std::invalid_argument);
}

TEST_CASE("micro_f1 equals accuracy and the confusion-matrix oracle") {
  Rng rng(3);
  for (int it = 0; it < 2000; ++it) {
    const std::size_t n = 1 + rng() % 40;
    const int classes = 1 + static_cast<int>(rng() % 6);
    std::vector<Index> p, g;
    std::vector<int> op, og;
    for (std::size_t i = 0; i < n; ++i) {
      p.push_back(static_cast<Index>(rng() % classes));
      g.push_back(static_cast<Index>(rng() % classes));
      op.push_back(static_cast<int>(p.back()));
      og.push_back(static_cast<int>(g.back()));
    }
    const double f = micro_f1(p, g);
    CHECK(std::abs(f - oracle::micro_f1(op, og)) <= 1e-12);
    CHECK(std::abs(f - accuracy(p, g)) <= 1e-12);
  }
}

TEST_CASE("confidence interval half-widths") {
  CHECK(confidence_interval({0.0, 1.0}) == doctest::Approx(6.353).epsilon(1e-4));
  CHECK(confidence_interval(std::vector<double>(20, 71.5)) == 0.0);
  CHECK(t_quantile_975(1) == doctest::Approx(12.706).epsilon(1e-4));
  CHECK(t_quantile_975(19) == doctest::Approx(2.093).epsilon(1e-3));
  CHECK_THROWS_AS(confidence_interval({1.0}), std::invalid_argument);

  // t * s / sqrt(n) on a hand-computed sample
  const std::vector<double> s{80, 82, 84, 86, 88};  // mean 84, sample sd sqrt(10)
  CHECK(confidence_interval(s) == doctest::Approx(2.776445 * std::sqrt(10.0) / std::sqrt(5.0)).epsilon(1e-6));
}

TEST_CASE("synthetic tasks: deterministic, distinct means, requested sizes") {
  const auto a = generate_synthetic_tasks(spec(5, 10.0));
  const auto b = generate_synthetic_tasks(spec(5, 10.0));
  CHECK(a == b);
  auto other = spec(5, 10.0);
  other.seed = 22;
  CHECK_FALSE(generate_synthetic_tasks(other) == a);
  CHECK(a.task_ids() == std::vector<std::string>{"synthetic_0"});
  CHECK(a.intents("synthetic_0").size() == 5);
  for (const auto& [intent, pool] : a.task("synthetic_0")) {
    CHECK(pool.train.size() == 20);
    CHECK(pool.validation.size() == 50);
    CHECK(pool.train.front().vector.size() == 8);
  }
  auto multi = spec(3, 1.0);
  multi.tasks = 4;
  CHECK(generate_synthetic_tasks(multi).task_ids().size() == 4);
}

TEST_CASE("well-separated clusters: the nearest-class-mean oracle is near perfect") {
  const auto t = make_test_task(generate_synthetic_tasks(spec(5, 10.0)), synthetic_task_id(0), {});
  CHECK(ncm_oracle(t) >= 99.0);
}

TEST_CASE("trial on isolated clusters scores 100") {
  ParameterSet<double> params;
  const ModelConfig model = identity_model(8, params);
  const auto task = shifted_task(spec(4, 60.0), 100.0);
  Rng rng(1);
  CHECK(run_trial(params, model, task, 5, rng, AugmentMethod::none) == 100.0);
}

TEST_CASE("single-class task scores 100") {
  ParameterSet<double> params;
  const ModelConfig model = identity_model(8, params);
  const auto task = shifted_task(spec(1, 0.0), 10.0);
  Rng rng(1);
  CHECK(run_trial(params, model, task, 5, rng, AugmentMethod::none) == 100.0);
}

TEST_CASE("indistinguishable classes stay inside the chance band") {
  // 3 classes x 50 validation samples: a binomial(150, 1/3) proportion lies in
  // [20%, 46%] with probability > 0.999
  ParameterSet<double> params;
  const ModelConfig model = identity_model(8, params);
  const auto task = shifted_task(spec(3, 0.0), 10.0);
  TrialConfig cfg;
  const auto scores = run_trials(params, model, task, cfg, AugmentMethod::none);
  REQUIRE(scores.size() == 20);
  for (double s : scores) {
    CHECK(s >= 20.0);
    CHECK(s <= 46.0);
  }
}

TEST_CASE("trials: reproducible per seed, supports drawn without replacement") {
  ParameterSet<double> params;
  const ModelConfig model = identity_model(8, params);
  const auto task = shifted_task(spec(4, 1.0), 10.0);
  TrialConfig cfg;
  cfg.trials = 5;
  CHECK(run_trials(params, model, task, cfg, AugmentMethod::none) ==
        run_trials(params, model, task, cfg, AugmentMethod::none));
  Rng r1(9), r2(9);
  CHECK(run_trial(params, model, task, 5, r1, AugmentMethod::none) ==
        run_trial(params, model, task, 5, r2, AugmentMethod::none));

  Rng rng(4);
  const auto sup = sample_trial_supports(task, 20, rng);  // the whole train partition
  for (const auto& group : sup) {
    std::set<std::vector<double>> seen;
    for (const auto& s : group) seen.insert(std::vector<double>(s.vector.data(), s.vector.data() + s.vector.size()));
    CHECK(seen.size() == 20);
  }
  try {
    sample_trial_supports(task, 21, rng);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("20") != std::string::npos);
  }
  cfg.trials = 1;
  CHECK_THROWS_AS(run_trials(params, model, task, cfg, AugmentMethod::none), std::invalid_argument);
}

TEST_CASE("test-time augmentation changes prototypes only") {
  ParameterSet<double> params;
  ModelConfig model = identity_model(8, params);
  model.augment.method = AugmentMethod::noise;
  const auto task = shifted_task(spec(4, 1.0), 10.0);
  // queries are encoded once and identically for every method
  const Tensor<double> q = embed_and_project(task.queries(), params, model, {});
  Rng r1(5), r2(5);
  const double with_cache = run_trial(params, model, task, 5, r1, AugmentMethod::noise, {}, &q);
  const double without = run_trial(params, model, task, 5, r2, AugmentMethod::noise);
  CHECK(with_cache == without);
}

TEST_CASE("report: summary invariants, cell format, validation, JSON round trip") {
  EvalReport r;
  r.method = "protonet";
  r.augmentation = "hallucinate";
  r.space = "proto";
  r.k = 10;
  r.trial_scores = {84.0, 86.5, 88.1, 85.2, 87.3};
  r.seed = 1;
  r.config_digest = "0123456789abcdef";
  r.config = R"({"seed": 1})";
  const EvalReport s = summarize(r);
  CHECK(s.mean >= 84.0);
  CHECK(s.mean <= 88.1);
  CHECK(s.ci > 0.0);
  EvalReport flat = r;
  flat.trial_scores = std::vector<double>(20, 50.0);
  CHECK(summarize(flat).ci == 0.0);

  CHECK(format_cell(86.40, 1.91) == "86.40 ± 1.91");
  CHECK(format_cell(82.4751, 3.2749) == "82.48 ± 3.27");

  const std::string table = format_report({s});
  CHECK(table.find("10-shot") != std::string::npos);
  CHECK(table.find(format_cell(s.mean, s.ci)) != std::string::npos);
  CHECK(table.find(row_label(s)) != std::string::npos);

  EvalReport bad = s;
  bad.method = "";
  CHECK_THROWS_AS(format_report({bad}), std::invalid_argument);

  CHECK(from_json_line(to_json_line(s)) == s);
  EvalReport other = s;
  other.k = 5;
  other.augmentation = "none";
  other.space = "";
  const std::vector<EvalReport> both{s, other};
  CHECK(from_jsonl(to_jsonl(both)) == both);
}
