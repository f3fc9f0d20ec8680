#ifndef PROTODA_EVAL_TRIAL_HPP
#define PROTODA_EVAL_TRIAL_HPP

#include "protoda/eval/metrics.hpp"
#include "protoda/train/conv_tl.hpp"
#include "protoda/train/model.hpp"

#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace protoda {

struct TrialConfig {
  std::size_t trials = 20;
  std::size_t k = 5;
  std::uint64_t seed_base = 1;
};

/// The test intents of one task: train partitions supply supports,
/// validation partitions supply queries.
template <typename Item>
struct TestTask {
  std::string task_id;
  std::vector<std::string> intents;
  std::vector<std::vector<Item>> train;       // [intent]
  std::vector<std::vector<Item>> validation;  // [intent]

  std::vector<Item> queries() const { return flatten(validation); }
  std::vector<Index> gold() const {
    std::vector<Index> g;
    for (std::size_t c = 0; c < validation.size(); ++c) g.insert(g.end(), validation[c].size(), Index(c));
    return g;
  }
};

/// Collects `intents` (all intents of the task when empty) of `task_id`.
template <typename Item>
TestTask<Item> make_test_task(const BasicTaskRegistry<Item>& registry, const std::string& task_id,
                              const std::vector<std::string>& intents = {}) {
  TestTask<Item> t;
  t.task_id = task_id;
  const auto& pools = registry.task(task_id);
  t.intents = intents.empty() ? registry.intents(task_id) : intents;
  for (const auto& name : t.intents) {
    auto it = pools.find(name);
    if (it == pools.end()) throw std::invalid_argument("test task '" + task_id + "' has no intent '" + name + "'");
    t.train.push_back(it->second.train);
    t.validation.push_back(it->second.validation);
  }
  return t;
}

/// k train samples per intent, without replacement within the trial.
/// Rejects the request listing per-class counts when any class is short or
/// has no validation samples.
template <typename Item>
std::vector<std::vector<Item>> sample_trial_supports(const TestTask<Item>& task, std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("trial: k must be >= 1");
  bool ok = !task.intents.empty();
  std::string counts;
  for (std::size_t c = 0; c < task.intents.size(); ++c) {
    ok = ok && task.train[c].size() >= k && !task.validation[c].empty();
    counts += (counts.empty() ? "" : ", ") + task.intents[c] + ": " + std::to_string(task.train[c].size()) +
              " train / " + std::to_string(task.validation[c].size()) + " validation";
  }
  if (!ok) {
    throw std::invalid_argument("trial needs " + std::to_string(k) +
                                " train and 1 validation sample per class; have " + counts);
  }
  std::vector<std::vector<Item>> out(task.intents.size());
  for (std::size_t c = 0; c < task.intents.size(); ++c) {
    std::vector<std::size_t> idx(task.train[c].size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out[c].push_back(task.train[c][idx[i]]);
    }
  }
  return out;
}

/// One k-shot trial of a ProtoNet: sample supports, build (optionally
/// augmented) prototypes, classify every validation sample. Returns
/// micro-F1 in percent. `projected_queries` may carry the eval-mode
/// proto-embeddings of task.queries() to skip re-encoding them.
template <typename Item>
double run_trial(const ParameterSet<double>& params, const ModelConfig& model, const TestTask<Item>& task,
                 std::size_t k, Rng& rng, AugmentMethod augment, const TextResources& text = {},
                 const Tensor<double>* projected_queries = nullptr) {
  const auto supports = sample_trial_supports(task, k, rng);
  Tape<double> tape;
  const Tensor<double> protos =
      class_prototypes(tape, supports, params, model, text, augment, Mode::eval, rng).value();
  const Tensor<double> q = projected_queries ? *projected_queries : embed_and_project(task.queries(), params, model, text);
  std::vector<Index> pred(static_cast<std::size_t>(q.rows()));
  for (Index i = 0; i < q.rows(); ++i) {
    pred[static_cast<std::size_t>(i)] = predict(RowVector<double>(q.row(i)), protos, model.head.distance);
  }
  return 100.0 * micro_f1(pred, task.gold());
}

/// Trial i draws from Rng(seed_base + i).
template <typename Item>
std::vector<double> run_trials(const ParameterSet<double>& params, const ModelConfig& model,
                               const TestTask<Item>& task, const TrialConfig& cfg, AugmentMethod augment,
                               const TextResources& text = {}) {
  if (cfg.trials < 2) throw std::invalid_argument("trials must be >= 2 for a confidence interval");
  const Tensor<double> q = embed_and_project(task.queries(), params, model, text);
  std::vector<double> scores;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    Rng rng(cfg.seed_base + i);
    scores.push_back(run_trial(params, model, task, cfg.k, rng, augment, text, &q));
  }
  return scores;
}

/// One k-shot trial of the transfer-learning baseline: fine-tune a copy on
/// the sampled supports, classify every validation sample.
template <typename Item>
double run_conv_tl_trial(const ConvTLModel& base, const TestTask<Item>& task, std::size_t k, Rng& rng,
                         const TextResources& text = {}) {
  const auto supports = sample_trial_supports(task, k, rng);
  const ConvTLModel tuned = conv_tl_finetune(base, task.intents, supports, rng, text);
  return 100.0 * micro_f1(conv_tl_predict(tuned, task.queries(), text), task.gold());
}

template <typename Item>
std::vector<double> run_conv_tl_trials(const ConvTLModel& base, const TestTask<Item>& task, const TrialConfig& cfg,
                                       const TextResources& text = {}) {
  if (cfg.trials < 2) throw std::invalid_argument("trials must be >= 2 for a confidence interval");
  std::vector<double> scores;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    Rng rng(cfg.seed_base + i);
    scores.push_back(run_conv_tl_trial(base, task, cfg.k, rng, text));
  }
  return scores;
}

}  // namespace protoda

#endif  // PROTODA_EVAL_TRIAL_HPP
