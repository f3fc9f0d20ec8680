#ifndef PROTODA_TRAIN_CONV_TL_HPP
#define PROTODA_TRAIN_CONV_TL_HPP

#include "protoda/numerics/adam.hpp"
#include "protoda/train/model.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace protoda {

struct ConvTLConfig {
  std::size_t epochs = 30;
  std::size_t batch = 64;
  std::size_t finetune_steps = 100;
  std::size_t finetune_batch_cap = 16;
  Index hidden = 128;
  double dropout = 0.2;
  AdamOptions adam{0.001, 0.9, 0.99, 1e-8};
};

inline constexpr const char* kConvTLPrefix = "convtl/";
inline constexpr const char* kSoftmaxPrefix = "convtl/softmax/";

/// Encoder (text models) + two 128-unit dense layers + softmax classifier.
struct ConvTLModel {
  ModelConfig model;  // encoder settings and input width; the ProtoNet head is unused
  ConvTLConfig config;
  ParameterSet<double> params;
  std::vector<std::string> classes;  // softmax rows
  std::vector<double> loss_history;  // one entry per optimizer step
};

namespace detail {

inline void add_dense(ParameterSet<double>& params, const std::string& name, Index out, Index in, Rng& rng) {
  params.add(name + "/w", uniform<double>(out, in, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  params.add(name + "/b", Tensor<double>::Zero(1, out));
}

inline Var<double> dense(Var<double> x, const ParameterSet<double>& params, const std::string& name) {
  Tape<double>& t = *x.tape;
  return dense_forward(x, t.parameter(params, name + "/w"), t.parameter(params, name + "/b"));
}

}  // namespace detail

/// Class logits [n x C].
template <typename Item>
Var<double> conv_tl_logits(Tape<double>& tape, const ConvTLModel& m, const std::vector<Item>& items, Mode mode,
                           Rng& rng, const TextResources& text = {}) {
  const std::string p = kConvTLPrefix;
  Var<double> h = embed_items(tape, items, m.params, m.model, text, mode, rng);
  h = dropout(relu(detail::dense(h, m.params, p + "l1")), m.config.dropout, mode, rng);
  h = dropout(relu(detail::dense(h, m.params, p + "l2")), m.config.dropout, mode, rng);
  return detail::dense(h, m.params, p + "softmax");
}

/// Row-wise softmax probabilities in evaluation mode.
template <typename Item>
Tensor<double> conv_tl_probabilities(const ConvTLModel& m, const std::vector<Item>& items,
                                     const TextResources& text = {}) {
  Tape<double> tape;
  Rng unused(0);
  Tensor<double> z = conv_tl_logits(tape, m, items, Mode::eval, unused, text).value();
  z.colwise() -= z.rowwise().maxCoeff();
  z = z.array().exp().matrix();
  z.array().colwise() /= z.rowwise().sum().array();
  return z;
}

/// Argmax class per item; ties go to the lowest index.
template <typename Item>
std::vector<Index> conv_tl_predict(const ConvTLModel& m, const std::vector<Item>& items,
                                   const TextResources& text = {}) {
  const Tensor<double> p = conv_tl_probabilities(m, items, text);
  std::vector<Index> out(static_cast<std::size_t>(p.rows()));
  for (Index i = 0; i < p.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < p.cols(); ++c)
      if (p(i, c) > p(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

namespace detail {

/// Minibatch Adam on (item, label) pairs: shuffled passes, the last batch of
/// a pass may be short. Stops after `max_steps` steps when nonzero.
template <typename Item>
void fit_minibatches(ConvTLModel& m, const std::vector<Item>& items, const std::vector<Index>& labels,
                     std::size_t batch, std::size_t passes, std::size_t max_steps, const TextResources& text,
                     Rng& rng) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t steps = 0;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      if (max_steps && steps == max_steps) return;
      std::vector<Item> xb;
      std::vector<Index> yb;
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        xb.push_back(items[order[i]]);
        yb.push_back(labels[order[i]]);
      }
      Tape<double> tape;
      Var<double> loss = softmax_cross_entropy(conv_tl_logits(tape, m, xb, Mode::train, rng, text), yb);
      if (!std::isfinite(loss.scalar())) {
        throw NumericAbort("non-finite cross-entropy loss at step " + std::to_string(steps + 1));
      }
      tape.backward(loss);
      adam_step(m.params, tape.parameter_gradients(), m.config.adam);
      m.loss_history.push_back(loss.scalar());
      ++steps;
    }
  }
}

}  // namespace detail

/// Cross-entropy pretraining over the pooled train partitions of every
/// (task, intent) in `registry`. Classes are "task/intent".
template <typename Item>
ConvTLModel conv_tl_train(const BasicTaskRegistry<Item>& registry, const ModelConfig& model,
                          const ConvTLConfig& cfg, Rng& rng, const TextResources& text = {}) {
  ConvTLModel m;
  m.model = model;
  m.config = cfg;
  std::vector<Item> items;
  std::vector<Index> labels;
  for (const auto& [task, intents] : registry.tasks()) {
    for (const auto& [intent, pool] : intents) {
      if (pool.train.empty()) continue;
      m.classes.push_back(task + "/" + intent);
      for (const auto& it : pool.train) {
        items.push_back(it);
        labels.push_back(static_cast<Index>(m.classes.size() - 1));
      }
    }
  }
  if (m.classes.size() < 2) throw std::invalid_argument("conv_tl_train: needs at least 2 intents");
  if (model.text) init_encoder(m.params, model.encoder, rng);
  const std::string p = kConvTLPrefix;
  detail::add_dense(m.params, p + "l1", cfg.hidden, model.sentence_dim(), rng);
  detail::add_dense(m.params, p + "l2", cfg.hidden, cfg.hidden, rng);
  detail::add_dense(m.params, p + "softmax", static_cast<Index>(m.classes.size()), cfg.hidden, rng);
  detail::fit_minibatches(m, items, labels, cfg.batch, cfg.epochs, 0, text, rng);
  return m;
}

/// Replaces the softmax layer with a fresh one over `classes` and fine-tunes
/// every layer on the given supports (row c holds the samples of class c)
/// for `config.finetune_steps` steps of min(cap, total) samples.
template <typename Item>
ConvTLModel conv_tl_finetune(ConvTLModel m, const std::vector<std::string>& classes,
                             const std::vector<std::vector<Item>>& supports, Rng& rng,
                             const TextResources& text = {}) {
  if (classes.size() != supports.size() || classes.empty()) {
    throw std::invalid_argument("conv_tl_finetune: " + std::to_string(classes.size()) + " classes but " +
                                std::to_string(supports.size()) + " support groups");
  }
  std::vector<Item> items;
  std::vector<Index> labels;
  for (std::size_t c = 0; c < supports.size(); ++c) {
    if (supports[c].empty()) throw std::invalid_argument("conv_tl_finetune: no samples for class '" + classes[c] + "'");
    for (const auto& it : supports[c]) {
      items.push_back(it);
      labels.push_back(static_cast<Index>(c));
    }
  }
  m.params.erase_prefix(kSoftmaxPrefix);
  detail::add_dense(m.params, std::string(kConvTLPrefix) + "softmax", static_cast<Index>(classes.size()),
                    m.config.hidden, rng);
  m.classes = classes;
  m.loss_history.clear();
  for (auto& [name, prm] : m.params) {  // fresh optimizer for the fine-tuning run
    prm.first_moment.setZero();
    prm.second_moment.setZero();
    prm.step = 0;
  }
  const std::size_t batch = std::min(m.config.finetune_batch_cap, items.size());
  if (m.config.finetune_steps > 0) {
    const std::size_t per_pass = (items.size() + batch - 1) / batch;
    const std::size_t passes = (m.config.finetune_steps + per_pass - 1) / per_pass;
    detail::fit_minibatches(m, items, labels, batch, passes, m.config.finetune_steps, text, rng);
  }
  return m;
}

}  // namespace protoda

#endif  // PROTODA_TRAIN_CONV_TL_HPP
