#ifndef PROTODA_TRAIN_MODEL_HPP
#define PROTODA_TRAIN_MODEL_HPP

#include "protoda/augment/augment.hpp"
#include "protoda/corpus/registry.hpp"
#include "protoda/encoder/encoder.hpp"
#include "protoda/protonet/protonet.hpp"

#include <string>
#include <vector>

namespace protoda {

/// Training produced a non-finite loss.
class NumericAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration or sampled episode broke the seen/unseen contract.
class RegimeViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to rebuild the forward pass from a parameter set.
/// Text models run the sentence encoder in front of the head; embedded
/// models feed sample vectors to the head directly.
struct ModelConfig {
  bool text = true;
  EncoderConfig encoder;
  ProtoHeadConfig head;
  AugmentConfig augment;

  /// Width of the sentence-embedding space.
  Index sentence_dim() const { return text ? encoder.output_dim() : head.input_dim; }
};

/// Sentence embeddings, one row per item.
inline Var<double> embed_items(Tape<double>& tape, const std::vector<Utterance>& items,
                               const ParameterSet<double>& params, const ModelConfig& model,
                               const TextResources& text, Mode mode, Rng& rng) {
  if (items.empty()) throw std::invalid_argument("embed_items: no items");
  if (!model.text) throw std::invalid_argument("embed_items: utterances given to an embedded-input model");
  std::vector<Var<double>> rows;
  rows.reserve(items.size());
  for (const auto& u : items) rows.push_back(encode_sentence(tape, u, params, model.encoder, text, mode, rng));
  return concat_rows<double>(rows);
}

inline Var<double> embed_items(Tape<double>& tape, const std::vector<EmbeddedSample>& items,
                               const ParameterSet<double>&, const ModelConfig& model, const TextResources&,
                               Mode, Rng&) {
  if (items.empty()) throw std::invalid_argument("embed_items: no items");
  if (model.text) throw std::invalid_argument("embed_items: embedded samples given to a text model");
  const Index d = items.front().vector.size();
  Tensor<double> m(static_cast<Index>(items.size()), d);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].vector.size() != d) throw ShapeError("embed_items: ragged sample widths");
    m.row(static_cast<Index>(i)) = items[i].vector;
  }
  return tape.constant(std::move(m));
}

template <typename Item>
std::vector<Item> flatten(const std::vector<std::vector<Item>>& groups) {
  std::vector<Item> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

/// Row indices of class c inside the class-major flattening of `groups`.
template <typename Item>
std::vector<std::vector<Index>> group_rows(const std::vector<std::vector<Item>>& groups) {
  std::vector<std::vector<Index>> out(groups.size());
  Index r = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    for (std::size_t i = 0; i < groups[c].size(); ++i) out[c].push_back(r++);
  }
  return out;
}

/// [C x P] prototypes from per-class supports, augmented per `active`.
/// Noise variance is taken over the whole support batch in the configured
/// space; hallucinator noise z is standard normal.
template <typename Item>
Var<double> class_prototypes(Tape<double>& tape, const std::vector<std::vector<Item>>& supports,
                             const ParameterSet<double>& params, const ModelConfig& model,
                             const TextResources& text, AugmentMethod active, Mode mode, Rng& rng) {
  for (std::size_t c = 0; c < supports.size(); ++c) {
    if (supports[c].empty()) {
      throw std::invalid_argument("class_prototypes: class " + std::to_string(c) + " has no supports");
    }
  }
  const auto rows = group_rows(supports);
  const AugmentConfig& aug = model.augment;
  Var<double> e = embed_items(tape, flatten(supports), params, model, text, mode, rng);
  std::vector<Var<double>> protos;
  protos.reserve(supports.size());

  if (active == AugmentMethod::hallucinate) {
    for (const auto& r : rows) {
      Var<double> s = gather_rows(e, r);
      const auto subset = select_hallucination_subset(r.size(), aug.ratio, rng);
      const Index zdim = aug.space == AugmentSpace::sentence ? e.cols() : model.head.output_dim;
      const Tensor<double> z = standard_normal<double>(static_cast<Index>(subset.size()), zdim, rng);
      protos.push_back(aug.space == AugmentSpace::sentence
                           ? augmented_prototype_sentence(s, subset, z, params, model.head, aug, mode, rng)
                           : augmented_prototype_proto(s, subset, z, params, model.head, aug, mode, rng));
    }
    return concat_rows<double>(protos);
  }

  if (active == AugmentMethod::noise && aug.space == AugmentSpace::sentence) {
    const RowVector<double> var = batch_variance(e.value());
    for (const auto& r : rows) {
      Var<double> s = gather_rows(e, r);
      const auto subset = select_hallucination_subset(r.size(), aug.ratio, rng);
      const auto noise = draw_noise<double>(static_cast<Index>(subset.size()), var, aug.noise_variance_fraction, rng);
      Var<double> all = concat_rows({s, perturb(gather_rows(s, subset), noise)});
      protos.push_back(compute_prototype(project(all, params, model.head, mode, rng)));
    }
    return concat_rows<double>(protos);
  }

  Var<double> p = project(e, params, model.head, mode, rng);
  if (active == AugmentMethod::noise) {
    const RowVector<double> var = batch_variance(p.value());
    for (const auto& r : rows) {
      Var<double> s = gather_rows(p, r);
      const auto subset = select_hallucination_subset(r.size(), aug.ratio, rng);
      const auto noise = draw_noise<double>(static_cast<Index>(subset.size()), var, aug.noise_variance_fraction, rng);
      protos.push_back(compute_prototype(concat_rows({s, perturb(gather_rows(s, subset), noise)})));
    }
    return concat_rows<double>(protos);
  }
  for (const auto& r : rows) protos.push_back(compute_prototype(gather_rows(p, r)));
  return concat_rows<double>(protos);
}

/// Proto-embeddings of `items`, evaluation mode, outside any caller tape.
template <typename Item>
Tensor<double> embed_and_project(const std::vector<Item>& items, const ParameterSet<double>& params,
                                 const ModelConfig& model, const TextResources& text) {
  Tape<double> tape;
  Rng unused(0);
  Var<double> e = embed_items(tape, items, params, model, text, Mode::eval, unused);
  return project(e, params, model.head, Mode::eval, unused).value();
}

/// Builds fresh encoder (text models only) and ProtoNet head parameters.
inline ParameterSet<double> init_model(const ModelConfig& model, Rng& rng) {
  ParameterSet<double> params;
  if (model.text) init_encoder(params, model.encoder, rng);
  if (model.head.input_dim != model.sentence_dim()) {
    throw ShapeError("init_model: head expects " + std::to_string(model.head.input_dim) +
                     "-d input, sentence embeddings are " + std::to_string(model.sentence_dim()) + "-d");
  }
  init_proto_head(params, model.head, rng);
  return params;
}

}  // namespace protoda

#endif  // PROTODA_TRAIN_MODEL_HPP
