#ifndef PROTODA_TRAIN_META_TRAIN_HPP
#define PROTODA_TRAIN_META_TRAIN_HPP

#include "protoda/corpus/episode.hpp"
#include "protoda/numerics/adam.hpp"
#include "protoda/numerics/checkpoint.hpp"
#include "protoda/train/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace protoda {

struct TrainSchedule {
  std::size_t phase1_episodes = 20000;
  std::size_t phase2_episodes = 20000;
  std::size_t k = 5;
  std::size_t q = 10;
  AdamOptions adam{0.001, 0.9, 0.99, 1e-8};
  std::size_t checkpoint_every = 1000;
  std::size_t log_every = 100;
  std::uint64_t seed = 1;
};

struct EpisodeResult {
  double loss = 0.0;
  std::string task_id;
  std::vector<std::string> classes;
};

/// Eq.-3 loss of one episode. Labels are class-major: the queries of
/// class c are labelled c.
template <typename Item>
Var<double> episode_forward(Tape<double>& tape, const Episode<Item>& ep, const ParameterSet<double>& params,
                            const ModelConfig& model, const TextResources& text, AugmentMethod active,
                            Mode mode, Rng& rng) {
  Var<double> protos = class_prototypes(tape, ep.supports, params, model, text, active, mode, rng);
  Var<double> q = project(embed_items(tape, flatten(ep.queries), params, model, text, mode, rng), params,
                          model.head, mode, rng);
  std::vector<Index> labels;
  for (std::size_t c = 0; c < ep.queries.size(); ++c) labels.insert(labels.end(), ep.queries[c].size(), Index(c));
  return episode_loss(q, labels, protos, model.head.distance);
}

/// Forward, backward and one Adam step on every trainable parameter.
/// Returns the loss before the step.
template <typename Item>
double train_on_episode(const Episode<Item>& ep, ParameterSet<double>& params, const ModelConfig& model,
                        const TextResources& text, AugmentMethod active, const AdamOptions& adam, Rng& rng) {
  Tape<double> tape;
  Var<double> loss = episode_forward(tape, ep, params, model, text, active, Mode::train, rng);
  const double value = loss.scalar();
  if (!std::isfinite(value)) {
    std::string classes;
    for (const auto& c : ep.classes) classes += (classes.empty() ? "" : ",") + c;
    throw NumericAbort("non-finite episode loss " + std::to_string(value) + " on task '" + ep.task_id +
                       "' (classes " + classes + ")");
  }
  tape.backward(loss);
  adam_step(params, tape.parameter_gradients(), adam);
  return value;
}

/// Samples one episode (k supports, q queries per class) and trains on it.
template <typename Item>
EpisodeResult run_episode(const BasicTaskRegistry<Item>& registry, ParameterSet<double>& params,
                          const TrainSchedule& schedule, const ModelConfig& model, const TextResources& text,
                          AugmentMethod active, Rng& rng,
                          const std::function<void(const Episode<Item>&)>& inspect = {}) {
  const Episode<Item> ep = sample_episode(registry, rng, schedule.k, schedule.q);
  if (inspect) inspect(ep);
  EpisodeResult r;
  r.loss = train_on_episode(ep, params, model, text, active, schedule.adam, rng);
  r.task_id = ep.task_id;
  r.classes = ep.classes;
  return r;
}

struct MetaTrainOptions {
  ModelConfig model;
  TrainSchedule schedule;
  std::filesystem::path output_dir;
  /// Intents that must never appear in an episode (unseen regime).
  std::vector<std::string> forbidden_intents;
  bool resume = true;
  /// Nonzero: return once this episode and its periodic checkpoint are
  /// done, leaving resume.ckpt behind. Must be a multiple of checkpoint_every.
  std::size_t stop_after = 0;
  /// Extra checkpoint metadata (resolved config, digests).
  std::map<std::string, std::string> metadata;
};

struct MetaTrainResult {
  ParameterSet<double> params;
  std::vector<double> losses;  // episodes run by this call, in order
  std::size_t first_episode = 1;
  std::size_t phase1_steps = 0;
  std::size_t phase2_steps = 0;
  std::vector<std::filesystem::path> checkpoints;
  std::optional<double> identity_check_error;
  bool completed = false;  // false when stopped early by stop_after
  std::uint64_t encoder_digest_before_phase2 = 0;
  std::uint64_t encoder_digest_after_phase2 = 0;
};

inline std::filesystem::path phase_checkpoint_path(const std::filesystem::path& dir, int phase) {
  return dir / ("phase" + std::to_string(phase) + ".ckpt");
}
inline std::filesystem::path resume_checkpoint_path(const std::filesystem::path& dir) {
  return dir / "resume.ckpt";
}
inline std::filesystem::path loss_log_path(const std::filesystem::path& dir) { return dir / "loss.log"; }

namespace detail {

inline std::string format_loss(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Keeps the loss-log lines whose episode is <= `last`.
inline void truncate_loss_log(const std::filesystem::path& path, std::size_t last) {
  std::ifstream in(path);
  std::string kept, line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    if (std::stoull(line.substr(0, tab)) <= last) kept += line + "\n";
  }
  in.close();
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << kept;
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw CheckpointError("corrupt rng state in resume checkpoint");
}

}  // namespace detail

/// Checks the registry against the unseen-regime contract before any
/// training work. Throws RegimeViolation listing offending task/intent pairs.
template <typename Item>
void check_regime(const BasicTaskRegistry<Item>& registry, const std::vector<std::string>& forbidden) {
  const std::set<std::string> bad(forbidden.begin(), forbidden.end());
  std::string found;
  for (const auto& [task, intents] : registry.tasks()) {
    for (const auto& [intent, pool] : intents) {
      if (bad.count(intent)) found += (found.empty() ? "" : ", ") + task + "/" + intent;
    }
  }
  if (!found.empty()) throw RegimeViolation("test intents present in training data: " + found);
}

/// Identity-initialises the hallucinator, freezes the encoder, and checks
/// G(u, 0) = u on a nonnegative embedding of a real training sample.
/// Returns the max deviation.
template <typename Item>
double begin_hallucination_phase(const BasicTaskRegistry<Item>& registry, ParameterSet<double>& params,
                                 const ModelConfig& model, const TextResources& text) {
  const Index dim = model.augment.space == AugmentSpace::sentence ? model.sentence_dim() : model.head.output_dim;
  init_identity(params, dim, model.augment.identity_layout);
  if (model.text) freeze_encoder(params);

  const auto& pool = registry.tasks().begin()->second.begin()->second;
  const std::vector<Item> probe{pool.train.empty() ? pool.validation.front() : pool.train.front()};
  Tape<double> tape;
  Rng unused(0);
  Var<double> e = embed_items(tape, probe, params, model, text, Mode::eval, unused);
  Tensor<double> u = model.augment.space == AugmentSpace::proto
                         ? project(e, params, model.head, Mode::eval, unused).value()
                         : Tensor<double>(e.value().cwiseAbs());
  Var<double> g = hallucinate(tape.constant(u), tape.constant(Tensor<double>::Zero(1, dim)), params,
                              model.augment.hallucinator_dropout, Mode::eval, unused);
  const double err = (g.value() - u).cwiseAbs().maxCoeff();
  if (model.augment.identity_layout == IdentityLayout::sum && err > 1e-12) {
    throw NumericAbort("hallucinator identity check failed at phase-2 start: max deviation " + std::to_string(err));
  }
  return err;
}

/// Two-phase episodic training. Phase 1 trains encoder and head (noise
/// augmentation, when configured, is applied here). With hallucination, phase
/// 2 freezes the encoder and trains hallucinator and head. Writes
/// phase1.ckpt / phase2.ckpt, a periodic resume.ckpt (removed on success) and
/// loss.log with the mean loss of each log window.
template <typename Item>
MetaTrainResult meta_train(const BasicTaskRegistry<Item>& registry, const MetaTrainOptions& opt,
                           const TextResources& text = {}) {
  const TrainSchedule& s = opt.schedule;
  const ModelConfig& model = opt.model;
  if (registry.empty()) throw std::invalid_argument("meta_train: empty training registry");
  if (s.log_every == 0 || s.checkpoint_every == 0 || s.checkpoint_every % s.log_every != 0) {
    throw std::invalid_argument("meta_train: checkpoint_every must be a positive multiple of log_every");
  }
  if (s.phase1_episodes == 0) throw std::invalid_argument("meta_train: phase 1 needs at least one episode");
  if (opt.stop_after % s.checkpoint_every != 0) {
    throw std::invalid_argument("meta_train: stop_after must be a multiple of checkpoint_every");
  }
  check_regime(registry, opt.forbidden_intents);
  const bool hallucinate_phase = model.augment.method == AugmentMethod::hallucinate;
  const AugmentMethod phase1_aug = model.augment.method == AugmentMethod::noise ? AugmentMethod::noise
                                                                                 : AugmentMethod::none;
  const std::size_t total = s.phase1_episodes + (hallucinate_phase ? s.phase2_episodes : 0);

  std::filesystem::create_directories(opt.output_dir);
  const auto resume_path = resume_checkpoint_path(opt.output_dir);
  const auto log_path = loss_log_path(opt.output_dir);

  MetaTrainResult result;
  Rng rng(s.seed);
  std::size_t episode = 0;
  if (opt.resume && std::filesystem::exists(resume_path)) {
    auto ck = load_checkpoint<double>(resume_path);
    for (const auto& [k, v] : opt.metadata) {
      auto it = ck.metadata.find(k);
      if (it != ck.metadata.end() && it->second != v) {
        throw CheckpointError("resume checkpoint was written by a different configuration (" + k + ")");
      }
    }
    result.params = std::move(ck.params);
    episode = std::stoull(ck.metadata.at("episode"));
    detail::restore_rng(rng, ck.metadata.at("rng"));
    detail::truncate_loss_log(log_path, episode);
  } else {
    result.params = init_model(model, rng);
    std::ofstream(log_path, std::ios::trunc | std::ios::binary);
  }
  ParameterSet<double>& params = result.params;
  result.first_episode = episode + 1;

  const std::set<std::string> forbidden(opt.forbidden_intents.begin(), opt.forbidden_intents.end());
  std::function<void(const Episode<Item>&)> guard;
  if (!forbidden.empty()) {
    guard = [&forbidden](const Episode<Item>& ep) {
      for (const auto& c : ep.classes) {
        if (forbidden.count(c)) throw RegimeViolation("test intent '" + c + "' sampled in task '" + ep.task_id + "'");
      }
    };
  }

  auto save = [&](const std::filesystem::path& path, int phase) {
    Checkpoint<double> ck{params, opt.metadata};
    ck.metadata["episode"] = std::to_string(episode);
    ck.metadata["phase"] = std::to_string(phase);
    ck.metadata["rng"] = detail::rng_state(rng);
    save_checkpoint(path, ck);
  };

  std::ofstream log(log_path, std::ios::app | std::ios::binary);
  double window = 0.0;
  auto step = [&](AugmentMethod active, int phase) {
    ++episode;
    const auto r = run_episode(registry, params, s, model, text, active, rng, guard);
    result.losses.push_back(r.loss);
    window += r.loss;
    if (episode % s.log_every == 0) {
      log << episode << '\t' << detail::format_loss(window / static_cast<double>(s.log_every)) << '\n';
      log.flush();
      window = 0.0;
    }
    if (episode % s.checkpoint_every == 0 && episode < total) save(resume_path, phase);
    return episode == opt.stop_after && episode < total;
  };

  while (episode < s.phase1_episodes) {
    ++result.phase1_steps;
    if (step(phase1_aug, 1)) return result;
  }
  const bool in_phase2 = hallucinate_phase && params.contains(std::string(kHallucinatorPrefix) + "l1/w");
  if (!in_phase2) {
    save(phase_checkpoint_path(opt.output_dir, 1), 1);
  }
  result.checkpoints.push_back(phase_checkpoint_path(opt.output_dir, 1));

  if (hallucinate_phase) {
    if (!in_phase2) result.identity_check_error = begin_hallucination_phase(registry, params, model, text);
    result.encoder_digest_before_phase2 = parameter_digest(params, kEncoderPrefix);
    while (episode < total) {
      ++result.phase2_steps;
      if (step(AugmentMethod::hallucinate, 2)) return result;
    }
    result.encoder_digest_after_phase2 = parameter_digest(params, kEncoderPrefix);
    if (result.encoder_digest_after_phase2 != result.encoder_digest_before_phase2) {
      throw NumericAbort("encoder parameters changed during phase 2");
    }
    save(phase_checkpoint_path(opt.output_dir, 2), 2);
    result.checkpoints.push_back(phase_checkpoint_path(opt.output_dir, 2));
  }
  std::filesystem::remove(resume_path);
  result.completed = true;
  return result;
}

}  // namespace protoda

#endif  // PROTODA_TRAIN_META_TRAIN_HPP
