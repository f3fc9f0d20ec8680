#include "protoda/train/experiment.hpp"

#include "protoda/corpus/ingest.hpp"
#include "protoda/corpus/vocab.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace protoda {

namespace fs = std::filesystem;

std::string PrepareSummary::text() const {
  std::ostringstream os;
  for (const auto& t : tasks) os << t.id << '\t' << t.utterances << '\t' << t.intents << '\n';
  os << "total\t" << utterances << '\t' << intents << '\n';
  return os.str();
}

fs::path conv_tl_checkpoint_path(const fs::path& dir) { return dir / "conv_tl.ckpt"; }

PrepareSummary prepare_data(const RunConfig& cfg) {
  if (cfg.data.raw.empty()) throw ConfigError("prepare-data: data.raw lists no sources");
  TaskRegistry all;
  PrepareSummary summary;
  for (const auto& [tag, path] : cfg.data.raw) {
    if (!fs::exists(path)) throw DataError("source not found: " + path.string());
    if (fs::is_directory(path) && fs::is_empty(path)) throw DataError("source directory is empty: " + path.string());
    try {
      auto res = ingest({path}, parse_source_format(tag));
      if (res.registry.empty()) throw DataError("no usable utterances in " + path.string());
      all.merge(res.registry);
      summary.warnings.insert(summary.warnings.end(), res.warnings.begin(), res.warnings.end());
    } catch (const CorpusError& e) {
      throw DataError(e.what());
    }
  }
  for (const auto& [id, intents] : all.tasks()) {
    PrepareSummary::Task t{id, 0, intents.size()};
    for (const auto& [name, pool] : intents) t.utterances += pool.size();
    summary.tasks.push_back(t);
    summary.utterances += t.utterances;
    summary.intents += t.intents;
  }

  // stage everything, then move into place so a failure leaves no partial output
  const fs::path dir = cfg.data.corpus_dir;
  const fs::path stage = dir.string() + ".staging";
  fs::remove_all(stage);
  try {
    const auto written = write_unified(all, stage);
    CharAlphabet::from_registry(all).save(stage / "char_alphabet.json");
    std::ofstream(stage / "summary.tsv", std::ios::binary) << summary.text();
    fs::create_directories(dir);
    std::vector<fs::path> names;
    for (const auto& p : written) names.push_back(p.filename());
    names.push_back("char_alphabet.json");
    names.push_back("summary.tsv");
    for (const auto& n : names) {
      fs::rename(stage / n, dir / n);
      summary.outputs.push_back(dir / n);
    }
    fs::remove_all(stage);
  } catch (...) {
    fs::remove_all(stage);
    throw;
  }
  return summary;
}

namespace {

/// Text-side resources kept alive for the duration of a command.
struct TextData {
  CharAlphabet alphabet;
  EmbeddingTable vectors;
  TextResources resources() const { return {&alphabet, &vectors}; }
};

TaskRegistry load_text_corpora(const RunConfig& cfg) {
  std::set<std::string> names;
  if (cfg.task_set == TaskSet::multi) names.insert(cfg.data.corpora.begin(), cfg.data.corpora.end());
  names.insert(cfg.test.task);
  std::vector<fs::path> files;
  for (const auto& n : names) {
    const fs::path p = cfg.data.corpus_dir / (n + ".jsonl");
    if (!fs::exists(p)) throw DataError("prepared corpus not found: " + p.string() + " (run prepare-data)");
    files.push_back(p);
  }
  try {
    return ingest(files, SourceFormat::unified).registry;
  } catch (const CorpusError& e) {
    throw DataError(e.what());
  }
}

TextData load_text_data(const RunConfig& cfg) {
  TextData t;
  const fs::path alpha = cfg.data.corpus_dir / "char_alphabet.json";
  if (!fs::exists(alpha)) throw DataError("char alphabet not found: " + alpha.string() + " (run prepare-data)");
  try {
    t.alphabet = CharAlphabet::load(alpha);
    t.vectors = EmbeddingTable(static_cast<std::size_t>(cfg.encoder.word_dim));
    if (!cfg.data.word_vectors.empty()) {
      if (!fs::exists(cfg.data.word_vectors)) throw DataError("word vectors not found: " + cfg.data.word_vectors.string());
      t.vectors = load_word_vectors(cfg.data.word_vectors, static_cast<std::size_t>(cfg.encoder.word_dim));
    }
  } catch (const CorpusError& e) {
    throw DataError(e.what());
  }
  return t;
}

template <typename Item>
std::vector<std::string> resolved_test_intents(const BasicTaskRegistry<Item>& all, const RunConfig& cfg) {
  if (!all.contains(cfg.test.task)) throw DataError("test task '" + cfg.test.task + "' not found in the data");
  if (cfg.test.intents.empty()) return all.intents(cfg.test.task);
  std::string missing;
  for (const auto& i : cfg.test.intents) {
    if (!all.task(cfg.test.task).count(i)) missing += (missing.empty() ? "" : ", ") + i;
  }
  if (!missing.empty()) throw DataError("test task '" + cfg.test.task + "' lacks test intents: " + missing);
  return cfg.test.intents;
}

/// Training tasks per regime and task set. Under "unseen" the test intents
/// are removed from the test task; any other task still carrying one of
/// them is a configuration error listing the offenders.
template <typename Item>
BasicTaskRegistry<Item> training_registry(const BasicTaskRegistry<Item>& all, const RunConfig& cfg) {
  const auto test_intents = resolved_test_intents(all, cfg);
  const std::set<std::string> test_set(test_intents.begin(), test_intents.end());
  std::set<std::string> tasks;
  if (cfg.task_set == TaskSet::single || cfg.data.synthetic) {
    for (const auto& id : all.task_ids())
      if (cfg.task_set == TaskSet::multi || id == cfg.test.task) tasks.insert(id);
  } else {
    tasks.insert(cfg.data.corpora.begin(), cfg.data.corpora.end());
  }
  if (cfg.regime == Regime::seen && !tasks.count(cfg.test.task)) {
    throw ConfigError("regime 'seen' needs the test task '" + cfg.test.task +
                      "' among the training corpora; its intents would otherwise be unseen");
  }
  auto reg = all.select([&](const std::string& task, const std::string& intent) {
    if (!tasks.count(task)) return false;
    if (cfg.regime == Regime::unseen && task == cfg.test.task && test_set.count(intent)) return false;
    return true;
  });
  if (cfg.regime == Regime::unseen) check_regime(reg, test_intents);
  reg = reg.select([&](const std::string& task, const std::string& intent) {
    return !reg.task(task).at(intent).train.empty();
  });
  reg = reg.filtered(1, 2);
  if (reg.empty()) throw ConfigError("no training task with at least two intents remains for this regime/task set");
  return reg;
}

MetaTrainOptions meta_options(const RunConfig& cfg, const std::vector<std::string>& test_intents, bool resume,
                              std::size_t stop_after) {
  MetaTrainOptions o;
  o.model = model_config(cfg);
  o.schedule = cfg.schedule;
  o.output_dir = cfg.output_dir;
  if (cfg.regime == Regime::unseen) o.forbidden_intents = test_intents;
  o.resume = resume;
  o.stop_after = stop_after;
  o.metadata["model"] = model_signature(cfg);
  o.metadata["config_digest"] = config_digest(cfg);
  return o;
}

std::string join_lines(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += x + "\n";
  return s;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

/// ConvTL pretrains on training intents only; the test intents' train
/// partitions are reserved for fine-tuning in every regime.
template <typename Item>
BasicTaskRegistry<Item> registry_for(const BasicTaskRegistry<Item>& all, const RunConfig& cfg) {
  if (cfg.method == Method::protonet) return training_registry(all, cfg);
  RunConfig pre = cfg;
  pre.regime = Regime::unseen;
  return training_registry(all, pre);
}

template <typename Item>
TrainOutcome train_with(const BasicTaskRegistry<Item>& all, const RunConfig& cfg, bool resume,
                        std::size_t stop_after, const TextResources& text) {
  const auto train_reg = registry_for(all, cfg);
  const auto test_intents = resolved_test_intents(all, cfg);
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "config.json", std::ios::binary) << to_json(cfg) << '\n';

  TrainOutcome out;
  out.loss_log = loss_log_path(cfg.output_dir);
  if (cfg.method == Method::protonet) {
    auto r = meta_train(train_reg, meta_options(cfg, test_intents, resume, stop_after), text);
    out.checkpoints = r.checkpoints;
    out.losses = std::move(r.losses);
    out.phase1_steps = r.phase1_steps;
    out.phase2_steps = r.phase2_steps;
    out.identity_check_error = r.identity_check_error;
    out.completed = r.completed;
    return out;
  }
  Rng rng(cfg.seed);
  ModelConfig model = model_config(cfg);
  ConvTLModel m = conv_tl_train(train_reg, model, cfg.conv_tl, rng, text);
  std::ofstream log(out.loss_log, std::ios::binary | std::ios::trunc);
  const std::size_t every = cfg.schedule.log_every;
  for (std::size_t i = every; i <= m.loss_history.size(); i += every) {
    double s = 0.0;
    for (std::size_t j = i - every; j < i; ++j) s += m.loss_history[j];
    log << i << '\t' << detail::format_loss(s / static_cast<double>(every)) << '\n';
  }
  Checkpoint<double> ck{m.params, {}};
  ck.metadata["model"] = model_signature(cfg);
  ck.metadata["config_digest"] = config_digest(cfg);
  ck.metadata["classes"] = join_lines(m.classes);
  save_checkpoint(conv_tl_checkpoint_path(cfg.output_dir), ck);
  out.checkpoints.push_back(conv_tl_checkpoint_path(cfg.output_dir));
  out.losses = m.loss_history;
  return out;
}

Checkpoint<double> load_for_eval(const fs::path& path, const RunConfig& cfg) {
  if (!fs::exists(path)) throw DataError("checkpoint not found: " + path.string() + " (run train first)");
  Checkpoint<double> ck;
  try {
    ck = load_checkpoint<double>(path);
  } catch (const CheckpointError& e) {
    throw DataError(e.what());
  }
  auto it = ck.metadata.find("model");
  if (it == ck.metadata.end() || it->second != model_signature(cfg)) {
    throw ConfigError("checkpoint " + path.string() + " was trained with a different model configuration");
  }
  return ck;
}

template <typename Item>
std::vector<EvalReport> evaluate_with(const BasicTaskRegistry<Item>& all, const RunConfig& cfg,
                                      const TextResources& text) {
  const auto task = make_test_task(all, cfg.test.task, resolved_test_intents(all, cfg));
  const ModelConfig model = model_config(cfg);
  std::vector<EvalReport> reports;
  for (std::size_t k : cfg.eval.k) {
    const TrialConfig tc{cfg.eval.trials, k, cfg.eval.seed_base};
    EvalReport r;
    r.method = to_string(cfg.method);
    r.augmentation = to_string(cfg.augment.method);
    r.space = cfg.augment.method == AugmentMethod::none ? "" : to_string(cfg.augment.space);
    r.k = k;
    r.seed = cfg.eval.seed_base;
    r.config_digest = config_digest(cfg);
    r.config = to_json(cfg);
    if (cfg.method == Method::protonet) {
      const int phase = cfg.augment.method == AugmentMethod::hallucinate ? 2 : 1;
      const auto ck = load_for_eval(phase_checkpoint_path(cfg.output_dir, phase), cfg);
      r.trial_scores = run_trials(ck.params, model, task, tc, cfg.augment.method, text);
    } else {
      auto ck = load_for_eval(conv_tl_checkpoint_path(cfg.output_dir), cfg);
      ConvTLModel m;
      m.model = model;
      m.config = cfg.conv_tl;
      m.params = std::move(ck.params);
      m.classes = split_lines(ck.metadata["classes"]);
      r.trial_scores = run_conv_tl_trials(m, task, tc, text);
    }
    reports.push_back(summarize(std::move(r)));
  }
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "report.jsonl", std::ios::binary) << to_jsonl(reports);
  std::ofstream(cfg.output_dir / "report.txt", std::ios::binary) << format_report(reports);
  return reports;
}

}  // namespace

void validate_run(const RunConfig& cfg) {
  if (cfg.data.synthetic) {
    registry_for(generate_synthetic_tasks(*cfg.data.synthetic), cfg);
  } else {
    load_text_data(cfg);
    registry_for(load_text_corpora(cfg), cfg);
  }
}

TrainOutcome train_run(const RunConfig& cfg, bool resume, std::size_t stop_after) {
  if (cfg.data.synthetic) return train_with(generate_synthetic_tasks(*cfg.data.synthetic), cfg, resume, stop_after, {});
  const TextData text = load_text_data(cfg);
  return train_with(load_text_corpora(cfg), cfg, resume, stop_after, text.resources());
}

std::vector<EvalReport> evaluate_run(const RunConfig& cfg) {
  if (cfg.data.synthetic) return evaluate_with(generate_synthetic_tasks(*cfg.data.synthetic), cfg, {});
  const TextData text = load_text_data(cfg);
  return evaluate_with(load_text_corpora(cfg), cfg, text.resources());
}

}  // namespace protoda
