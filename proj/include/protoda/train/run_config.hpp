#ifndef PROTODA_TRAIN_RUN_CONFIG_HPP
#define PROTODA_TRAIN_RUN_CONFIG_HPP

#include "protoda/eval/synthetic.hpp"
#include "protoda/eval/trial.hpp"
#include "protoda/train/conv_tl.hpp"
#include "protoda/train/meta_train.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace protoda {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Regime { seen, unseen };
enum class TaskSet { single, multi };
enum class Method { protonet, conv_tl };

std::string to_string(Regime r);
std::string to_string(TaskSet t);
std::string to_string(Method m);

struct DataConfig {
  std::filesystem::path corpus_dir = "data/unified";
  /// Unified task files (<corpus_dir>/<name>.jsonl) used for multi-task training.
  std::vector<std::string> corpora{"atis", "fb", "snips"};
  std::filesystem::path word_vectors;  // empty: every word maps to zero
  /// Raw sources for prepare-data: format tag ("fb", "atis", "snips") -> path.
  std::map<std::string, std::filesystem::path> raw;
  /// When set, pre-embedded Gaussian tasks replace the text corpora.
  std::optional<SyntheticTaskSpec> synthetic;
};

struct TestConfig {
  std::string task = "snips";
  /// Empty: every intent of the test task.
  std::vector<std::string> intents{"GetWeather", "PlayMusic", "SearchCreativeWork"};
};

struct EvalConfig {
  std::size_t trials = 20;
  std::vector<std::size_t> k{5, 10};
  std::uint64_t seed_base = 1;
};

struct RunConfig {
  Regime regime = Regime::seen;
  TaskSet task_set = TaskSet::multi;
  Method method = Method::protonet;
  DataConfig data;
  TestConfig test;
  EncoderConfig encoder;
  ProtoHeadConfig head;
  AugmentConfig augment;
  TrainSchedule schedule;
  ConvTLConfig conv_tl;
  EvalConfig eval;
  std::filesystem::path output_dir = "runs/default";
  std::uint64_t seed = 1;
};

/// Parses a JSON document over the defaults. Unknown keys, wrong types and
/// invalid values raise ConfigError. Each override is "dotted.key=value"
/// where value is JSON (bare words are taken as strings).
RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical resolved document (sorted keys, 2-space indent).
std::string to_json(const RunConfig& cfg);
/// 16 hex digits of FNV-1a over to_json(cfg).
std::string config_digest(const RunConfig& cfg);

/// Forward-pass description implied by the config.
ModelConfig model_config(const RunConfig& cfg);
/// Canonical JSON of the parts of the config that shape the parameters.
std::string model_signature(const RunConfig& cfg);

}  // namespace protoda

#endif  // PROTODA_TRAIN_RUN_CONFIG_HPP
