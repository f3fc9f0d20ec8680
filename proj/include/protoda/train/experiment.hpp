#ifndef PROTODA_TRAIN_EXPERIMENT_HPP
#define PROTODA_TRAIN_EXPERIMENT_HPP

#include "protoda/eval/report.hpp"
#include "protoda/train/run_config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace protoda {

/// Missing or unreadable corpora, checkpoints or sources.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PrepareSummary {
  struct Task {
    std::string id;
    std::size_t utterances = 0;
    std::size_t intents = 0;
  };
  std::vector<Task> tasks;
  std::size_t utterances = 0;
  std::size_t intents = 0;
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;

  /// "task<TAB>utterances<TAB>intents" lines plus a total line.
  std::string text() const;
};

/// Ingests data.raw sources into data.corpus_dir: one unified JSON-lines
/// file per task, char_alphabet.json and summary.tsv. Nothing is written
/// unless every source parses.
PrepareSummary prepare_data(const RunConfig& cfg);

/// Loads the configured data and checks the seen/unseen contract without
/// side effects. Throws ConfigError, RegimeViolation or DataError.
void validate_run(const RunConfig& cfg);

struct TrainOutcome {
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path loss_log;
  std::vector<double> losses;
  std::size_t phase1_steps = 0;
  std::size_t phase2_steps = 0;
  std::optional<double> identity_check_error;
  bool completed = true;
};

/// Meta-training (protonet) or cross-entropy pretraining (conv_tl) into
/// cfg.output_dir, resuming from a periodic checkpoint when one exists.
/// stop_after > 0 ends a meta-training run early at that episode's periodic
/// checkpoint.
TrainOutcome train_run(const RunConfig& cfg, bool resume = true, std::size_t stop_after = 0);

/// k-shot trials for every k in cfg.eval.k on the test intents. Writes
/// report.jsonl and report.txt into cfg.output_dir.
std::vector<EvalReport> evaluate_run(const RunConfig& cfg);

std::filesystem::path conv_tl_checkpoint_path(const std::filesystem::path& dir);

}  // namespace protoda

#endif  // PROTODA_TRAIN_EXPERIMENT_HPP
