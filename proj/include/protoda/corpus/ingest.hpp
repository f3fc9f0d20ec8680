#ifndef PROTODA_CORPUS_INGEST_HPP
#define PROTODA_CORPUS_INGEST_HPP

#include "protoda/corpus/registry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace protoda {

enum class SourceFormat {
  unified,  // JSON-lines {text, intent, task, split}
  snips,    // per-intent directories of the SNIPS benchmark release
  atis,     // train/ valid|dev/ test/ directories with seq.in + label
  fb,       // TOP release *.tsv: raw <TAB> tokenized <TAB> bracketed tree
};

SourceFormat parse_source_format(std::string_view tag);
std::string_view to_string(SourceFormat format);

inline constexpr std::size_t kMinUtterancesPerIntent = 20;

struct IngestOptions {
  // Defaults per format: 20 for fb and atis, no filter otherwise.
  std::optional<std::size_t> min_utterances;
  // Task id for formats that do not carry one; defaults to the format tag.
  std::optional<std::string> task_id;
};

struct IngestResult {
  TaskRegistry registry;
  std::vector<std::string> warnings;
  std::size_t dropped_multi_root = 0;
};

/// Parses every source, applies the intent-size filter and drops tasks left
/// with fewer than two intents. Throws CorpusError naming file and line on
/// malformed input.
IngestResult ingest(const std::vector<std::filesystem::path>& sources, SourceFormat format,
                    const IngestOptions& options = {});

/// Writes one `<task>.jsonl` per task, sorted by task, intent, split, then
/// source order. Returns the written paths.
std::vector<std::filesystem::path> write_unified(const TaskRegistry& registry,
                                                 const std::filesystem::path& dir);

inline const std::vector<std::string>& snips_train_intents() {
  static const std::vector<std::string> v{"BookRestaurant", "AddToPlaylist", "RateBook",
                                          "SearchScreeningEvent"};
  return v;
}
inline const std::vector<std::string>& snips_test_intents() {
  static const std::vector<std::string> v{"PlayMusic", "GetWeather", "SearchCreativeWork"};
  return v;
}

/// Partitions the SNIPS task into its four train intents and three test
/// intents. Throws CorpusError listing any missing intent.
std::pair<TaskRegistry, TaskRegistry> split_snips(const TaskRegistry& registry,
                                                  const std::string& task_id = "snips");

/// Root intent of a bracketed TOP tree, or nullopt when the tree has more
/// than one top-level intent.
std::optional<std::string> top_root_intent(std::string_view tree);

}  // namespace protoda

#endif  // PROTODA_CORPUS_INGEST_HPP
