#ifndef PROTODA_CORPUS_UTTERANCE_HPP
#define PROTODA_CORPUS_UTTERANCE_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace protoda {

enum class Split { train, validation };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct Utterance {
  std::string text;
  std::vector<std::string> tokens;
  std::string intent;
  std::string task_id;
  Split split = Split::train;

  bool operator==(const Utterance&) const = default;
};

/// A sample that is already a sentence embedding (synthetic tasks, cached
/// encoder output). Bypasses the text encoder.
struct EmbeddedSample {
  Eigen::RowVectorXd vector;

  bool operator==(const EmbeddedSample& o) const { return vector == o.vector; }
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases ASCII letters, splits ASCII punctuation off as standalone
/// tokens and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Validates and tokenizes; throws CorpusError on empty text or intent.
Utterance make_utterance(std::string text, std::string intent, std::string task_id, Split split);

/// UTF-8 decoding with invalid bytes mapped to U+FFFD.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(char32_t cp);

}  // namespace protoda

#endif  // PROTODA_CORPUS_UTTERANCE_HPP
