#ifndef PROTODA_CORPUS_VOCAB_HPP
#define PROTODA_CORPUS_VOCAB_HPP

#include "protoda/corpus/registry.hpp"
#include "protoda/numerics/tensor.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace protoda {

inline constexpr std::size_t kWordVectorDim = 100;

/// Pretrained word vectors. Absent words map to the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension = kWordVectorDim) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return index_.size(); }
  bool contains(const std::string& word) const { return index_.count(word) > 0; }

  /// Returns false (and keeps the existing vector) when `word` is present.
  bool insert(const std::string& word, const std::vector<float>& values);

  Eigen::RowVectorXd lookup(const std::string& word) const;

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
};

/// Reads "word v1 ... vD" lines. The first occurrence of a word wins.
/// Throws CorpusError with the line number on a wrong-length line.
EmbeddingTable load_word_vectors(const std::filesystem::path& path,
                                 std::size_t dimension = kWordVectorDim);

/// The 31 most frequent characters of a corpus plus one catch-all slot.
class CharAlphabet {
 public:
  static constexpr std::size_t kRetained = 31;
  static constexpr std::size_t kOneHotDim = 32;
  static constexpr std::size_t kCatchAll = 31;

  CharAlphabet() = default;
  explicit CharAlphabet(std::vector<char32_t> chars);

  /// Counts characters over the tokens of every utterance; ties broken by
  /// code point.
  static CharAlphabet from_registry(const TaskRegistry& registry);

  std::size_t index(char32_t c) const;
  const std::vector<char32_t>& characters() const { return chars_; }

  std::string to_json() const;
  static CharAlphabet from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static CharAlphabet load(const std::filesystem::path& path);

  bool operator==(const CharAlphabet& o) const { return chars_ == o.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, std::size_t> lookup_;
};

}  // namespace protoda

#endif  // PROTODA_CORPUS_VOCAB_HPP
