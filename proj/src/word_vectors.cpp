#include "protoda/corpus/vocab.hpp"

#include <charconv>
#include <fstream>

namespace protoda {

bool EmbeddingTable::insert(const std::string& word, const std::vector<float>& values) {
  if (values.size() != dimension_) {
    throw CorpusError("word vector for '" + word + "' has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(dimension_));
  }
  if (index_.count(word)) return false;
  index_.emplace(word, index_.size());
  data_.insert(data_.end(), values.begin(), values.end());
  return true;
}

Eigen::RowVectorXd EmbeddingTable::lookup(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return Eigen::RowVectorXd::Zero(static_cast<Index>(dimension_));
  Eigen::RowVectorXd v(static_cast<Index>(dimension_));
  const float* src = data_.data() + it->second * dimension_;
  for (std::size_t i = 0; i < dimension_; ++i) v(static_cast<Index>(i)) = src[i];
  return v;
}

EmbeddingTable load_word_vectors(const std::filesystem::path& path, std::size_t dimension) {
  std::ifstream is(path);
  if (!is) throw CorpusError("cannot open word vectors " + path.string());
  EmbeddingTable table(dimension);
  std::string line;
  std::size_t lineno = 0;
  std::vector<float> values;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": expected 'word v1 ... v" +
                        std::to_string(dimension) + "'");
    }
    const std::string word = line.substr(0, space);
    values.clear();
    const char* p = line.data() + space;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": bad number");
      }
      values.push_back(v);
      p = next;
    }
    if (values.size() != dimension) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": vector has " +
                        std::to_string(values.size()) + " values, expected " +
                        std::to_string(dimension));
    }
    table.insert(word, values);
  }
  return table;
}

}  // namespace protoda
