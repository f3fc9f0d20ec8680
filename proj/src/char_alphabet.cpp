#include "protoda/corpus/vocab.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace protoda {

CharAlphabet::CharAlphabet(std::vector<char32_t> chars) : chars_(std::move(chars)) {
  if (chars_.size() > kRetained) {
    throw std::invalid_argument("CharAlphabet holds at most 31 characters");
  }
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    if (!lookup_.emplace(chars_[i], i).second) {
      throw std::invalid_argument("CharAlphabet: duplicate character");
    }
  }
}

CharAlphabet CharAlphabet::from_registry(const TaskRegistry& registry) {
  std::map<char32_t, std::size_t> counts;
  for (const auto& [task, intents] : registry.tasks()) {
    for (const auto& [intent, pool] : intents) {
      for (Split s : {Split::train, Split::validation}) {
        for (const auto& u : pool.split(s)) {
          for (const auto& tok : u.tokens) {
            for (char32_t c : decode_utf8(tok)) ++counts[c];
          }
        }
      }
    }
  }
  std::vector<std::pair<char32_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<char32_t> chars;
  for (std::size_t i = 0; i < ranked.size() && i < kRetained; ++i) chars.push_back(ranked[i].first);
  return CharAlphabet(std::move(chars));
}

std::size_t CharAlphabet::index(char32_t c) const {
  auto it = lookup_.find(c);
  return it == lookup_.end() ? kCatchAll : it->second;
}

std::string CharAlphabet::to_json() const {
  nlohmann::json j;
  j["one_hot_dim"] = kOneHotDim;
  j["catch_all"] = kCatchAll;
  auto arr = nlohmann::json::array();
  for (char32_t c : chars_) arr.push_back(encode_utf8(c));
  j["characters"] = arr;
  return j.dump(2) + "\n";
}

CharAlphabet CharAlphabet::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("one_hot_dim", 0) != static_cast<int>(kOneHotDim) ||
      j.value("catch_all", -1) != static_cast<int>(kCatchAll)) {
    throw CorpusError("char alphabet: unexpected one-hot layout");
  }
  std::vector<char32_t> chars;
  for (const auto& s : j.at("characters")) {
    const auto decoded = decode_utf8(s.get<std::string>());
    if (decoded.size() != 1) throw CorpusError("char alphabet: entries must be single characters");
    chars.push_back(decoded[0]);
  }
  return CharAlphabet(std::move(chars));
}

void CharAlphabet::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CorpusError("cannot write " + path.string());
  os << to_json();
}

CharAlphabet CharAlphabet::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorpusError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str());
}

}  // namespace protoda
