#include "source_parsers.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace protoda {

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CorpusError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

[[noreturn]] void fail_at(const fs::path& file, std::size_t line, const std::string& what) {
  throw CorpusError(file.string() + ":" + std::to_string(line) + ": " + what);
}

std::string latin1_to_utf8(std::string_view bytes) {
  std::string out;
  for (char ch : bytes) out += encode_utf8(static_cast<unsigned char>(ch));
  return out;
}

std::vector<fs::path> sorted_entries(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// SNIPS benchmark files: {"<Intent>": [{"data": [{"text": ...}, ...]}, ...]}.
// Some release files are Latin-1; those are transcoded before parsing.
void parse_snips_file(const fs::path& file, const std::string& task, Split split,
                      std::vector<Utterance>& out) {
  std::string bytes = read_file(file);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error&) {
    try {
      doc = nlohmann::json::parse(latin1_to_utf8(bytes));
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(file.string() + ": " + e.what());
    }
  }
  if (!doc.is_object() || doc.size() != 1) {
    throw CorpusError(file.string() + ": expected an object with a single intent key");
  }
  const auto& [intent, records] = *doc.items().begin();
  if (!records.is_array()) throw CorpusError(file.string() + ": intent value is not an array");
  std::size_t index = 0;
  for (const auto& rec : records) {
    ++index;
    if (!rec.contains("data") || !rec["data"].is_array()) {
      throw CorpusError(file.string() + ": record " + std::to_string(index) + " lacks \"data\"");
    }
    std::string text;
    for (const auto& chunk : rec["data"]) text += chunk.value("text", std::string());
    try {
      out.push_back(make_utterance(trim(text), intent, task, split));
    } catch (const CorpusError& e) {
      throw CorpusError(file.string() + ": record " + std::to_string(index) + ": " + e.what());
    }
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw CorpusError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::optional<std::string> top_root_intent(std::string_view tree) {
  int depth = 0;
  int roots = 0;
  std::string first;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    if (tree[i] == '[') {
      if (depth == 0) {
        ++roots;
        if (roots == 1) {
          const auto end = tree.find_first_of(" ]", i + 1);
          first = std::string(tree.substr(i + 1, end == std::string_view::npos ? std::string_view::npos
                                                                                : end - i - 1));
        }
      }
      ++depth;
    } else if (tree[i] == ']') {
      if (--depth < 0) throw CorpusError("unbalanced brackets in tree");
    }
  }
  if (depth != 0) throw CorpusError("unbalanced brackets in tree");
  if (roots == 0) throw CorpusError("tree has no bracketed intent");
  if (roots > 1) return std::nullopt;
  if (!first.starts_with("IN:")) throw CorpusError("tree root is not an intent: " + first);
  return first.substr(3);
}

namespace detail {

ParseOutcome parse_unified(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw CorpusError("cannot open " + file.string());
  ParseOutcome out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_at(file, lineno, e.what());
    }
    if (!j.is_object()) fail_at(file, lineno, "record is not a JSON object");
    for (const char* key : {"text", "intent", "task", "split"}) {
      if (!j.contains(key) || !j[key].is_string()) {
        fail_at(file, lineno, std::string("missing string field \"") + key + "\"");
      }
    }
    try {
      out.utterances.push_back(make_utterance(j["text"].get<std::string>(),
                                              j["intent"].get<std::string>(),
                                              j["task"].get<std::string>(),
                                              parse_split(j["split"].get<std::string>())));
    } catch (const CorpusError& e) {
      fail_at(file, lineno, e.what());
    }
    if (out.utterances.back().task_id.empty()) fail_at(file, lineno, "empty task");
  }
  return out;
}

ParseOutcome parse_snips(const fs::path& root, const std::string& task) {
  if (!fs::is_directory(root)) throw CorpusError("SNIPS source must be a directory: " + root.string());
  ParseOutcome out;
  for (const auto& dir : sorted_entries(root)) {
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> train_files;
    std::vector<fs::path> validate_files;
    for (const auto& f : sorted_entries(dir)) {
      const std::string name = f.filename().string();
      if (f.extension() != ".json") continue;
      if (name.starts_with("train_")) train_files.push_back(f);
      if (name.starts_with("validate_")) validate_files.push_back(f);
    }
    // Prefer the full training file when both variants exist.
    auto full = std::find_if(train_files.begin(), train_files.end(), [](const fs::path& p) {
      return p.stem().string().ends_with("_full");
    });
    if (full != train_files.end()) train_files = {*full};
    for (const auto& f : train_files) parse_snips_file(f, task, Split::train, out.utterances);
    for (const auto& f : validate_files) parse_snips_file(f, task, Split::validation, out.utterances);
  }
  if (out.utterances.empty()) throw CorpusError("no SNIPS intent files under " + root.string());
  return out;
}

ParseOutcome parse_atis(const fs::path& root, const std::string& task) {
  if (!fs::is_directory(root)) throw CorpusError("ATIS source must be a directory: " + root.string());
  ParseOutcome out;
  const std::vector<std::pair<std::string, Split>> parts = {
      {"train", Split::train}, {"valid", Split::validation}, {"dev", Split::validation},
      {"test", Split::validation}};
  for (const auto& [sub, split] : parts) {
    const fs::path dir = root / sub;
    if (!fs::is_directory(dir)) continue;
    const auto texts = read_lines(dir / "seq.in");
    const auto labels = read_lines(dir / "label");
    if (texts.size() != labels.size()) {
      throw CorpusError(dir.string() + ": seq.in has " + std::to_string(texts.size()) +
                        " lines but label has " + std::to_string(labels.size()));
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        out.utterances.push_back(make_utterance(trim(texts[i]), trim(labels[i]), task, split));
      } catch (const CorpusError& e) {
        fail_at(dir / "seq.in", i + 1, e.what());
      }
    }
  }
  if (out.utterances.empty()) throw CorpusError("no ATIS partitions under " + root.string());
  return out;
}

ParseOutcome parse_fb(const fs::path& source, const std::string& task) {
  std::vector<fs::path> files;
  if (fs::is_directory(source)) {
    for (const auto& f : sorted_entries(source)) {
      if (f.extension() == ".tsv") files.push_back(f);
    }
  } else {
    files.push_back(source);
  }
  if (files.empty()) throw CorpusError("no .tsv files under " + source.string());
  ParseOutcome out;
  for (const auto& file : files) {
    const Split split =
        file.stem().string().find("train") != std::string::npos ? Split::train : Split::validation;
    const auto lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      std::vector<std::string> cols;
      std::stringstream ss(lines[i]);
      std::string col;
      while (std::getline(ss, col, '\t')) cols.push_back(col);
      if (cols.size() < 3) fail_at(file, i + 1, "expected 3 tab-separated columns");
      try {
        auto root = top_root_intent(cols[2]);
        if (!root) {
          ++out.dropped_multi_root;
          continue;
        }
        out.utterances.push_back(make_utterance(trim(cols[0]), *root, task, split));
      } catch (const CorpusError& e) {
        fail_at(file, i + 1, e.what());
      }
    }
  }
  return out;
}

}  // namespace detail
}  // namespace protoda
