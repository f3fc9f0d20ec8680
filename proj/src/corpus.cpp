#include "protoda/corpus/ingest.hpp"

#include "source_parsers.hpp"

#include "json.hpp"

#include <cctype>
#include <fstream>

namespace protoda {

std::string_view to_string(Split split) {
  return split == Split::train ? "train" : "validation";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  throw CorpusError("split must be \"train\" or \"validation\", got \"" + std::string(text) + "\"");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return tokens;
}

Utterance make_utterance(std::string text, std::string intent, std::string task_id, Split split) {
  Utterance u;
  u.tokens = tokenize(text);
  if (u.tokens.empty()) throw CorpusError("utterance has no tokens");
  if (intent.empty()) throw CorpusError("utterance has an empty intent");
  u.text = std::move(text);
  u.intent = std::move(intent);
  u.task_id = std::move(task_id);
  u.split = split;
  return u;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    bool ok = true;
    for (int j = 1; j < len; ++j) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(j)]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

SourceFormat parse_source_format(std::string_view tag) {
  if (tag == "unified") return SourceFormat::unified;
  if (tag == "snips") return SourceFormat::snips;
  if (tag == "atis") return SourceFormat::atis;
  if (tag == "fb") return SourceFormat::fb;
  throw CorpusError("unknown source format \"" + std::string(tag) +
                    "\" (expected unified, snips, atis or fb)");
}

std::string_view to_string(SourceFormat format) {
  switch (format) {
    case SourceFormat::unified: return "unified";
    case SourceFormat::snips: return "snips";
    case SourceFormat::atis: return "atis";
    case SourceFormat::fb: return "fb";
  }
  return "unknown";
}

IngestResult ingest(const std::vector<std::filesystem::path>& sources, SourceFormat format,
                    const IngestOptions& options) {
  const std::string task = options.task_id.value_or(std::string(to_string(format)));
  std::size_t min_utterances = 0;
  if (format == SourceFormat::fb || format == SourceFormat::atis) {
    min_utterances = kMinUtterancesPerIntent;
  }
  if (options.min_utterances) min_utterances = *options.min_utterances;

  IngestResult result;
  TaskRegistry raw;
  for (const auto& src : sources) {
    if (!std::filesystem::exists(src)) throw CorpusError("source not found: " + src.string());
    detail::ParseOutcome parsed;
    switch (format) {
      case SourceFormat::unified: parsed = detail::parse_unified(src); break;
      case SourceFormat::snips: parsed = detail::parse_snips(src, task); break;
      case SourceFormat::atis: parsed = detail::parse_atis(src, task); break;
      case SourceFormat::fb: parsed = detail::parse_fb(src, task); break;
    }
    result.dropped_multi_root += parsed.dropped_multi_root;
    for (auto& u : parsed.utterances) {
      const std::string t = u.task_id;
      const std::string i = u.intent;
      const Split s = u.split;
      raw.add(t, i, s, std::move(u));
    }
  }

  std::vector<std::string> dropped;
  result.registry = raw.filtered(min_utterances, 2, &dropped);
  for (const auto& id : dropped) {
    result.warnings.push_back("task '" + id + "' has fewer than two intents with at least " +
                              std::to_string(min_utterances) + " utterances; dropped");
  }
  if (result.dropped_multi_root > 0) {
    result.warnings.push_back("dropped " + std::to_string(result.dropped_multi_root) +
                              " utterances with multiple root intents");
  }
  return result;
}

std::vector<std::filesystem::path> write_unified(const TaskRegistry& registry,
                                                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [task, intents] : registry.tasks()) {
    const auto path = dir / (task + ".jsonl");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CorpusError("cannot write " + path.string());
    for (const auto& [intent, pool] : intents) {
      for (Split split : {Split::train, Split::validation}) {
        for (const auto& u : pool.split(split)) {
          nlohmann::json j{{"text", u.text},
                           {"intent", u.intent},
                           {"task", u.task_id},
                           {"split", std::string(to_string(u.split))}};
          os << j.dump() << '\n';
        }
      }
    }
    written.push_back(path);
  }
  return written;
}

std::pair<TaskRegistry, TaskRegistry> split_snips(const TaskRegistry& registry,
                                                  const std::string& task_id) {
  if (!registry.contains(task_id)) throw CorpusError("split_snips: no task '" + task_id + "'");
  const auto& intents = registry.task(task_id);
  std::string missing;
  for (const auto* group : {&snips_train_intents(), &snips_test_intents()}) {
    for (const auto& name : *group) {
      if (!intents.count(name)) missing += (missing.empty() ? "" : ", ") + name;
    }
  }
  if (!missing.empty()) throw CorpusError("split_snips: missing intents: " + missing);

  auto in = [](const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  auto train = registry.select([&](const std::string& t, const std::string& i) {
    return t == task_id && in(snips_train_intents(), i);
  });
  auto test = registry.select([&](const std::string& t, const std::string& i) {
    return t == task_id && in(snips_test_intents(), i);
  });
  return {std::move(train), std::move(test)};
}

}  // namespace protoda
