#ifndef PROTODA_SRC_SOURCE_PARSERS_HPP
#define PROTODA_SRC_SOURCE_PARSERS_HPP

#include "protoda/corpus/ingest.hpp"

#include <filesystem>
#include <vector>

namespace protoda::detail {

struct ParseOutcome {
  std::vector<Utterance> utterances;
  std::size_t dropped_multi_root = 0;
};

ParseOutcome parse_unified(const std::filesystem::path& file);
ParseOutcome parse_snips(const std::filesystem::path& root, const std::string& task);
ParseOutcome parse_atis(const std::filesystem::path& root, const std::string& task);
ParseOutcome parse_fb(const std::filesystem::path& source, const std::string& task);

}  // namespace protoda::detail

#endif  // PROTODA_SRC_SOURCE_PARSERS_HPP
