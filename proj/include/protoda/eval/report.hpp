#ifndef PROTODA_EVAL_REPORT_HPP
#define PROTODA_EVAL_REPORT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace protoda {

/// Result of one configuration's trials. Scores are micro-F1 in percent.
struct EvalReport {
  std::string method;        // "protonet" | "conv_tl"
  std::string augmentation;  // "none" | "noise" | "hallucinate"
  std::string space;         // "sentence" | "proto" | "" when not augmented
  std::size_t k = 0;
  double mean = 0.0;
  double ci = 0.0;
  std::vector<double> trial_scores;
  std::uint64_t seed = 0;  // seed base; trial i used seed + i
  std::string config_digest;
  std::string config;  // resolved RunConfig, verbatim JSON

  bool operator==(const EvalReport&) const = default;
};

/// Fills mean and ci from trial_scores.
EvalReport summarize(EvalReport report);

/// "86.40 ± 1.91"
std::string format_cell(double mean, double ci);

/// Row label: method, plus "+augmentation (space)" when augmented.
std::string row_label(const EvalReport& r);

/// Aligned text table: one row per method/augmentation, one column per k.
std::string format_report(const std::vector<EvalReport>& reports);

std::string to_json_line(const EvalReport& r);
EvalReport from_json_line(const std::string& line);
std::string to_jsonl(const std::vector<EvalReport>& reports);
std::vector<EvalReport> from_jsonl(const std::string& text);

}  // namespace protoda

#endif  // PROTODA_EVAL_REPORT_HPP
