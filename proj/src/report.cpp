#include "protoda/eval/report.hpp"

#include "protoda/eval/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace protoda {

namespace {

void validate(const EvalReport& r) {
  if (r.method.empty()) throw std::invalid_argument("report: empty method name");
  if (r.k == 0) throw std::invalid_argument("report '" + r.method + "': k must be positive");
  if (!(r.mean >= 0.0 && r.mean <= 100.0)) throw std::invalid_argument("report '" + r.method + "': mean outside [0, 100]");
  if (!(r.ci >= 0.0)) throw std::invalid_argument("report '" + r.method + "': negative confidence interval");
}

}  // namespace

EvalReport summarize(EvalReport report) {
  const auto& s = report.trial_scores;
  if (s.empty()) throw std::invalid_argument("summarize: no trial scores");
  report.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  // keep the mean inside [min, max] despite rounding
  report.mean = std::clamp(report.mean, *std::min_element(s.begin(), s.end()), *std::max_element(s.begin(), s.end()));
  report.ci = s.size() >= 2 ? confidence_interval(s) : 0.0;
  return report;
}

std::string format_cell(double mean, double ci) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean, ci);
  return buf;
}

std::string row_label(const EvalReport& r) {
  if (r.augmentation.empty() || r.augmentation == "none") return r.method;
  return r.method + "+" + r.augmentation + (r.space.empty() ? "" : " (" + r.space + ")");
}

std::string format_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("format_report: no reports");
  std::vector<std::string> rows;
  std::vector<std::size_t> ks;
  std::map<std::pair<std::string, std::size_t>, std::string> cells;
  for (const auto& r : reports) {
    validate(r);
    const std::string label = row_label(r);
    if (std::find(rows.begin(), rows.end(), label) == rows.end()) rows.push_back(label);
    if (std::find(ks.begin(), ks.end(), r.k) == ks.end()) ks.push_back(r.k);
    cells[{label, r.k}] = format_cell(r.mean, r.ci);
  }
  std::sort(ks.begin(), ks.end());

  // display width: "±" is two bytes in UTF-8 but one column
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, width(s)), ' '); };

  std::size_t label_w = width("method");
  for (const auto& r : rows) label_w = std::max(label_w, width(r));
  std::vector<std::string> headers;
  std::vector<std::size_t> col_w;
  for (std::size_t k : ks) {
    headers.push_back(std::to_string(k) + "-shot");
    std::size_t w = width(headers.back());
    for (const auto& r : rows) {
      auto it = cells.find({r, k});
      if (it != cells.end()) w = std::max(w, width(it->second));
    }
    col_w.push_back(w);
  }

  std::ostringstream os;
  os << pad("method", label_w);
  for (std::size_t j = 0; j < ks.size(); ++j) os << "  " << pad(headers[j], col_w[j]);
  os << "\n" << std::string(label_w, '-');
  for (std::size_t j = 0; j < ks.size(); ++j) os << "  " << std::string(col_w[j], '-');
  os << "\n";
  for (const auto& r : rows) {
    os << pad(r, label_w);
    for (std::size_t j = 0; j < ks.size(); ++j) {
      auto it = cells.find({r, ks[j]});
      os << "  " << pad(it == cells.end() ? "-" : it->second, col_w[j]);
    }
    os << "\n";
  }
  return os.str();
}

std::string to_json_line(const EvalReport& r) {
  validate(r);
  nlohmann::json j;
  j["method"] = r.method;
  j["augmentation"] = r.augmentation;
  j["space"] = r.space;
  j["k"] = r.k;
  j["mean"] = r.mean;
  j["ci"] = r.ci;
  j["trial_scores"] = r.trial_scores;
  j["seed"] = r.seed;
  j["config_digest"] = r.config_digest;
  j["config"] = r.config;
  return j.dump();
}

EvalReport from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  EvalReport r;
  r.method = j.at("method").get<std::string>();
  r.augmentation = j.at("augmentation").get<std::string>();
  r.space = j.at("space").get<std::string>();
  r.k = j.at("k").get<std::size_t>();
  r.mean = j.at("mean").get<double>();
  r.ci = j.at("ci").get<double>();
  r.trial_scores = j.at("trial_scores").get<std::vector<double>>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.config = j.at("config").get<std::string>();
  validate(r);
  return r;
}

std::string to_jsonl(const std::vector<EvalReport>& reports) {
  std::string out;
  for (const auto& r : reports) out += to_json_line(r) + "\n";
  return out;
}

std::vector<EvalReport> from_jsonl(const std::string& text) {
  std::vector<EvalReport> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) out.push_back(from_json_line(line));
  }
  return out;
}

}  // namespace protoda
