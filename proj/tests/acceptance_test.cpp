// Acceptance criteria, one PASS/FAIL line each. Exit status is nonzero if any
// criterion fails.

#include "protoda/eval/metrics.hpp"
#include "protoda/eval/synthetic.hpp"
#include "protoda/eval/trial.hpp"
#include "protoda/selfcheck/selfcheck.hpp"
#include "protoda/train/experiment.hpp"
#include "test_util.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace fs = std::filesystem;
using namespace protoda;
using protoda::testing::TempDir;

namespace {

int failures = 0;

void verdict(int id, const std::string& status, const std::string& what, const std::string& detail) {
  std::printf("%s  criterion %d: %s | %s\n", status.c_str(), id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (status == "FAIL") ++failures;
}

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  verdict(id, std::string(ok ? "PASS" : "FAIL"), what, detail);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Synthetic RunConfig: one task, `classes` Gaussian clusters in 16-d.
RunConfig synthetic_run(const fs::path& out, double separation, const std::string& augment,
                        std::size_t phase1, std::size_t phase2, std::size_t classes = 5) {
  const std::string doc = R"({
    "data": {"synthetic": {"classes": )" + std::to_string(classes) + R"(, "dim": 16, "separation": )" +
                          fmt("%.17g", separation) + R"(, "within_std": 1.0, "train_per_class": 50,
                           "validation_per_class": 50, "seed": 1}},
    "test": {"task": "synthetic_0", "intents": []},
    "augment": )" + augment + R"(,
    "schedule": {"phase1_episodes": )" + std::to_string(phase1) + R"(, "phase2_episodes": )" +
                          std::to_string(phase2) + R"(, "k": 5, "q": 10, "log_every": 100, "checkpoint_every": 1000},
    "eval": {"trials": 20, "k": [5]},
    "output_dir": ")" + out.string() + R"("
  })";
  return parse_run_config(doc);
}

EvalReport train_and_evaluate(const RunConfig& cfg) {
  train_run(cfg, false);
  return evaluate_run(cfg).at(0);
}

void selfcheck_criteria() {
  const auto t0 = std::chrono::steady_clock::now();
  SelfcheckOptions opt;  // 20 seeds per gradient check, 1000 oracle instances
  const auto rep = run_selfcheck(opt);
  const double secs = seconds_since(t0);

  auto group = [&](const std::string& g, double budget, int id, const std::string& what) {
    std::size_t n = 0, bad = 0;
    double worst_ratio = 0;
    std::string failed;
    for (const auto& it : rep.items) {
      if (it.group != g) continue;
      ++n;
      if (!it.passed) {
        ++bad;
        failed += " " + it.name;
      }
      if (it.tolerance > 0) worst_ratio = std::max(worst_ratio, it.error / it.tolerance);
    }
    std::string detail = std::to_string(n) + " checks, " + std::to_string(bad) + " failed" +
                         fmt(", worst error/tolerance %.2e, whole battery %.1f s (budget %.0f s)", worst_ratio, secs, budget);
    if (!failed.empty()) detail += ", failing:" + failed;
    verdict(id, bad == 0 && n > 0 && secs < budget, what, detail);
  };
  group("gradient", 120, 1,
        "finite-difference gradient checks, rel tol 1e-4, " + std::to_string(opt.seeds) + " seeds per op");
  group("oracle", 60, 2, "oracle equivalence on " + std::to_string(opt.instances) + " random instances");
  group("property", 60, 3, "identity, degeneracy, posterior, noise and |S_aug| properties");
}

void synthetic_end_to_end(const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig sep = synthetic_run(root / "sep10", 10.0, R"({"method": "none"})", 2000, 0);
  const EvalReport r = train_and_evaluate(sep);
  const double min_trial = *std::min_element(r.trial_scores.begin(), r.trial_scores.end());

  // nearest class mean on raw features, all train samples as supports
  const auto reg = generate_synthetic_tasks(*sep.data.synthetic);
  const auto task = make_test_task(reg, "synthetic_0", {});
  std::size_t ok = 0, n = 0;
  std::vector<Eigen::RowVectorXd> means;
  for (const auto& g : task.train) {
    Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(16);
    for (const auto& s : g) m += s.vector;
    means.push_back(m / static_cast<double>(g.size()));
  }
  for (std::size_t c = 0; c < task.validation.size(); ++c) {
    for (const auto& s : task.validation[c]) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < means.size(); ++j)
        if ((s.vector - means[j]).squaredNorm() < (s.vector - means[best]).squaredNorm()) best = j;
      ok += best == c;
      ++n;
    }
  }
  const double ncm = 100.0 * static_cast<double>(ok) / static_cast<double>(n);

  // separation 0: every trial inside the two-sided 99.9% binomial band of chance
  const RunConfig zero = synthetic_run(root / "sep0", 0.0, R"({"method": "none"})", 2000, 0);
  const EvalReport z = train_and_evaluate(zero);
  const double nval = 250.0;
  boost::math::binomial chance(nval, 0.2);
  const double lo = 100.0 * boost::math::quantile(chance, 0.0005) / nval;
  const double hi = 100.0 * boost::math::quantile(boost::math::complement(chance, 0.0005)) / nval;
  bool in_band = true;
  for (double s : z.trial_scores) in_band = in_band && s >= lo && s <= hi;
  const double secs = seconds_since(t0);

  verdict(4, r.mean >= 95.0 && ncm >= 99.0 && in_band && secs < 300,
          "5-way 5-shot synthetic ProtoNet after 2000 episodes",
          fmt("separation 10: mean %.2f%% (min trial %.2f%%), nearest-class-mean oracle %.2f%%; ", r.mean, min_trial, ncm) +
              fmt("separation 0: mean %.2f%%, trials within chance band [%.1f, %.1f]%%: ", z.mean, lo, hi) +
              (in_band ? "yes" : "no") + fmt("; %.1f s", secs));
}

void augmentation_benefit(const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  const EvalReport none =
      train_and_evaluate(synthetic_run(root / "none", 2.0, R"({"method": "none"})", 2000, 0));
  const EvalReport hall = train_and_evaluate(
      synthetic_run(root / "hall", 2.0, R"({"method": "hallucinate", "space": "proto"})", 2000, 2000));
  const double secs = seconds_since(t0);
  const bool regression = hall.mean < none.mean - 1.0;
  verdict(5, hall.mean >= none.mean && secs < 1800,
          "hallucination (proto space) >= no augmentation, separation 2, k = 5, 20 trials",
          fmt("hallucinate %.2f ± %.2f, none %.2f ± %.2f", hall.mean, hall.ci, none.mean, none.ci) +
              (regression ? "; REGRESSION: hallucination trails by more than 1 point" : "; no regression") +
              fmt("; %.1f s", secs));
}

void public_corpora(const fs::path& root) {
  const fs::path raw = fs::path(PROTODA_DATA_DIR) / "raw";
  const bool have = fs::exists(raw / "fb") && fs::exists(raw / "atis") && fs::exists(raw / "snips");
  if (!have || !std::getenv("PROTODA_ACCEPTANCE_PUBLIC")) {
    verdict(6, std::string("SKIP"), "public-corpus reproduction (optional, hours)",
            have ? "set PROTODA_ACCEPTANCE_PUBLIC=1 to run" : "data/raw/{fb,atis,snips} not present");
    return;
  }
  const std::string base = R"({"data": {"raw": {"fb": ")" + (raw / "fb").string() + R"(", "atis": ")" +
                           (raw / "atis").string() + R"(", "snips": ")" + (raw / "snips").string() +
                           R"("}, "corpus_dir": ")" + (root / "unified").string() + R"("}, "eval": {"k": [10]}})";
  prepare_data(parse_run_config(base));
  auto run = [&](const std::string& set, const std::string& dir) {
    std::vector<std::string> ov{"task_set=" + set, "output_dir=" + (root / dir).string()};
    if (set == "single") ov.push_back(R"(data.corpora=["snips"])");
    const RunConfig cfg = parse_run_config(base, ov);
    train_run(cfg, true);
    return evaluate_run(cfg).at(0);
  };
  const EvalReport single = run("single", "snips_single");
  const EvalReport multi = run("multi", "multi");
  const bool ok = std::abs(single.mean - 82.48) <= 5.0 && std::abs(multi.mean - 86.40) <= 5.0 &&
                  multi.mean >= single.mean;
  verdict(6, ok, "SNIPS seen 10-shot: single 82.48, multi 86.40 (±5.0), multi >= single",
          fmt("single %.2f ± %.2f, multi %.2f ± %.2f", single.mean, single.ci, multi.mean, multi.ci));
}

void determinism(const fs::path& root) {
  const RunConfig cfg =
      synthetic_run(root / "det", 2.0, R"({"method": "hallucinate", "space": "proto"})", 300, 200);
  const EvalReport a = train_and_evaluate(cfg);
  const std::string log_a = slurp(loss_log_path(cfg.output_dir));
  const EvalReport b = train_and_evaluate(cfg);
  const std::string log_b = slurp(loss_log_path(cfg.output_dir));
  verdict(7, !log_a.empty() && log_a == log_b && a == b, "two runs of one RunConfig + seed",
          std::string("loss logs ") + (log_a == log_b ? "bit-identical" : "DIFFER") + " (" +
              std::to_string(log_a.size()) + " bytes), EvalReports " + (a == b ? "identical" : "DIFFER"));
}

}  // namespace

int main() {
  TempDir root;
  const std::vector<std::function<void()>> criteria{
      [] { selfcheck_criteria(); },
      [&] { synthetic_end_to_end(root.path()); },
      [&] { augmentation_benefit(root.path()); },
      [&] { public_corpora(root.path()); },
      [&] { determinism(root.path()); },
  };
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      std::printf("FAIL  criterion raised: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
