// protoda: prepare-data | train | evaluate | report | selfcheck

#include "protoda/corpus/utterance.hpp"
#include "protoda/numerics/checkpoint.hpp"
#include "protoda/selfcheck/selfcheck.hpp"
#include "protoda/train/experiment.hpp"
#include "protoda/train/model.hpp"
#include "protoda/train/run_config.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

enum Exit : int { ok = 0, failed = 1, config_error = 2, data_error = 3, numeric_abort = 4 };

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("-c,--config", args.path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("overrides", args.overrides, "dotted.key=value overrides");
}

protoda::RunConfig load(const ConfigArgs& args) { return protoda::load_run_config(args.path, args.overrides); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw protoda::DataError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot intent classification with prototypical networks and feature-space augmentation"};
  app.require_subcommand(1);

  ConfigArgs prep_args, train_args, eval_args;
  bool fresh = false;
  std::size_t stop_after = 0;
  std::vector<std::string> report_files;
  protoda::SelfcheckOptions sc;

  auto* prep = app.add_subcommand("prepare-data", "ingest raw corpora into unified JSON-lines files");
  add_config_args(prep, prep_args);
  auto* train = app.add_subcommand("train", "meta-train or pretrain per the config");
  add_config_args(train, train_args);
  train->add_flag("--fresh", fresh, "ignore any periodic checkpoint and start over");
  train->add_option("--stop-after", stop_after, "stop at this episode's periodic checkpoint (resume later)");
  auto* evaluate = app.add_subcommand("evaluate", "k-shot trials on the test intents");
  add_config_args(evaluate, eval_args);
  auto* report = app.add_subcommand("report", "print a table from report.jsonl files");
  report->add_option("files", report_files, "report.jsonl files")->required()->check(CLI::ExistingFile);
  auto* selfcheck = app.add_subcommand("selfcheck", "gradient, oracle and property checks");
  selfcheck->add_option("--seeds", sc.seeds, "random instances per gradient check");
  selfcheck->add_option("--instances", sc.instances, "random instances per oracle comparison");
  selfcheck->add_option("--seed", sc.seed, "base seed");
  selfcheck->add_option("--corrupt", sc.corrupt, "perturb the gradients of one check (harness test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*prep) {
      const auto cfg = load(prep_args);
      const auto summary = protoda::prepare_data(cfg);
      for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << summary.text();
    } else if (*train) {
      const auto cfg = load(train_args);
      protoda::validate_run(cfg);
      const auto out = protoda::train_run(cfg, !fresh, stop_after);
      std::printf("phase 1: %zu episodes, phase 2: %zu episodes\n", out.phase1_steps, out.phase2_steps);
      if (out.identity_check_error) std::printf("identity check error: %.3e\n", *out.identity_check_error);
      for (const auto& p : out.checkpoints) std::printf("checkpoint: %s\n", p.string().c_str());
      std::printf("loss log: %s\n", out.loss_log.string().c_str());
      if (!out.completed) std::printf("stopped early; rerun to resume\n");
    } else if (*evaluate) {
      const auto cfg = load(eval_args);
      protoda::validate_run(cfg);
      std::cout << protoda::format_report(protoda::evaluate_run(cfg));
    } else if (*report) {
      std::vector<protoda::EvalReport> all;
      for (const auto& f : report_files) {
        auto r = protoda::from_jsonl(read_file(f));
        all.insert(all.end(), r.begin(), r.end());
      }
      std::cout << protoda::format_report(all);
    } else if (*selfcheck) {
      if (!sc.corrupt.empty()) {
        const auto names = protoda::selfcheck_names();
        if (std::find(names.begin(), names.end(), sc.corrupt) == names.end()) {
          std::cerr << "error: no check named " << sc.corrupt << '\n';
          return config_error;
        }
      }
      const auto rep = protoda::run_selfcheck(sc);
      std::cout << rep.text();
      if (!rep.passed()) {
        for (const auto& n : rep.failures()) std::cerr << "FAILED: " << n << '\n';
        return failed;
      }
    }
  } catch (const protoda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const protoda::RegimeViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const protoda::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const protoda::CorpusError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const protoda::CheckpointError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const protoda::NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return numeric_abort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failed;
  }
  return ok;
}
