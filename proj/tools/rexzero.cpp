// rexzero -- dataset preparation, training, evaluation, and reporting for
// relation tuple extraction with zero-cardinal sentences.

#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "rexzero/harness.hpp"

namespace {

using namespace rexzero;

int run(int argc, char** argv) {
  CLI::App app{"relation extraction with zero-cardinality toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  bool allow_setting_mismatch = false;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON")->required();
  };

  CLI::App* prepare = app.add_subcommand("prepare", "materialize NZ/WZ datasets and stats");
  add_config(prepare);
  CLI::App* synth = app.add_subcommand("synth", "emit the synthetic corpus in release shape");
  add_config(synth);
  CLI::App* validate = app.add_subcommand("validate-stats", "compare prepared data to expected counts");
  add_config(validate);
  CLI::App* train_clf = app.add_subcommand("train-classifier", "train the zero-cardinality classifier");
  add_config(train_clf);
  CLI::App* train_ex = app.add_subcommand("train-extractor", "train a joint extractor");
  add_config(train_ex);
  CLI::App* evaluate = app.add_subcommand("evaluate", "run a pipeline and score it");
  add_config(evaluate);
  evaluate->add_flag("--allow-setting-mismatch", allow_setting_mismatch,
                     "evaluate a checkpoint under a different declared training setting");
  CLI::App* report = app.add_subcommand("report", "render report tables for a run directory");
  report->add_option("--run", run_dir, "run output directory");
  report->add_option("--config", config_path, "experiment config JSON (alternative to --run)");

  app.parse(argc, argv);

  if (prepare->parsed()) {
    auto cfg = ExperimentConfig::load(config_path);
    auto result = cmd_prepare(cfg);
    std::cout << "prepared data under " << data_dir(cfg).string() << "\n";
    long failed = 0;
    for (const auto& row : result.stats)
      if (!row.pass) ++failed;
    if (!result.stats.empty())
      std::cout << "statistics rows: " << result.stats.size() << " (" << failed << " mismatched)\n";
  } else if (synth->parsed()) {
    auto cfg = ExperimentConfig::load(config_path);
    std::cout << "synthetic corpus written to " << cmd_synth(cfg).string() << "\n";
  } else if (validate->parsed()) {
    auto cfg = ExperimentConfig::load(config_path);
    auto rows = cmd_validate_stats(cfg);
    std::cout << stat_rows_to_csv(rows);
  } else if (train_clf->parsed()) {
    auto cfg = ExperimentConfig::load(config_path);
    auto dir = cmd_train_classifier(cfg);
    std::cout << "classifier checkpoint: " << dir.string() << "\n";
  } else if (train_ex->parsed()) {
    auto cfg = ExperimentConfig::load(config_path);
    auto dir = cmd_train_extractor(cfg);
    std::cout << "extractor checkpoint: " << dir.string() << "\n";
  } else if (evaluate->parsed()) {
    auto cfg = ExperimentConfig::load(config_path);
    for (const auto& row : cmd_evaluate(cfg, allow_setting_mismatch))
      std::cout << "evaluation row: " << row.string() << "\n";
  } else if (report->parsed()) {
    std::filesystem::path dir;
    if (!run_dir.empty()) {
      dir = run_dir;
    } else if (!config_path.empty()) {
      dir = ExperimentConfig::load(config_path).out();
    } else {
      throw ConfigError("report: pass --run or --config");
    }
    auto tables = cmd_report(dir);
    std::cout << tables.end_to_end_txt;
    if (!tables.classifier_txt.empty()) std::cout << "\n" << tables.classifier_txt;
    if (!tables.two_step_txt.empty()) std::cout << "\n" << tables.two_step_txt;
    std::cout << "tables written under " << (dir / "report").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError& e) {
    return CLI::App{}.exit(e);
  } catch (const rexzero::Error& e) {
    nlohmann::ordered_json err;
    err["error"] = "rexzero";
    err["message"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    nlohmann::ordered_json err;
    err["error"] = "internal";
    err["message"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 2;
  }
}
