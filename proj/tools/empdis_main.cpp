#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "empdis/pipeline.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string run_dir_override;
  long long seed_override = -1;
};

empdis::RunConfig load_with_overrides(const CommonOptions& options) {
  empdis::RunConfig config = empdis::load_config(options.config_path);
  if (!options.run_dir_override.empty()) {
    config.run_dir = options.run_dir_override;
  }
  if (options.seed_override >= 0) {
    config.seed = static_cast<std::uint64_t>(options.seed_override);
    config.train.seed = config.seed;
  }
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "run config JSON file")
      ->required();
  cmd->add_option("--run-dir", options.run_dir_override,
                  "override the config's run directory");
  cmd->add_option("--seed", options.seed_override, "override the run seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "empdis: essay-level empathy/distress regression with ensembling"};
  app.require_subcommand(1);

  CommonOptions options;

  CLI::App* train = app.add_subcommand(
      "train", "train one regressor per (encoder x target)");
  add_common(train, options);

  CLI::App* predict =
      app.add_subcommand("predict", "write prediction caches for a split");
  add_common(predict, options);
  std::string split_name = "test";
  predict->add_option("--split", split_name, "train, dev or test")
      ->check(CLI::IsMember({"train", "dev", "test"}));

  CLI::App* ensemble = app.add_subcommand(
      "ensemble", "fit combiners on dev and apply them to test");
  add_common(ensemble, options);

  CLI::App* score =
      app.add_subcommand("score", "score prediction files against gold");
  std::string pred_emp, pred_dis, gold, run_id = "score", score_config, log_path;
  score->add_option("--pred-emp", pred_emp, "empathy predictions file")->required();
  score->add_option("--pred-dis", pred_dis, "distress predictions file")->required();
  score->add_option("--gold", gold, "gold TSV file")->required();
  score->add_option("--config", score_config,
                    "optional config (schema and results log location)");
  score->add_option("--run-id", run_id, "label for the results log entry");

  CLI::App* submit = app.add_subcommand(
      "submit", "write the two-column submission file from a combiner");
  add_common(submit, options);
  std::string combiner = "mean", out_path;
  bool distress_first = false;
  submit->add_option("--combiner", combiner, "combiner whose test output to use");
  submit->add_option("--out", out_path, "output path (default run_dir/submission.tsv)");
  submit->add_flag("--distress-first", distress_first,
                   "swap the column order (default is empathy first)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto config = load_with_overrides(options);
      const auto outcomes = empdis::run_train(config);
      for (const auto& outcome : outcomes) {
        std::printf("%-12s %-48s dev_pearson=%.4f%s\n",
                    empdis::to_string(outcome.target),
                    outcome.model_name.c_str(), outcome.best_dev_pearson,
                    outcome.cached ? "  (cached)" : "");
      }
    } else if (predict->parsed()) {
      const auto config = load_with_overrides(options);
      const auto paths =
          empdis::run_predict(config, empdis::split_from_string(split_name));
      for (const auto& path : paths) std::printf("%s\n", path.c_str());
    } else if (ensemble->parsed()) {
      const auto config = load_with_overrides(options);
      const auto outcomes = empdis::run_ensemble(config);
      for (const auto& [name, outcome] : outcomes) {
        if (outcome.dev_report) {
          std::printf("%s\n", empdis::format_report(*outcome.dev_report).c_str());
        }
        if (outcome.test_report) {
          std::printf("%s\n", empdis::format_report(*outcome.test_report).c_str());
        }
      }
    } else if (score->parsed()) {
      empdis::SchemaConfig schema;
      std::filesystem::path results_log;
      if (!score_config.empty()) {
        const auto config = empdis::load_config(score_config);
        schema = config.schema;
        results_log = config.results_log();
      }
      empdis::run_score(pred_emp, pred_dis, gold, schema, results_log, run_id);
    } else if (submit->parsed()) {
      const auto config = load_with_overrides(options);
      const auto path =
          empdis::run_submit(config, combiner, out_path, distress_first);
      std::printf("%s\n", path.c_str());
    }
  } catch (const empdis::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return empdis::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
