#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "empdis/dataset.hpp"
#include "empdis/encoder.hpp"
#include "empdis/ensemble.hpp"
#include "empdis/metrics.hpp"
#include "empdis/regressor.hpp"

namespace empdis {

// Declarative description of a full run: data, encoders, training, the
// combiner set and the run directory every artifact lands in.
struct RunConfig {
  std::filesystem::path train_path;
  std::filesystem::path dev_path;
  std::filesystem::path test_path;
  SchemaConfig schema;
  std::vector<EncoderSpec> encoders;
  TrainConfig train;
  std::vector<CombinerKind> combiners;  // mean is always ensured
  ScoreRange score_range{};
  std::uint64_t seed = 42;
  std::filesystem::path run_dir = "run";
  bool use_demographics = false;

  void validate() const;

  std::filesystem::path models_dir() const { return run_dir / "models"; }
  std::filesystem::path predictions_dir() const { return run_dir / "predictions"; }
  std::filesystem::path ensembles_dir() const { return run_dir / "ensembles"; }
  std::filesystem::path results_log() const { return run_dir / "results.log"; }

  std::filesystem::path model_dir(const EncoderSpec& spec, Target t) const;
  std::filesystem::path prediction_cache_path(const EncoderSpec& spec, Split s,
                                              Target t) const;
};

// Loads and fully validates a JSON run config. Unknown keys are rejected
// with field-level messages; relative data paths resolve against the
// config file's directory. Errors: ConfigInvalid.
RunConfig load_config(const std::filesystem::path& path);

struct TrainOutcome {
  std::string model_name;
  Target target = Target::empathy;
  std::filesystem::path artifact_dir;
  bool cached = false;  // fingerprint matched an existing artifact
  double best_dev_pearson = 0.0;
};

// Trains one model per (encoder x target); idempotent re-runs reuse
// artifacts whose stored fingerprint matches.
std::vector<TrainOutcome> run_train(const RunConfig& config);

// Writes one prediction cache file per (model, target) for the split,
// aligned to dataset order. Errors: MissingArtifact.
std::vector<std::filesystem::path> run_predict(const RunConfig& config,
                                               Split split);

struct EnsembleOutcome {
  std::filesystem::path empathy_path;
  std::filesystem::path distress_path;
  std::optional<EvalReport> dev_report;
  std::optional<EvalReport> test_report;  // present when test gold exists
};

// Fits every configured combiner on dev predictions vs dev gold, applies
// it to the test predictions, persists artifacts and reports.
std::map<std::string, EnsembleOutcome> run_ensemble(const RunConfig& config);

// Scores a pair of prediction files against a gold file. Files align by
// record_id when ids are present on both sides, by position otherwise.
// The report is printed and appended to the results log.
// Errors: AlignmentError, plus metric errors.
EvalReport run_score(const std::filesystem::path& pred_empathy_path,
                     const std::filesystem::path& pred_distress_path,
                     const std::filesystem::path& gold_path,
                     const SchemaConfig& schema,
                     const std::filesystem::path& results_log,
                     const std::string& run_id);

// Shared-task submission file: tab-separated, no header, empathy first,
// one row per test example in dataset order, 6 decimal places.
// Errors: LengthMismatch, FingerprintMismatch.
void write_submission(const PredictionVector& pred_empathy,
                      const PredictionVector& pred_distress,
                      const std::filesystem::path& path);

// Builds the submission from a combiner's test predictions. Empty out_path
// defaults to run_dir/submission.tsv. distress_first swaps the column
// order for scorers that expect it. Errors: MissingArtifact when the
// ensemble step has not produced the combiner's outputs.
std::filesystem::path run_submit(const RunConfig& config,
                                 const std::string& combiner_name,
                                 std::filesystem::path out_path = {},
                                 bool distress_first = false);

// Prediction cache files: record_id <TAB> prediction with a header row.
struct PredictionFile {
  std::vector<std::string> ids;
  std::vector<double> values;
};

void write_prediction_file(const std::filesystem::path& path,
                           const std::vector<std::string>& ids,
                           const PredictionVector& prediction);
PredictionFile read_prediction_file(const std::filesystem::path& path);

}  // namespace empdis
