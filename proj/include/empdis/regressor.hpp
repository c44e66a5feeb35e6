#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "empdis/dataset.hpp"
#include "empdis/encoder.hpp"
#include "empdis/types.hpp"

namespace empdis {

enum class Loss { mse };

struct TrainConfig {
  double learning_rate = 2e-5;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 42;
  Loss loss = Loss::mse;
  double weight_decay = 0.0;
  std::optional<double> grad_clip;

  void validate() const;
  std::uint64_t fingerprint() const;
};

struct EpochStats {
  double train_loss = 0.0;
  double dev_pearson = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // 0-based index into epochs
  double best_dev_pearson = 0.0;
  std::uint64_t train_fingerprint = 0;
};

// A fitted encoder+head pair for one target. The head is a single affine
// map on the pooled embedding.
struct RegressorModel {
  EncoderSpec encoder_spec;
  Target target = Target::empathy;
  Eigen::VectorXd head_weights;
  double head_bias = 0.0;
  ScoreRange score_range{};
  std::uint64_t train_fingerprint = 0;

  // Bound backbone; carries fine-tuned weights when frozen was off.
  std::shared_ptr<Encoder> encoder;

  double raw_score(const Eigen::VectorXd& embedding) const {
    return head_weights.dot(embedding) + head_bias;
  }
};

struct PredictionVector {
  std::vector<double> values;
  std::string source_model;
  Target target = Target::empathy;
  std::uint64_t dataset_fingerprint = 0;
};

// Mini-batch gradient descent on MSE with per-epoch dev evaluation; the
// returned model is the checkpoint with the highest dev Pearson. Fully
// reproducible from the seed.
// Errors: DegenerateLabels (zero-variance train or dev gold),
// NonFiniteLoss (divergence, reports the offending epoch).
std::pair<RegressorModel, TrainReport> train_regressor(
    const std::vector<Example>& train_examples,
    const std::vector<Example>& dev_examples, const EncoderSpec& spec,
    const TrainConfig& config, Target target, ScoreRange score_range = {});

// Same, with a pre-built backbone instance. The encoder is owned (and when
// trainable, mutated) by the training run.
std::pair<RegressorModel, TrainReport> train_regressor(
    std::unique_ptr<Encoder> encoder, const std::vector<Example>& train_examples,
    const std::vector<Example>& dev_examples, const TrainConfig& config,
    Target target, ScoreRange score_range = {});

// values[i] = clamp(head(embed(texts[i])), score_range).
PredictionVector predict(const RegressorModel& model,
                         const std::vector<std::string>& texts,
                         std::uint64_t dataset_fingerprint);

// Artifact persistence: binary head weights plus a key-value meta.txt
// (encoder, config, fingerprints) and the per-epoch report. Fine-tuned
// backbone tables are written next to the head.
void save_model(const RegressorModel& model, const TrainReport& report,
                const TrainConfig& config, const std::filesystem::path& dir);
RegressorModel load_model(const std::filesystem::path& dir);

// Fingerprint recorded in a saved artifact, if any. Used for cache reuse.
std::optional<std::uint64_t> saved_model_fingerprint(
    const std::filesystem::path& dir);

// Covers the examples, the encoder spec and weights, the config, target
// and score range; equal fingerprints imply bitwise-identical predictions.
std::uint64_t compute_train_fingerprint(const std::vector<Example>& train,
                                        const std::vector<Example>& dev,
                                        const EncoderSpec& spec,
                                        const TrainConfig& config,
                                        Target target, ScoreRange range,
                                        std::uint64_t encoder_weights_fp);

}  // namespace empdis
