#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "empdis/regressor.hpp"
#include "empdis/types.hpp"

namespace empdis {

struct PredictionMatrix {
  Eigen::MatrixXd values;  // n_examples x n_models
  std::vector<std::string> model_names;
  Target target = Target::empathy;
  std::uint64_t dataset_fingerprint = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t models() const { return model_names.size(); }
};

enum class CombinerKindId { mean, linear_regression, svr, gradient_boosted_trees };

const char* to_string(CombinerKindId id);
CombinerKindId combiner_kind_from_string(std::string_view s);

struct CombinerKind {
  CombinerKindId kind = CombinerKindId::mean;
  std::map<std::string, double> hyper;  // keys restricted per kind

  // Rejects hyperparameter names outside the kind's declared set.
  void validate() const;
  double hyper_or(const std::string& key, double fallback) const;
  std::uint64_t fingerprint() const;
};

// Fitted state per kind ----------------------------------------------------

struct MeanState {};

struct LinearState {
  Eigen::VectorXd weights;
  double intercept = 0.0;
};

struct SvrState {
  Eigen::MatrixXd support;      // standardized fit rows
  Eigen::VectorXd beta;         // alpha - alpha*
  double bias = 0.0;
  Eigen::VectorXd column_mean;  // fit-time standardization
  Eigen::VectorXd column_scale;
  double gamma = 0.0;
};

struct GbtNode {
  int feature = -1;     // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct GbtTree {
  std::vector<GbtNode> nodes;
  double predict(const Eigen::VectorXd& row) const;
};

struct GbtState {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<GbtTree> trees;
};

class FittedCombiner {
 public:
  CombinerKind kind;
  std::vector<std::string> model_names;  // column contract from fit time
  ScoreRange score_range{};
  std::uint64_t fit_fingerprint = 0;
  std::variant<MeanState, LinearState, SvrState, GbtState> state;

  // Unclamped score for one prediction-matrix row.
  double apply_row(const Eigen::VectorXd& row) const;
};

// Stacks per-model prediction vectors into a matrix; column j comes from
// predictions[j]. Errors: ShapeMismatch, TargetMismatch,
// FingerprintMismatch.
PredictionMatrix assemble_matrix(const std::vector<PredictionVector>& predictions);

// Fits one combiner on dev predictions against dev gold. mean is a no-op
// fit; linear_regression is least squares with intercept (rank-deficient
// inputs resolve to the minimum-norm solution and are logged, not errors);
// svr is epsilon-insensitive SVR with an RBF kernel on standardized
// columns; gradient_boosted_trees is squared-error boosting. Deterministic
// given (data, hyper, seed). Errors: DegenerateGold for trainable kinds on
// zero-variance gold, ShapeMismatch.
FittedCombiner fit_combiner(const CombinerKind& kind,
                            const PredictionMatrix& dev_matrix,
                            const std::vector<double>& dev_gold,
                            std::uint64_t seed, ScoreRange score_range = {});

// Applies a fitted combiner; output clamped to the score range, one value
// per row. Errors: ColumnMismatch when model names or order differ from
// fit time.
PredictionVector combine(const FittedCombiner& fitted,
                         const PredictionMatrix& test_matrix);

// Artifact persistence: binary state blob plus human-readable meta.txt.
void save_combiner(const FittedCombiner& fitted, const std::filesystem::path& dir);
FittedCombiner load_combiner(const std::filesystem::path& dir);

}  // namespace empdis
