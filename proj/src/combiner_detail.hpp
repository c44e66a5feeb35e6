#pragma once

#include <Eigen/Dense>
#include <vector>

#include "empdis/ensemble.hpp"

namespace empdis::detail {

// Epsilon-insensitive SVR with an RBF kernel, solved by SMO with
// maximal-violating-pair selection. Deterministic: no randomness, ties
// break on the lowest index.
SvrState fit_svr(const Eigen::MatrixXd& features, const std::vector<double>& y,
                 const CombinerKind& kind);

double svr_predict(const SvrState& state, const Eigen::VectorXd& row);

// Squared-error gradient boosting over exact greedy depth-limited trees.
GbtState fit_gbt(const Eigen::MatrixXd& features, const std::vector<double>& y,
                 const CombinerKind& kind);

double gbt_predict(const GbtState& state, const Eigen::VectorXd& row);

}  // namespace empdis::detail
