#include <cmath>
#include <limits>

#include "combiner_detail.hpp"
#include "empdis/error.hpp"

namespace empdis::detail {

namespace {

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, double gamma) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (a.row(i) - a.row(j)).squaredNorm();
      k(i, j) = k(j, i) = std::exp(-gamma * d2);
    }
  }
  return k;
}

}  // namespace

// Dual variables u = [alpha; alpha*] with signs s = [+1...; -1...],
// objective 0.5 u'Qu + p'u, Q_kl = s_k s_l K(d_k, d_l),
// p_k = eps - s_k y_{d_k}, constraint s'u = 0, box [0, C].
SvrState fit_svr(const Eigen::MatrixXd& features, const std::vector<double>& y,
                 const CombinerKind& kind) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();

  SvrState state;

  // Standardize columns with fit-time statistics (population std; constant
  // columns keep scale 1 so they map to zero).
  state.column_mean.resize(p);
  state.column_scale.resize(p);
  for (Eigen::Index c = 0; c < p; ++c) {
    state.column_mean[c] = features.col(c).mean();
    const double var =
        (features.col(c).array() - state.column_mean[c]).square().mean();
    const double sd = std::sqrt(var);
    state.column_scale[c] = sd > 0.0 ? sd : 1.0;
  }
  state.support.resize(n, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    state.support.col(c) =
        (features.col(c).array() - state.column_mean[c]) / state.column_scale[c];
  }

  const double cost = kind.hyper_or("c", 1.0);
  const double epsilon = kind.hyper_or("epsilon", 0.1);
  state.gamma = kind.hyper_or("gamma", 1.0 / static_cast<double>(p));
  const double tol = kind.hyper_or("tol", 1e-6);
  const long max_iter = static_cast<long>(kind.hyper_or("max_iter", 200000.0));

  const Eigen::MatrixXd kernel = rbf_kernel(state.support, state.gamma);

  const Eigen::Index m = 2 * n;
  const auto data_index = [n](Eigen::Index k) { return k < n ? k : k - n; };
  const auto sign = [n](Eigen::Index k) { return k < n ? 1.0 : -1.0; };

  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd grad(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    grad[k] = epsilon - sign(k) * y[static_cast<std::size_t>(data_index(k))];
  }

  double final_m = 0.0, final_big_m = 0.0;
  for (long iter = 0; iter < max_iter; ++iter) {
    // maximal violating pair over -s_k G_k
    Eigen::Index up = -1, low = -1;
    double up_val = -std::numeric_limits<double>::infinity();
    double low_val = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k) {
      const double s = sign(k);
      const double v = -s * grad[k];
      const bool in_up = (s > 0 && u[k] < cost) || (s < 0 && u[k] > 0);
      const bool in_low = (s > 0 && u[k] > 0) || (s < 0 && u[k] < cost);
      if (in_up && v > up_val) {
        up_val = v;
        up = k;
      }
      if (in_low && v < low_val) {
        low_val = v;
        low = k;
      }
    }
    final_m = up_val;
    final_big_m = low_val;
    if (up < 0 || low < 0 || up_val - low_val < tol) break;

    const Eigen::Index di = data_index(up), dj = data_index(low);
    const double si = sign(up), sj = sign(low);

    const double curvature = kernel(di, di) + kernel(dj, dj) - 2.0 * kernel(di, dj);
    const double slope = si * grad[up] - sj * grad[low];  // negative here

    double step = curvature > 1e-12 ? -slope / curvature
                                    : std::numeric_limits<double>::infinity();
    const double room_i = si > 0 ? cost - u[up] : u[up];
    const double room_j = sj > 0 ? u[low] : cost - u[low];
    step = std::min(step, std::min(room_i, room_j));
    if (!(step > 0.0)) break;

    u[up] += si * step;
    u[low] -= sj * step;
    for (Eigen::Index k = 0; k < m; ++k) {
      grad[k] += sign(k) * step * (kernel(data_index(k), di) - kernel(data_index(k), dj));
    }
  }

  state.beta.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) state.beta[i] = u[i] - u[n + i];
  state.bias = (final_m + final_big_m) / 2.0;
  return state;
}

double svr_predict(const SvrState& state, const Eigen::VectorXd& row) {
  Eigen::VectorXd z(row.size());
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    z[c] = (row[c] - state.column_mean[c]) / state.column_scale[c];
  }
  double value = state.bias;
  for (Eigen::Index i = 0; i < state.support.rows(); ++i) {
    if (state.beta[i] == 0.0) continue;
    const double d2 = (state.support.row(i).transpose() - z).squaredNorm();
    value += state.beta[i] * std::exp(-state.gamma * d2);
  }
  return value;
}

}  // namespace empdis::detail
