#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "empdis/ensemble.hpp"
#include "empdis/error.hpp"
#include "empdis/metrics.hpp"
#include "support/testutil.hpp"

namespace empdis::detail {
double svr_predict(const SvrState& state, const Eigen::VectorXd& row);
}

using namespace empdis;

namespace {

PredictionVector make_vector(std::vector<double> values, std::string name,
                             Target target = Target::empathy,
                             std::uint64_t fingerprint = 7) {
  PredictionVector v;
  v.values = std::move(values);
  v.source_model = std::move(name);
  v.target = target;
  v.dataset_fingerprint = fingerprint;
  return v;
}

PredictionMatrix random_matrix(testutil::Rng& rng, std::size_t rows,
                               std::size_t cols, double lo = 1.0,
                               double hi = 7.0) {
  PredictionMatrix m;
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t c = 0; c < cols; ++c) {
    m.model_names.push_back("m" + std::to_string(c));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rng.uniform(lo, hi);
    }
  }
  m.target = Target::empathy;
  m.dataset_fingerprint = 7;
  return m;
}

const ScoreRange kWideRange{-1000.0, 1000.0};  // keeps clamping out of math checks

}  // namespace

TEST_CASE("assemble_matrix stacks aligned vectors") {
  const auto a = make_vector({1.0, 2.0, 3.0}, "a");
  const auto b = make_vector({4.0, 5.0, 6.0}, "b");
  const PredictionMatrix m = assemble_matrix({a, b});
  CHECK(m.rows() == 3);
  CHECK(m.models() == 2);
  CHECK(m.model_names == std::vector<std::string>{"a", "b"});
  CHECK(m.values(0, 0) == 1.0);
  CHECK(m.values(2, 1) == 6.0);
  CHECK(m.target == Target::empathy);
  CHECK(m.dataset_fingerprint == 7);
}

TEST_CASE("assemble_matrix rejects inconsistent inputs") {
  const auto a = make_vector({1, 2, 3}, "a");

  SUBCASE("length mismatch") {
    const auto b = make_vector({1, 2, 3, 4}, "b");
    try {
      assemble_matrix({a, b});
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
  }
  SUBCASE("target mismatch") {
    const auto b = make_vector({1, 2, 3}, "b", Target::distress);
    try {
      assemble_matrix({a, b});
      FAIL("expected TargetMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TargetMismatch);
    }
  }
  SUBCASE("fingerprint mismatch") {
    const auto b = make_vector({1, 2, 3}, "b", Target::empathy, 8);
    try {
      assemble_matrix({a, b});
      FAIL("expected FingerprintMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FingerprintMismatch);
    }
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(assemble_matrix({}), Error);
  }
}

TEST_CASE("mean combiner: exact row means") {
  const CombinerKind mean{};
  testutil::Rng rng(31);

  SUBCASE("single row by hand") {
    PredictionMatrix m = random_matrix(rng, 1, 2);
    m.values(0, 0) = 2.0;
    m.values(0, 1) = 4.0;
    const FittedCombiner fitted = fit_combiner(mean, m, {3.0}, 0);
    CHECK(combine(fitted, m).values[0] == 3.0);
  }

  SUBCASE("random matrices match the left-to-right reference") {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t rows = 1 + rng.below(40);
      const std::size_t cols = 1 + rng.below(6);
      const PredictionMatrix m = random_matrix(rng, rows, cols);
      std::vector<double> gold(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) gold[r] = rng.uniform(1.0, 7.0);

      const FittedCombiner fitted = fit_combiner(mean, m, gold, 0);
      const PredictionVector out = combine(fitted, m);
      REQUIRE(out.values.size() == rows);
      for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          sum += m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
        CHECK(std::fabs(out.values[r] - sum / static_cast<double>(cols)) < 1e-12);
      }
    }
  }

  SUBCASE("consensus columns return the column") {
    for (const std::size_t cols : {2u, 3u, 4u}) {
      PredictionMatrix m = random_matrix(rng, 10, cols);
      for (std::size_t c = 1; c < cols; ++c) {
        m.values.col(static_cast<Eigen::Index>(c)) = m.values.col(0);
      }
      std::vector<double> gold(10, 0.0);
      for (auto& g : gold) g = rng.uniform(1.0, 7.0);
      const FittedCombiner fitted = fit_combiner(CombinerKind{}, m, gold, 0);
      const PredictionVector out = combine(fitted, m);
      for (std::size_t r = 0; r < 10; ++r) {
        CHECK(out.values[r] ==
              doctest::Approx(m.values(static_cast<Eigen::Index>(r), 0)).epsilon(1e-15));
      }
    }
  }

  SUBCASE("column permutation leaves the mean unchanged") {
    PredictionMatrix m = random_matrix(rng, 12, 4);
    std::vector<double> gold(12, 0.0);
    for (auto& g : gold) g = rng.uniform(1.0, 7.0);

    PredictionMatrix permuted = m;
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    for (std::size_t c = 0; c < perm.size(); ++c) {
      permuted.values.col(static_cast<Eigen::Index>(c)) =
          m.values.col(static_cast<Eigen::Index>(perm[c]));
      permuted.model_names[c] = m.model_names[perm[c]];
    }

    const auto out_a = combine(fit_combiner(CombinerKind{}, m, gold, 0), m);
    const auto out_b =
        combine(fit_combiner(CombinerKind{}, permuted, gold, 0), permuted);
    for (std::size_t r = 0; r < 12; ++r) {
      CHECK(out_a.values[r] == doctest::Approx(out_b.values[r]).epsilon(1e-12));
    }
  }

  SUBCASE("mean state is empty") {
    const PredictionMatrix m = random_matrix(rng, 4, 2);
    const FittedCombiner fitted = fit_combiner(mean, m, {1, 2, 3, 4}, 0);
    CHECK(std::holds_alternative<MeanState>(fitted.state));
  }
}

TEST_CASE("linear combiner recovers planted weights") {
  testutil::Rng rng(47);
  PredictionMatrix dev = random_matrix(rng, 40, 2);
  std::vector<double> gold(40);
  for (std::size_t r = 0; r < 40; ++r) {
    gold[r] = 0.5 * dev.values(static_cast<Eigen::Index>(r), 0) +
              0.5 * dev.values(static_cast<Eigen::Index>(r), 1) + 1.0;
  }

  CombinerKind kind;
  kind.kind = CombinerKindId::linear_regression;
  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);

  const auto& state = std::get<LinearState>(fitted.state);
  CHECK(state.weights[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(state.weights[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(state.intercept == doctest::Approx(1.0).epsilon(1e-6));

  PredictionMatrix fresh = random_matrix(rng, 15, 2);
  fresh.model_names = dev.model_names;
  const PredictionVector out = combine(fitted, fresh);
  for (std::size_t r = 0; r < 15; ++r) {
    const double expected = 0.5 * fresh.values(static_cast<Eigen::Index>(r), 0) +
                            0.5 * fresh.values(static_cast<Eigen::Index>(r), 1) + 1.0;
    CHECK(out.values[r] == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("linear combiner satisfies the normal equations on noisy data") {
  testutil::Rng rng(53);
  PredictionMatrix dev = random_matrix(rng, 50, 3);
  std::vector<double> gold(50);
  for (std::size_t r = 0; r < 50; ++r) {
    gold[r] = 2.0 + 0.3 * dev.values(static_cast<Eigen::Index>(r), 0) -
              0.8 * dev.values(static_cast<Eigen::Index>(r), 2) +
              rng.uniform(-0.5, 0.5);
  }
  CombinerKind kind;
  kind.kind = CombinerKindId::linear_regression;
  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
  const auto& state = std::get<LinearState>(fitted.state);

  // residual must be orthogonal to every column and to the intercept
  Eigen::VectorXd residual(50);
  for (Eigen::Index r = 0; r < 50; ++r) {
    residual[r] = gold[static_cast<std::size_t>(r)] -
                  (state.weights.dot(dev.values.row(r)) + state.intercept);
  }
  CHECK(std::fabs(residual.sum()) < 1e-8);
  for (Eigen::Index c = 0; c < 3; ++c) {
    CHECK(std::fabs(residual.dot(dev.values.col(c))) < 1e-8);
  }
}

TEST_CASE("linear combiner resolves duplicate columns without erroring") {
  testutil::Rng rng(59);
  PredictionMatrix dev = random_matrix(rng, 30, 2);
  dev.values.col(1) = dev.values.col(0);  // rank deficient
  std::vector<double> gold(30);
  for (std::size_t r = 0; r < 30; ++r) {
    gold[r] = dev.values(static_cast<Eigen::Index>(r), 0) + 2.0;
  }
  CombinerKind kind;
  kind.kind = CombinerKindId::linear_regression;
  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
  const auto& state = std::get<LinearState>(fitted.state);
  // minimum-norm solution shares the weight across the twin columns
  CHECK(state.weights[0] == doctest::Approx(state.weights[1]).epsilon(1e-8));
  const PredictionVector out = combine(fitted, dev);
  for (std::size_t r = 0; r < 30; ++r) {
    CHECK(out.values[r] == doctest::Approx(gold[r]).epsilon(1e-6));
  }
}

TEST_CASE("trainable combiners reject zero-variance gold") {
  testutil::Rng rng(61);
  const PredictionMatrix dev = random_matrix(rng, 10, 2);
  const std::vector<double> flat(10, 4.0);

  for (const CombinerKindId id :
       {CombinerKindId::linear_regression, CombinerKindId::svr,
        CombinerKindId::gradient_boosted_trees}) {
    CombinerKind kind;
    kind.kind = id;
    try {
      fit_combiner(kind, dev, flat, 0);
      FAIL("expected DegenerateGold");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateGold);
    }
  }
  CHECK_NOTHROW(fit_combiner(CombinerKind{}, dev, flat, 0));
}

TEST_CASE("hyperparameters are restricted to the declared sets") {
  CombinerKind kind;
  kind.kind = CombinerKindId::svr;
  kind.hyper["c"] = 2.0;
  CHECK_NOTHROW(kind.validate());
  kind.hyper["kernel_width"] = 1.0;
  CHECK_THROWS_AS(kind.validate(), Error);

  CombinerKind gbt;
  gbt.kind = CombinerKindId::gradient_boosted_trees;
  gbt.hyper["trees"] = 10;
  CHECK_NOTHROW(gbt.validate());
  gbt.hyper["subsample"] = 0.5;
  CHECK_THROWS_AS(gbt.validate(), Error);

  CombinerKind mean;
  mean.hyper["anything"] = 1.0;
  CHECK_THROWS_AS(mean.validate(), Error);
}

TEST_CASE("all four combiner kinds are run-to-run deterministic") {
  testutil::Rng rng(67);
  const PredictionMatrix dev = random_matrix(rng, 30, 3);
  std::vector<double> gold(30);
  for (auto& g : gold) g = rng.uniform(1.0, 7.0);
  PredictionMatrix test = random_matrix(rng, 12, 3);
  test.model_names = dev.model_names;

  for (const CombinerKindId id :
       {CombinerKindId::mean, CombinerKindId::linear_regression,
        CombinerKindId::svr, CombinerKindId::gradient_boosted_trees}) {
    CombinerKind kind;
    kind.kind = id;
    if (id == CombinerKindId::gradient_boosted_trees) kind.hyper["trees"] = 25;

    const FittedCombiner fit_a = fit_combiner(kind, dev, gold, 42);
    const FittedCombiner fit_b = fit_combiner(kind, dev, gold, 42);
    INFO(to_string(id));
    CHECK(fit_a.fit_fingerprint == fit_b.fit_fingerprint);
    const auto out_a = combine(fit_a, test);
    const auto out_b = combine(fit_b, test);
    CHECK(out_a.values == out_b.values);
    CHECK(out_a.values.size() == test.rows());

    // a different seed changes the fingerprint even for seedless fits
    const FittedCombiner fit_c = fit_combiner(kind, dev, gold, 43);
    CHECK(fit_c.fit_fingerprint != fit_a.fit_fingerprint);
  }
}

TEST_CASE("combine rejects mismatched column contracts") {
  testutil::Rng rng(71);
  const PredictionMatrix dev = random_matrix(rng, 10, 2);
  std::vector<double> gold(10);
  for (auto& g : gold) g = rng.uniform(1.0, 7.0);
  const FittedCombiner fitted = fit_combiner(CombinerKind{}, dev, gold, 0);

  PredictionMatrix reordered = dev;
  std::swap(reordered.model_names[0], reordered.model_names[1]);
  try {
    combine(fitted, reordered);
    FAIL("expected ColumnMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ColumnMismatch);
  }
}

TEST_CASE("combiner outputs are clamped to the score range") {
  FittedCombiner fitted;
  fitted.kind.kind = CombinerKindId::linear_regression;
  fitted.model_names = {"a"};
  fitted.score_range = {1.0, 7.0};
  LinearState state;
  state.weights = Eigen::VectorXd::Ones(1);
  state.intercept = 100.0;
  fitted.state = state;

  PredictionMatrix m;
  m.values.resize(2, 1);
  m.values << 3.0, -200.0;
  m.model_names = {"a"};
  m.target = Target::empathy;
  const PredictionVector out = combine(fitted, m);
  CHECK(out.values[0] == 7.0);
  CHECK(out.values[1] == 1.0);
}

// -- SVR ----------------------------------------------------------------------

namespace {

// Independent optimality oracle: verify the KKT conditions of the
// epsilon-insensitive dual at the returned solution. For a convex problem
// they are necessary and sufficient, so this checks the solver end to end
// without reimplementing it.
void check_svr_kkt(const FittedCombiner& fitted, const PredictionMatrix& dev,
                   const std::vector<double>& gold, double cost, double eps) {
  const auto& state = std::get<SvrState>(fitted.state);
  const Eigen::Index n = dev.values.rows();

  double beta_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) beta_sum += state.beta[i];
  CHECK(std::fabs(beta_sum) < 1e-9);

  const double box_tol = 1e-6 * cost;
  const double err_tol = 1e-4;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double beta = state.beta[i];
    CHECK(beta >= -cost - 1e-12);
    CHECK(beta <= cost + 1e-12);
    const double err = gold[static_cast<std::size_t>(i)] -
                       detail::svr_predict(state, dev.values.row(i).transpose());
    INFO("i=" << i << " beta=" << beta << " err=" << err);
    if (beta >= cost - box_tol) {
      CHECK(err >= eps - err_tol);
    } else if (beta <= -cost + box_tol) {
      CHECK(err <= -eps + err_tol);
    } else if (std::fabs(beta) <= box_tol) {
      CHECK(std::fabs(err) <= eps + err_tol);
    } else if (beta > 0) {
      CHECK(std::fabs(err - eps) <= err_tol);
    } else {
      CHECK(std::fabs(err + eps) <= err_tol);
    }
  }
}

}  // namespace

TEST_CASE("svr solution satisfies the dual KKT conditions") {
  testutil::Rng rng(73);
  for (const double cost : {1.0, 5.0}) {
    PredictionMatrix dev = random_matrix(rng, 35, 3);
    std::vector<double> gold(35);
    for (std::size_t r = 0; r < 35; ++r) {
      gold[r] = 0.8 * dev.values(static_cast<Eigen::Index>(r), 0) +
                0.4 * std::sin(dev.values(static_cast<Eigen::Index>(r), 1)) +
                rng.uniform(-0.3, 0.3);
    }
    CombinerKind kind;
    kind.kind = CombinerKindId::svr;
    kind.hyper["c"] = cost;
    const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
    check_svr_kkt(fitted, dev, gold, cost, 0.1);
  }
}

TEST_CASE("svr fits a smooth signal well") {
  testutil::Rng rng(79);
  PredictionMatrix dev = random_matrix(rng, 60, 2);
  std::vector<double> gold(60);
  for (std::size_t r = 0; r < 60; ++r) {
    gold[r] = 0.5 * (dev.values(static_cast<Eigen::Index>(r), 0) +
                     dev.values(static_cast<Eigen::Index>(r), 1));
  }
  CombinerKind kind;
  kind.kind = CombinerKindId::svr;
  kind.hyper["c"] = 10.0;
  kind.hyper["epsilon"] = 0.05;
  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
  const PredictionVector out = combine(fitted, dev);
  CHECK(pearson(out.values, gold) > 0.95);
}

TEST_CASE("svr standardization keeps constant columns harmless") {
  testutil::Rng rng(83);
  PredictionMatrix dev = random_matrix(rng, 20, 2);
  dev.values.col(1).setConstant(4.0);
  std::vector<double> gold(20);
  for (std::size_t r = 0; r < 20; ++r) {
    gold[r] = dev.values(static_cast<Eigen::Index>(r), 0);
  }
  CombinerKind kind;
  kind.kind = CombinerKindId::svr;
  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
  const auto& state = std::get<SvrState>(fitted.state);
  CHECK(state.column_scale[1] == 1.0);
  const PredictionVector out = combine(fitted, dev);
  for (double v : out.values) CHECK(std::isfinite(v));
}

// -- gradient boosted trees ----------------------------------------------------

TEST_CASE("gbt: one depth-1 tree reproduces the two-level step exactly") {
  PredictionMatrix dev;
  dev.values.resize(4, 1);
  dev.values << 0.0, 0.0, 1.0, 1.0;
  dev.model_names = {"m0"};
  const std::vector<double> gold = {1.0, 1.0, 3.0, 3.0};

  CombinerKind kind;
  kind.kind = CombinerKindId::gradient_boosted_trees;
  kind.hyper["trees"] = 1;
  kind.hyper["max_depth"] = 1;
  kind.hyper["learning_rate"] = 1.0;

  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
  const auto& state = std::get<GbtState>(fitted.state);
  CHECK(state.base == 2.0);
  REQUIRE(state.trees.size() == 1);

  const PredictionVector out = combine(fitted, dev);
  CHECK(out.values == gold);
}

TEST_CASE("gbt: one depth-2 tree reproduces the additive two-bit table exactly") {
  PredictionMatrix dev;
  dev.values.resize(4, 2);
  dev.values << 0, 0, 0, 1, 1, 0, 1, 1;
  dev.model_names = {"m0", "m1"};
  const std::vector<double> gold = {0.0, 1.0, 2.0, 3.0};  // 2*col0 + col1

  CombinerKind kind;
  kind.kind = CombinerKindId::gradient_boosted_trees;
  kind.hyper["trees"] = 1;
  kind.hyper["max_depth"] = 2;
  kind.hyper["learning_rate"] = 1.0;

  const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
  const PredictionVector out = combine(fitted, dev);
  CHECK(out.values == gold);
}

TEST_CASE("gbt: more trees monotonically reduce training error") {
  testutil::Rng rng(89);
  PredictionMatrix dev = random_matrix(rng, 50, 3);
  std::vector<double> gold(50);
  for (std::size_t r = 0; r < 50; ++r) {
    gold[r] = dev.values(static_cast<Eigen::Index>(r), 0) > 4.0 ? 6.0 : 2.0;
  }

  const auto train_mse = [&](int trees) {
    CombinerKind kind;
    kind.kind = CombinerKindId::gradient_boosted_trees;
    kind.hyper["trees"] = trees;
    const FittedCombiner fitted = fit_combiner(kind, dev, gold, 0, kWideRange);
    const PredictionVector out = combine(fitted, dev);
    double sse = 0.0;
    for (std::size_t r = 0; r < 50; ++r) {
      sse += (out.values[r] - gold[r]) * (out.values[r] - gold[r]);
    }
    return sse / 50.0;
  };

  const double mse_5 = train_mse(5);
  const double mse_50 = train_mse(50);
  double variance = 0.0, mean = 0.0;
  for (double g : gold) mean += g;
  mean /= 50.0;
  for (double g : gold) variance += (g - mean) * (g - mean);
  variance /= 50.0;

  CHECK(mse_5 < variance);
  CHECK(mse_50 < mse_5);
  CHECK(mse_50 < 0.01);
}

TEST_CASE("combiner artifacts round-trip bitwise for every kind") {
  testutil::Rng rng(97);
  const PredictionMatrix dev = random_matrix(rng, 25, 3);
  std::vector<double> gold(25);
  for (auto& g : gold) g = rng.uniform(1.0, 7.0);
  PredictionMatrix test = random_matrix(rng, 9, 3);
  test.model_names = dev.model_names;

  testutil::TempDir dir("combiner_artifacts");
  for (const CombinerKindId id :
       {CombinerKindId::mean, CombinerKindId::linear_regression,
        CombinerKindId::svr, CombinerKindId::gradient_boosted_trees}) {
    CombinerKind kind;
    kind.kind = id;
    if (id == CombinerKindId::gradient_boosted_trees) kind.hyper["trees"] = 20;
    const FittedCombiner fitted = fit_combiner(kind, dev, gold, 11);
    const auto artifact = dir.path() / to_string(id);
    save_combiner(fitted, artifact);
    const FittedCombiner loaded = load_combiner(artifact);

    INFO(to_string(id));
    CHECK(loaded.fit_fingerprint == fitted.fit_fingerprint);
    CHECK(loaded.model_names == fitted.model_names);
    CHECK(loaded.kind.hyper == fitted.kind.hyper);
    CHECK(combine(loaded, test).values == combine(fitted, test).values);
  }
}
