#include "empdis/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "combiner_detail.hpp"
#include "empdis/error.hpp"
#include "empdis/fingerprint.hpp"

namespace empdis {

namespace {

const std::set<std::string>& declared_hypers(CombinerKindId id) {
  static const std::set<std::string> none;
  static const std::set<std::string> svr_keys = {"c", "epsilon", "gamma", "tol",
                                                 "max_iter"};
  static const std::set<std::string> gbt_keys = {"trees", "max_depth",
                                                 "learning_rate", "min_leaf"};
  switch (id) {
    case CombinerKindId::mean:
    case CombinerKindId::linear_regression:
      return none;
    case CombinerKindId::svr:
      return svr_keys;
    case CombinerKindId::gradient_boosted_trees:
      return gbt_keys;
  }
  return none;
}

bool zero_variance(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] != v[0]) return false;
  }
  return true;
}

}  // namespace

const char* to_string(CombinerKindId id) {
  switch (id) {
    case CombinerKindId::mean: return "mean";
    case CombinerKindId::linear_regression: return "linear_regression";
    case CombinerKindId::svr: return "svr";
    case CombinerKindId::gradient_boosted_trees: return "gradient_boosted_trees";
  }
  return "?";
}

CombinerKindId combiner_kind_from_string(std::string_view s) {
  if (s == "mean") return CombinerKindId::mean;
  if (s == "linear_regression") return CombinerKindId::linear_regression;
  if (s == "svr") return CombinerKindId::svr;
  if (s == "gradient_boosted_trees") return CombinerKindId::gradient_boosted_trees;
  raise(ErrorCode::ConfigInvalid, "unknown combiner kind '" + std::string(s) + "'");
}

void CombinerKind::validate() const {
  const auto& allowed = declared_hypers(kind);
  for (const auto& [key, value] : hyper) {
    if (!allowed.count(key)) {
      raise(ErrorCode::ConfigInvalid,
            std::string("combiner '") + to_string(kind) +
                "' does not declare hyperparameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      raise(ErrorCode::ConfigInvalid,
            "hyperparameter '" + key + "' must be finite");
    }
  }
}

double CombinerKind::hyper_or(const std::string& key, double fallback) const {
  const auto it = hyper.find(key);
  return it == hyper.end() ? fallback : it->second;
}

std::uint64_t CombinerKind::fingerprint() const {
  Fingerprint fp;
  fp.update(to_string(kind));
  fp.update_u64(hyper.size());
  for (const auto& [key, value] : hyper) {  // std::map: stable order
    fp.update(key);
    fp.update_double(value);
  }
  return fp.digest();
}

PredictionMatrix assemble_matrix(const std::vector<PredictionVector>& predictions) {
  if (predictions.empty()) {
    raise(ErrorCode::ShapeMismatch, "no prediction vectors to assemble");
  }
  const std::size_t rows = predictions[0].values.size();
  for (const auto& p : predictions) {
    if (p.target != predictions[0].target) {
      raise(ErrorCode::TargetMismatch,
            "prediction vectors mix empathy and distress targets");
    }
    if (p.values.size() != rows) {
      raise(ErrorCode::ShapeMismatch,
            "prediction vector '" + p.source_model + "' has " +
                std::to_string(p.values.size()) + " rows, expected " +
                std::to_string(rows));
    }
    if (p.dataset_fingerprint != predictions[0].dataset_fingerprint) {
      raise(ErrorCode::FingerprintMismatch,
            "prediction vector '" + p.source_model +
                "' comes from a different dataset");
    }
    for (double v : p.values) {
      if (!std::isfinite(v)) {
        raise(ErrorCode::ShapeMismatch,
              "non-finite prediction from '" + p.source_model + "'");
      }
    }
  }

  PredictionMatrix matrix;
  matrix.target = predictions[0].target;
  matrix.dataset_fingerprint = predictions[0].dataset_fingerprint;
  matrix.values.resize(static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(predictions.size()));
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    matrix.model_names.push_back(predictions[j].source_model);
    for (std::size_t i = 0; i < rows; ++i) {
      matrix.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          predictions[j].values[i];
    }
  }
  return matrix;
}

double FittedCombiner::apply_row(const Eigen::VectorXd& row) const {
  if (std::holds_alternative<MeanState>(state)) {
    double sum = 0.0;  // fixed left-to-right order
    for (Eigen::Index j = 0; j < row.size(); ++j) sum += row[j];
    return sum / static_cast<double>(row.size());
  }
  if (const auto* linear = std::get_if<LinearState>(&state)) {
    return linear->weights.dot(row) + linear->intercept;
  }
  if (const auto* svr = std::get_if<SvrState>(&state)) {
    return detail::svr_predict(*svr, row);
  }
  return detail::gbt_predict(std::get<GbtState>(state), row);
}

FittedCombiner fit_combiner(const CombinerKind& kind,
                            const PredictionMatrix& dev_matrix,
                            const std::vector<double>& dev_gold,
                            std::uint64_t seed, ScoreRange score_range) {
  kind.validate();
  score_range.validate();
  if (dev_matrix.rows() != dev_gold.size()) {
    raise(ErrorCode::ShapeMismatch,
          "dev matrix has " + std::to_string(dev_matrix.rows()) +
              " rows but gold has " + std::to_string(dev_gold.size()));
  }

  FittedCombiner fitted;
  fitted.kind = kind;
  fitted.model_names = dev_matrix.model_names;
  fitted.score_range = score_range;

  Fingerprint fp;
  fp.update_u64(kind.fingerprint());
  fp.update_u64(static_cast<std::uint64_t>(dev_matrix.values.rows()));
  fp.update_u64(static_cast<std::uint64_t>(dev_matrix.values.cols()));
  fp.update(dev_matrix.values.data(),
            sizeof(double) * static_cast<std::size_t>(dev_matrix.values.size()));
  fp.update_doubles(dev_gold);
  fp.update_u64(seed);
  fitted.fit_fingerprint = fp.digest();

  if (kind.kind == CombinerKindId::mean) {
    fitted.state = MeanState{};
    return fitted;
  }

  if (zero_variance(dev_gold)) {
    raise(ErrorCode::DegenerateGold,
          std::string("cannot fit '") + to_string(kind.kind) +
              "' on zero-variance gold scores");
  }

  const Eigen::Index n = dev_matrix.values.rows();
  const Eigen::Index p = dev_matrix.values.cols();
  Eigen::VectorXd gold(n);
  for (Eigen::Index i = 0; i < n; ++i) gold[i] = dev_gold[static_cast<std::size_t>(i)];

  switch (kind.kind) {
    case CombinerKindId::linear_regression: {
      Eigen::MatrixXd design(n, p + 1);
      design.leftCols(p) = dev_matrix.values;
      design.col(p).setOnes();
      auto cod = design.completeOrthogonalDecomposition();
      if (cod.rank() < p + 1) {
        std::cerr << "[info] linear combiner: rank-deficient columns, "
                     "minimum-norm solution used\n";
      }
      const Eigen::VectorXd solution = cod.solve(gold);
      LinearState linear;
      linear.weights = solution.head(p);
      linear.intercept = solution[p];
      fitted.state = std::move(linear);
      break;
    }
    case CombinerKindId::svr:
      fitted.state = detail::fit_svr(dev_matrix.values, dev_gold, kind);
      break;
    case CombinerKindId::gradient_boosted_trees:
      fitted.state = detail::fit_gbt(dev_matrix.values, dev_gold, kind);
      break;
    case CombinerKindId::mean:
      break;  // handled above
  }
  return fitted;
}

PredictionVector combine(const FittedCombiner& fitted,
                         const PredictionMatrix& test_matrix) {
  if (test_matrix.model_names != fitted.model_names) {
    std::string expected, got;
    for (const auto& name : fitted.model_names) expected += name + " ";
    for (const auto& name : test_matrix.model_names) got += name + " ";
    raise(ErrorCode::ColumnMismatch,
          "columns differ from fit time: fitted on [" + expected +
              "], got [" + got + "]");
  }

  PredictionVector out;
  out.source_model = std::string("ensemble:") + to_string(fitted.kind.kind);
  out.target = test_matrix.target;
  out.dataset_fingerprint = test_matrix.dataset_fingerprint;
  out.values.reserve(test_matrix.rows());
  for (Eigen::Index i = 0; i < test_matrix.values.rows(); ++i) {
    const double raw = fitted.apply_row(test_matrix.values.row(i).transpose());
    out.values.push_back(fitted.score_range.clamp(raw));
  }
  return out;
}

// Persistence -----------------------------------------------------------------

namespace {

constexpr char kStateMagic[9] = "EMPDCOMB";

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof value);
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  write_pod(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd read_vector(std::ifstream& in) {
  std::uint64_t size = 0;
  read_pod(in, size);
  Eigen::VectorXd v(static_cast<Eigen::Index>(size));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * size));
  return v;
}

}  // namespace

void save_combiner(const FittedCombiner& fitted,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream meta(dir / "meta.txt");
    meta << "kind=" << to_string(fitted.kind.kind) << '\n';
    char buf[64];
    for (const auto& [key, value] : fitted.kind.hyper) {
      std::snprintf(buf, sizeof buf, "%.17g", value);
      meta << "hyper." << key << '=' << buf << '\n';
    }
    meta << "fit_fingerprint=" << fingerprint_hex(fitted.fit_fingerprint) << '\n'
         << "score_lo=" << fitted.score_range.lo << '\n'
         << "score_hi=" << fitted.score_range.hi << '\n';
    for (const auto& name : fitted.model_names) {
      meta << "model=" << name << '\n';
    }
  }

  std::ofstream out(dir / "state.bin", std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + (dir / "state.bin").string());
  out.write(kStateMagic, 8);
  const std::uint32_t tag = static_cast<std::uint32_t>(fitted.kind.kind);
  write_pod(out, tag);
  if (const auto* linear = std::get_if<LinearState>(&fitted.state)) {
    write_vector(out, linear->weights);
    write_pod(out, linear->intercept);
  } else if (const auto* svr = std::get_if<SvrState>(&fitted.state)) {
    write_pod(out, static_cast<std::uint64_t>(svr->support.rows()));
    write_pod(out, static_cast<std::uint64_t>(svr->support.cols()));
    out.write(reinterpret_cast<const char*>(svr->support.data()),
              static_cast<std::streamsize>(sizeof(double) * svr->support.size()));
    write_vector(out, svr->beta);
    write_pod(out, svr->bias);
    write_vector(out, svr->column_mean);
    write_vector(out, svr->column_scale);
    write_pod(out, svr->gamma);
  } else if (const auto* gbt = std::get_if<GbtState>(&fitted.state)) {
    write_pod(out, gbt->base);
    write_pod(out, gbt->learning_rate);
    write_pod(out, static_cast<std::uint64_t>(gbt->trees.size()));
    for (const GbtTree& tree : gbt->trees) {
      write_pod(out, static_cast<std::uint64_t>(tree.nodes.size()));
      for (const GbtNode& node : tree.nodes) {
        write_pod(out, node.feature);
        write_pod(out, node.threshold);
        write_pod(out, node.left);
        write_pod(out, node.right);
        write_pod(out, node.value);
      }
    }
  }
}

FittedCombiner load_combiner(const std::filesystem::path& dir) {
  FittedCombiner fitted;

  std::ifstream meta(dir / "meta.txt");
  if (!meta) {
    raise(ErrorCode::MissingArtifact, "missing " + (dir / "meta.txt").string());
  }
  std::string line;
  while (std::getline(meta, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "kind") {
      fitted.kind.kind = combiner_kind_from_string(value);
    } else if (key.rfind("hyper.", 0) == 0) {
      fitted.kind.hyper[key.substr(6)] = std::stod(value);
    } else if (key == "fit_fingerprint") {
      fitted.fit_fingerprint = std::stoull(value, nullptr, 16);
    } else if (key == "score_lo") {
      fitted.score_range.lo = std::stod(value);
    } else if (key == "score_hi") {
      fitted.score_range.hi = std::stod(value);
    } else if (key == "model") {
      fitted.model_names.push_back(value);
    }
  }

  std::ifstream in(dir / "state.bin", std::ios::binary);
  if (!in) {
    raise(ErrorCode::MissingArtifact, "missing " + (dir / "state.bin").string());
  }
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string_view(magic, 8) != std::string_view(kStateMagic, 8)) {
    raise(ErrorCode::MissingArtifact, "corrupt combiner state in " + dir.string());
  }
  std::uint32_t tag = 0;
  read_pod(in, tag);
  if (tag != static_cast<std::uint32_t>(fitted.kind.kind)) {
    raise(ErrorCode::MissingArtifact,
          "combiner state kind does not match meta in " + dir.string());
  }

  switch (fitted.kind.kind) {
    case CombinerKindId::mean:
      fitted.state = MeanState{};
      break;
    case CombinerKindId::linear_regression: {
      LinearState linear;
      linear.weights = read_vector(in);
      read_pod(in, linear.intercept);
      fitted.state = std::move(linear);
      break;
    }
    case CombinerKindId::svr: {
      SvrState svr;
      std::uint64_t rows = 0, cols = 0;
      read_pod(in, rows);
      read_pod(in, cols);
      svr.support.resize(static_cast<Eigen::Index>(rows),
                         static_cast<Eigen::Index>(cols));
      in.read(reinterpret_cast<char*>(svr.support.data()),
              static_cast<std::streamsize>(sizeof(double) * rows * cols));
      svr.beta = read_vector(in);
      read_pod(in, svr.bias);
      svr.column_mean = read_vector(in);
      svr.column_scale = read_vector(in);
      read_pod(in, svr.gamma);
      fitted.state = std::move(svr);
      break;
    }
    case CombinerKindId::gradient_boosted_trees: {
      GbtState gbt;
      read_pod(in, gbt.base);
      read_pod(in, gbt.learning_rate);
      std::uint64_t n_trees = 0;
      read_pod(in, n_trees);
      gbt.trees.resize(n_trees);
      for (auto& tree : gbt.trees) {
        std::uint64_t n_nodes = 0;
        read_pod(in, n_nodes);
        tree.nodes.resize(n_nodes);
        for (auto& node : tree.nodes) {
          read_pod(in, node.feature);
          read_pod(in, node.threshold);
          read_pod(in, node.left);
          read_pod(in, node.right);
          read_pod(in, node.value);
        }
      }
      fitted.state = std::move(gbt);
      break;
    }
  }
  if (!in) {
    raise(ErrorCode::MissingArtifact, "truncated combiner state in " + dir.string());
  }
  return fitted;
}

}  // namespace empdis
