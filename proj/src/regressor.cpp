#include "empdis/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "empdis/error.hpp"
#include "empdis/fingerprint.hpp"
#include "empdis/metrics.hpp"

namespace empdis {

namespace {

// splitmix64; used for batch shuffling so runs are reproducible across
// standard library implementations.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::size_t below(std::size_t bound) {
    return static_cast<std::size_t>(next() % bound);
  }
};

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::swap(indices[i - 1], indices[rng.below(i)]);
  }
}

bool constant_labels(const std::vector<Example>& examples) {
  for (std::size_t i = 1; i < examples.size(); ++i) {
    if (examples[i].second != examples[0].second) return false;
  }
  return true;
}

double dev_pearson_or_nan(const std::vector<double>& preds,
                          const std::vector<double>& gold) {
  try {
    return pearson(preds, gold);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ZeroVariance) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    throw;
  }
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    raise(ErrorCode::MissingArtifact, "cannot open " + file.string());
  }
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) {
    raise(ErrorCode::ConfigInvalid, "learning_rate must be positive");
  }
  if (epochs < 1) raise(ErrorCode::ConfigInvalid, "epochs must be >= 1");
  if (batch_size < 1) raise(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
  if (weight_decay < 0.0) {
    raise(ErrorCode::ConfigInvalid, "weight_decay must be nonnegative");
  }
  if (grad_clip && *grad_clip <= 0.0) {
    raise(ErrorCode::ConfigInvalid, "grad_clip must be positive when set");
  }
}

std::uint64_t TrainConfig::fingerprint() const {
  Fingerprint fp;
  fp.update_double(learning_rate);
  fp.update_i64(epochs);
  fp.update_i64(batch_size);
  fp.update_u64(seed);
  fp.update_u64(static_cast<std::uint64_t>(loss));
  fp.update_double(weight_decay);
  fp.update_u64(grad_clip.has_value());
  if (grad_clip) fp.update_double(*grad_clip);
  return fp.digest();
}

std::uint64_t compute_train_fingerprint(const std::vector<Example>& train,
                                        const std::vector<Example>& dev,
                                        const EncoderSpec& spec,
                                        const TrainConfig& config,
                                        Target target, ScoreRange range,
                                        std::uint64_t encoder_weights_fp) {
  Fingerprint fp;
  const auto add_examples = [&fp](const std::vector<Example>& examples) {
    fp.update_u64(examples.size());
    for (const auto& [text, label] : examples) {
      fp.update(text);
      fp.update_double(label);
    }
  };
  add_examples(train);
  add_examples(dev);
  fp.update_u64(spec.fingerprint());
  fp.update_u64(config.fingerprint());
  fp.update(to_string(target));
  fp.update_double(range.lo);
  fp.update_double(range.hi);
  fp.update_u64(encoder_weights_fp);
  return fp.digest();
}

std::pair<RegressorModel, TrainReport> train_regressor(
    const std::vector<Example>& train_examples,
    const std::vector<Example>& dev_examples, const EncoderSpec& spec,
    const TrainConfig& config, Target target, ScoreRange score_range) {
  return train_regressor(make_encoder(spec), train_examples, dev_examples,
                         config, target, score_range);
}

std::pair<RegressorModel, TrainReport> train_regressor(
    std::unique_ptr<Encoder> encoder,
    const std::vector<Example>& train_examples,
    const std::vector<Example>& dev_examples, const TrainConfig& config,
    Target target, ScoreRange score_range) {
  config.validate();
  score_range.validate();
  if (train_examples.empty() || dev_examples.empty()) {
    raise(ErrorCode::ConfigInvalid, "train and dev example sets must be non-empty");
  }
  if (constant_labels(train_examples)) {
    raise(ErrorCode::DegenerateLabels, "all training labels are identical");
  }
  if (constant_labels(dev_examples)) {
    raise(ErrorCode::DegenerateLabels,
          "all dev labels are identical; dev Pearson is undefined");
  }

  const std::size_t n_train = train_examples.size();
  const std::size_t n_dev = dev_examples.size();
  const int dim = encoder->dim();
  const bool finetune = encoder->trainable();

  std::vector<double> dev_gold(n_dev);
  for (std::size_t i = 0; i < n_dev; ++i) dev_gold[i] = dev_examples[i].second;

  // Frozen backbones: embeddings never change, compute them once.
  Eigen::MatrixXd train_embeddings, dev_embeddings;
  const auto embed_all =
      [&](const std::vector<Example>& examples) -> Eigen::MatrixXd {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(examples.size()), dim);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) =
          encoder->embed(examples[i].first).transpose();
    }
    return out;
  };
  if (!finetune) {
    train_embeddings = embed_all(train_examples);
    dev_embeddings = embed_all(dev_examples);
  }

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(dim);
  double bias = 0.0;

  TrainReport report;
  report.epochs.reserve(static_cast<std::size_t>(config.epochs));

  Eigen::VectorXd best_weights = weights;
  double best_bias = bias;
  std::shared_ptr<Encoder> best_encoder;
  double best_score = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  Rng rng(config.seed);
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  const auto batch_count = (n_train + config.batch_size - 1) /
                           static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(order, rng);
    double sum_squared_error = 0.0;

    for (std::size_t b = 0; b < batch_count; ++b) {
      const std::size_t begin = b * static_cast<std::size_t>(config.batch_size);
      const std::size_t end =
          std::min(n_train, begin + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      Eigen::VectorXd grad_w = Eigen::VectorXd::Zero(dim);
      double grad_b = 0.0;
      double batch_loss = 0.0;
      std::vector<std::pair<std::size_t, double>> residuals;
      if (finetune) residuals.reserve(end - begin);

      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        const Eigen::VectorXd x =
            finetune ? encoder->embed(train_examples[idx].first)
                     : Eigen::VectorXd(train_embeddings
                                           .row(static_cast<Eigen::Index>(idx))
                                           .transpose());
        const double pred = weights.dot(x) + bias;
        const double err = pred - train_examples[idx].second;
        batch_loss += err * err;
        const double dloss = 2.0 * err * inv_batch;
        grad_w += dloss * x;
        grad_b += dloss;
        if (finetune) residuals.emplace_back(idx, dloss);
      }
      sum_squared_error += batch_loss;
      batch_loss *= inv_batch;
      if (!std::isfinite(batch_loss)) {
        raise(ErrorCode::NonFiniteLoss,
              "training diverged at epoch " + std::to_string(epoch + 1));
      }

      grad_w += config.weight_decay * weights;

      double scale = 1.0;
      if (config.grad_clip) {
        const double norm = std::sqrt(grad_w.squaredNorm() + grad_b * grad_b);
        if (norm > *config.grad_clip) scale = *config.grad_clip / norm;
      }

      // Embedding gradients use the pre-update head weights.
      if (finetune) {
        for (const auto& [idx, dloss] : residuals) {
          encoder->apply_embedding_gradient(
              train_examples[idx].first, (dloss * scale) * weights,
              config.learning_rate);
        }
      }
      weights -= config.learning_rate * scale * grad_w;
      bias -= config.learning_rate * scale * grad_b;
    }

    if (finetune) dev_embeddings = embed_all(dev_examples);
    std::vector<double> dev_preds(n_dev);
    for (std::size_t i = 0; i < n_dev; ++i) {
      dev_preds[i] =
          weights.dot(dev_embeddings.row(static_cast<Eigen::Index>(i))) + bias;
    }
    const double dev_score = dev_pearson_or_nan(dev_preds, dev_gold);

    EpochStats stats;
    stats.train_loss = sum_squared_error / static_cast<double>(n_train);
    stats.dev_pearson = dev_score;
    report.epochs.push_back(stats);

    if (dev_score > best_score) {
      best_score = dev_score;
      best_epoch = epoch;
      best_weights = weights;
      best_bias = bias;
      if (finetune) best_encoder = std::shared_ptr<Encoder>(encoder->clone());
    }
  }

  if (best_epoch < 0) {
    raise(ErrorCode::ZeroVariance,
          "dev predictions were constant in every epoch; no checkpoint "
          "selectable");
  }

  report.best_epoch = best_epoch;
  report.best_dev_pearson = best_score;

  RegressorModel model;
  model.encoder_spec = encoder->spec();
  model.target = target;
  model.head_weights = std::move(best_weights);
  model.head_bias = best_bias;
  model.score_range = score_range;
  model.encoder = finetune ? std::move(best_encoder)
                           : std::shared_ptr<Encoder>(std::move(encoder));
  model.train_fingerprint = compute_train_fingerprint(
      train_examples, dev_examples, model.encoder_spec, config, target,
      score_range, model.encoder->weights_fingerprint());
  report.train_fingerprint = model.train_fingerprint;
  return {std::move(model), std::move(report)};
}

PredictionVector predict(const RegressorModel& model,
                         const std::vector<std::string>& texts,
                         std::uint64_t dataset_fingerprint) {
  PredictionVector out;
  out.source_model = model.encoder_spec.name;
  out.target = model.target;
  out.dataset_fingerprint = dataset_fingerprint;
  out.values.reserve(texts.size());
  for (const std::string& text : texts) {
    const double raw = model.raw_score(model.encoder->embed(text));
    out.values.push_back(model.score_range.clamp(raw));
  }
  return out;
}

// Artifacts -------------------------------------------------------------------

namespace {
constexpr char kHeadMagic[9] = "EMPDHEAD";
}

void save_model(const RegressorModel& model, const TrainReport& report,
                const TrainConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream head(dir / "head.bin", std::ios::binary);
    if (!head) raise(ErrorCode::IoError, "cannot write " + (dir / "head.bin").string());
    head.write(kHeadMagic, 8);
    const std::uint64_t dim = static_cast<std::uint64_t>(model.head_weights.size());
    head.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    head.write(reinterpret_cast<const char*>(&model.head_bias), sizeof(double));
    head.write(reinterpret_cast<const char*>(model.head_weights.data()),
               static_cast<std::streamsize>(sizeof(double) * dim));
  }

  const bool fine_tuned = model.encoder->save_weights(dir / "encoder.vec");

  {
    std::ofstream meta(dir / "meta.txt");
    meta << "encoder=" << model.encoder_spec.name << '\n'
         << "pooling=" << to_string(model.encoder_spec.pooling) << '\n'
         << "max_tokens=" << model.encoder_spec.max_tokens << '\n'
         << "frozen=" << (model.encoder_spec.frozen ? 1 : 0) << '\n'
         << "target=" << to_string(model.target) << '\n'
         << "score_lo=" << model.score_range.lo << '\n'
         << "score_hi=" << model.score_range.hi << '\n'
         << "train_fingerprint=" << fingerprint_hex(model.train_fingerprint) << '\n'
         << "weights_fingerprint="
         << fingerprint_hex(model.encoder->weights_fingerprint()) << '\n'
         << "fine_tuned=" << (fine_tuned ? 1 : 0) << '\n'
         << "best_epoch=" << report.best_epoch << '\n';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", report.best_dev_pearson);
    meta << "best_dev_pearson=" << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", config.learning_rate);
    meta << "learning_rate=" << buf << '\n'
         << "epochs=" << config.epochs << '\n'
         << "batch_size=" << config.batch_size << '\n'
         << "seed=" << config.seed << '\n'
         << "loss=mse\n";
    std::snprintf(buf, sizeof buf, "%.17g", config.weight_decay);
    meta << "weight_decay=" << buf << '\n';
    if (config.grad_clip) {
      std::snprintf(buf, sizeof buf, "%.17g", *config.grad_clip);
      meta << "grad_clip=" << buf << '\n';
    }
  }

  {
    std::ofstream tsv(dir / "report.tsv");
    tsv << "epoch\ttrain_loss\tdev_pearson\n";
    char buf[80];
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\n", e + 1,
                    report.epochs[e].train_loss, report.epochs[e].dev_pearson);
      tsv << buf;
    }
  }
}

RegressorModel load_model(const std::filesystem::path& dir) {
  const auto meta = read_meta(dir / "meta.txt");
  const auto need = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      raise(ErrorCode::MissingArtifact,
            "meta.txt in " + dir.string() + " lacks key '" + key + "'");
    }
    return it->second;
  };

  RegressorModel model;
  model.encoder_spec.name = need("encoder");
  model.encoder_spec.pooling = pooling_from_string(need("pooling"));
  model.encoder_spec.max_tokens = std::stoi(need("max_tokens"));
  model.encoder_spec.frozen = need("frozen") == "1";
  model.target = target_from_string(need("target"));
  model.score_range.lo = std::stod(need("score_lo"));
  model.score_range.hi = std::stod(need("score_hi"));
  model.train_fingerprint =
      std::stoull(need("train_fingerprint"), nullptr, 16);

  std::ifstream head(dir / "head.bin", std::ios::binary);
  if (!head) {
    raise(ErrorCode::MissingArtifact, "missing " + (dir / "head.bin").string());
  }
  char magic[8];
  head.read(magic, 8);
  if (!head || std::string_view(magic, 8) != std::string_view(kHeadMagic, 8)) {
    raise(ErrorCode::MissingArtifact,
          "corrupt head blob in " + dir.string());
  }
  std::uint64_t dim = 0;
  head.read(reinterpret_cast<char*>(&dim), sizeof dim);
  head.read(reinterpret_cast<char*>(&model.head_bias), sizeof(double));
  model.head_weights.resize(static_cast<Eigen::Index>(dim));
  head.read(reinterpret_cast<char*>(model.head_weights.data()),
            static_cast<std::streamsize>(sizeof(double) * dim));
  if (!head) {
    raise(ErrorCode::MissingArtifact, "truncated head blob in " + dir.string());
  }

  std::optional<std::filesystem::path> weights_override;
  if (std::filesystem::exists(dir / "encoder.vec")) {
    weights_override = dir / "encoder.vec";
  }
  model.encoder = std::shared_ptr<Encoder>(
      make_encoder(model.encoder_spec, weights_override));
  if (model.encoder->dim() != static_cast<int>(dim)) {
    raise(ErrorCode::MissingArtifact,
          "head dimension does not match encoder in " + dir.string());
  }
  return model;
}

std::optional<std::uint64_t> saved_model_fingerprint(
    const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.txt")) return std::nullopt;
  const auto meta = read_meta(dir / "meta.txt");
  const auto it = meta.find("train_fingerprint");
  if (it == meta.end()) return std::nullopt;
  return std::stoull(it->second, nullptr, 16);
}

}  // namespace empdis
