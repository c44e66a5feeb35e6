#include "empdis/encoder.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "empdis/error.hpp"
#include "empdis/fingerprint.hpp"

namespace empdis {

namespace {

constexpr const char* kCacheEnvVar = "EMPDIS_ENCODER_CACHE";

struct BackboneInfo {
  const char* name;
  bool native_sentence;
  Pooling default_pooling;
  bool toy;
  std::uint64_t toy_salt;
};

// The four pretrained backbones plus the closed-form test encoders. The
// pretrained entries load exported embedding tables; "toy-alt" is a second
// toy backbone with a different hash salt so multi-model ensembles can be
// exercised without downloads.
const BackboneInfo kBackbones[] = {
    {"toy", false, Pooling::mean_tokens, true, 0x0ULL},
    {"toy-alt", false, Pooling::mean_tokens, true, 0x9e3779b97f4a7c15ULL},
    {"roberta-base", false, Pooling::mean_tokens, false, 0},
    {"cardiffnlp/twitter-roberta-base-emotion", false, Pooling::mean_tokens,
     false, 0},
    {"cardiffnlp/twitter-roberta-base-sentiment-latest", false,
     Pooling::mean_tokens, false, 0},
    {"princeton-nlp/unsup-simcse-roberta-base", true, Pooling::native_sentence,
     false, 0},
};

const BackboneInfo* find_backbone(std::string_view name) {
  for (const auto& info : kBackbones) {
    if (name == info.name) return &info;
  }
  return nullptr;
}

std::uint64_t fnv1a(const unsigned char* data, std::size_t len,
                    std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sanitize_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) out += (c == '/' ? '_' : c);
  return out;
}

Eigen::VectorXd normalized_or_zero(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm == 0.0) return v;
  return v / norm;
}

}  // namespace

const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::cls_token: return "cls_token";
    case Pooling::mean_tokens: return "mean_tokens";
    case Pooling::native_sentence: return "native_sentence";
  }
  return "?";
}

Pooling pooling_from_string(std::string_view s) {
  if (s == "cls_token") return Pooling::cls_token;
  if (s == "mean_tokens") return Pooling::mean_tokens;
  if (s == "native_sentence") return Pooling::native_sentence;
  raise(ErrorCode::ConfigInvalid, "unknown pooling '" + std::string(s) + "'");
}

void EncoderSpec::validate() const {
  const BackboneInfo* info = find_backbone(name);
  if (info == nullptr) {
    raise(ErrorCode::UnknownEncoder, "'" + name + "' is not registered");
  }
  if (max_tokens < 8) {
    raise(ErrorCode::ConfigInvalid,
          "encoder '" + name + "': max_tokens must be >= 8");
  }
  if (pooling == Pooling::native_sentence && !info->native_sentence) {
    raise(ErrorCode::ConfigInvalid,
          "encoder '" + name + "' does not expose a native sentence vector");
  }
}

std::uint64_t EncoderSpec::fingerprint() const {
  Fingerprint fp;
  fp.update(name);
  fp.update(to_string(pooling));
  fp.update_i64(max_tokens);
  fp.update_u64(frozen ? 1 : 0);
  return fp.digest();
}

Eigen::VectorXd pool(const Eigen::MatrixXd& token_embeddings,
                     Pooling strategy) {
  if (token_embeddings.rows() == 0) {
    raise(ErrorCode::EmptySequence, "pooling over zero token rows");
  }
  switch (strategy) {
    case Pooling::cls_token:
      return token_embeddings.row(0);
    case Pooling::mean_tokens: {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(token_embeddings.cols());
      for (Eigen::Index r = 0; r < token_embeddings.rows(); ++r) {
        sum += token_embeddings.row(r).transpose();
      }
      return sum / static_cast<double>(token_embeddings.rows());
    }
    case Pooling::native_sentence:
      if (token_embeddings.rows() != 1) {
        raise(ErrorCode::ShapeMismatch,
              "native_sentence expects the backbone's single sentence vector");
      }
      return token_embeddings.row(0);
  }
  raise(ErrorCode::ConfigInvalid, "invalid pooling strategy");
}

std::vector<std::string> tokenize(std::string_view text, int max_tokens) {
  std::vector<std::string> tokens;
  std::string current;
  const auto flush = [&] {
    if (current.empty()) return;
    // strip surrounding ASCII punctuation; keeps in-word characters
    std::size_t begin = 0, end = current.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(current[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(current[end - 1]))) --end;
    if (end > begin) tokens.push_back(current.substr(begin, end - begin));
    current.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
      if (tokens.size() >= static_cast<std::size_t>(max_tokens)) return tokens;
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  if (tokens.size() > static_cast<std::size_t>(max_tokens)) {
    tokens.resize(static_cast<std::size_t>(max_tokens));
  }
  return tokens;
}

std::array<double, kToyDim> toy_ngram_counts(std::string_view token,
                                             std::uint64_t salt) {
  std::array<double, kToyDim> counts{};
  if (token.empty()) return counts;
  const std::size_t len = token.size();
  unsigned char gram[3];
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        gram[j] = static_cast<unsigned char>(token[(i + j) % len]);
      }
      const std::uint64_t h = fnv1a(gram, n, salt + 0x517cc1b727220a95ULL * n);
      counts[h % kToyDim] += 1.0;
    }
  }
  return counts;
}

Eigen::VectorXd Encoder::embed(const std::string& text) const {
  return pool(token_matrix(text), spec_.pooling);
}

Eigen::MatrixXd Encoder::encode(const std::vector<std::string>& texts) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = embed(texts[i]).transpose();
  }
  return out;
}

// Toy encoder ---------------------------------------------------------------

namespace {

class ToyEncoder final : public Encoder {
 public:
  ToyEncoder(EncoderSpec spec, std::uint64_t salt)
      : Encoder(std::move(spec)), salt_(salt) {}

  int dim() const override { return kToyDim; }

  Eigen::MatrixXd token_matrix(const std::string& text) const override {
    const std::vector<std::string> tokens = tokenize(text, spec_.max_tokens);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(tokens.size()), kToyDim);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const auto counts = toy_ngram_counts(tokens[t], salt_);
      Eigen::VectorXd v(kToyDim);
      for (int d = 0; d < kToyDim; ++d) v[d] = counts[static_cast<std::size_t>(d)];
      rows.row(static_cast<Eigen::Index>(t)) = normalized_or_zero(v).transpose();
    }
    return rows;
  }

  std::uint64_t weights_fingerprint() const override {
    Fingerprint fp;
    fp.update("toy");
    fp.update_u64(salt_);
    return fp.digest();
  }

  std::unique_ptr<Encoder> clone() const override {
    return std::make_unique<ToyEncoder>(*this);
  }

 private:
  std::uint64_t salt_;
};

// Embedding-table backbone ---------------------------------------------------

// Exported token-embedding table in word2vec text format: a "count dim"
// header line, then one "token v1 .. vD" row per vocabulary entry. This is
// the on-disk shape expected for the pretrained backbones (export the
// model's input embeddings, or any distilled table, to this format).
class TableEncoder final : public Encoder {
 public:
  TableEncoder(EncoderSpec spec, const std::filesystem::path& file)
      : Encoder(std::move(spec)) {
    load(file);
  }

  int dim() const override { return static_cast<int>(table_.cols()); }

  Eigen::MatrixXd token_matrix(const std::string& text) const override {
    const std::vector<int> ids = lookup(text);
    if (spec_.pooling == Pooling::native_sentence) {
      // The backbone's sentence vector: normalized mean over its token rows.
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(table_.cols());
      for (int id : ids) mean += table_.row(id).transpose();
      if (!ids.empty()) mean /= static_cast<double>(ids.size());
      Eigen::MatrixXd out(1, table_.cols());
      out.row(0) = normalized_or_zero(mean).transpose();
      return out;
    }
    if (ids.empty()) {
      // Every token out of vocabulary: a single zero row keeps encode total.
      return Eigen::MatrixXd::Zero(1, table_.cols());
    }
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(ids.size()), table_.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = table_.row(ids[i]);
    }
    return rows;
  }

  bool trainable() const override { return !spec_.frozen; }

  void apply_embedding_gradient(const std::string& text,
                                const Eigen::VectorXd& grad,
                                double step) override {
    const std::vector<int> ids = lookup(text);
    if (ids.empty()) return;
    const double inv_n = 1.0 / static_cast<double>(ids.size());
    switch (spec_.pooling) {
      case Pooling::cls_token:
        table_.row(ids[0]) -= step * grad.transpose();
        break;
      case Pooling::mean_tokens:
        for (int id : ids) table_.row(id) -= step * inv_n * grad.transpose();
        break;
      case Pooling::native_sentence: {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(table_.cols());
        for (int id : ids) mean += table_.row(id).transpose();
        mean *= inv_n;
        const double norm = mean.norm();
        if (norm == 0.0) return;
        const Eigen::VectorXd unit = mean / norm;
        // gradient through v = m / |m|
        const Eigen::VectorXd grad_mean =
            (grad - unit * unit.dot(grad)) / norm;
        for (int id : ids) {
          table_.row(id) -= step * inv_n * grad_mean.transpose();
        }
        break;
      }
    }
    dirty_ = true;
  }

  std::uint64_t weights_fingerprint() const override {
    Fingerprint fp;
    fp.update_u64(static_cast<std::uint64_t>(table_.rows()));
    fp.update_u64(static_cast<std::uint64_t>(table_.cols()));
    for (const auto& token : vocab_) fp.update(token);
    fp.update(table_.data(), sizeof(double) * static_cast<std::size_t>(table_.size()));
    return fp.digest();
  }

  bool save_weights(const std::filesystem::path& file) const override {
    if (!dirty_) return false;
    std::ofstream out(file, std::ios::binary);
    if (!out) {
      raise(ErrorCode::IoError, "cannot write encoder weights " + file.string());
    }
    out << table_.rows() << ' ' << table_.cols() << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < table_.rows(); ++r) {
      out << vocab_[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < table_.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", table_(r, c));
        out << ' ' << buf;
      }
      out << '\n';
    }
    return true;
  }

  std::unique_ptr<Encoder> clone() const override {
    return std::unique_ptr<Encoder>(new TableEncoder(*this));
  }

 private:
  TableEncoder(const TableEncoder&) = default;

  void load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      raise(ErrorCode::EncoderLoadFailure,
            "weights for '" + spec_.name + "' not found at " + file.string());
    }
    std::size_t count = 0, dim = 0;
    if (!(in >> count >> dim) || count == 0 || dim == 0) {
      raise(ErrorCode::EncoderLoadFailure,
            "bad header in weights file " + file.string());
    }
    vocab_.resize(count);
    table_.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < count; ++r) {
      if (!(in >> vocab_[r])) {
        raise(ErrorCode::EncoderLoadFailure,
              "truncated weights file " + file.string());
      }
      for (std::size_t c = 0; c < dim; ++c) {
        double v = 0.0;
        if (!(in >> v)) {
          raise(ErrorCode::EncoderLoadFailure,
                "truncated weights file " + file.string());
        }
        table_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      }
      index_.emplace(vocab_[r], static_cast<int>(r));
    }
  }

  std::vector<int> lookup(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& token : tokenize(text, spec_.max_tokens)) {
      const auto it = index_.find(token);
      if (it != index_.end()) ids.push_back(it->second);
    }
    return ids;
  }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  Eigen::MatrixXd table_;
  bool dirty_ = false;
};

}  // namespace

// Registry -------------------------------------------------------------------

std::vector<std::string> registered_encoders() {
  std::vector<std::string> names;
  for (const auto& info : kBackbones) names.emplace_back(info.name);
  return names;
}

bool encoder_known(std::string_view name) {
  return find_backbone(name) != nullptr;
}

bool encoder_has_native_sentence(std::string_view name) {
  const BackboneInfo* info = find_backbone(name);
  return info != nullptr && info->native_sentence;
}

EncoderSpec default_encoder_spec(std::string_view name) {
  const BackboneInfo* info = find_backbone(name);
  if (info == nullptr) {
    raise(ErrorCode::UnknownEncoder, "'" + std::string(name) + "' is not registered");
  }
  EncoderSpec spec;
  spec.name = info->name;
  spec.pooling = info->default_pooling;
  return spec;
}

std::filesystem::path encoder_cache_dir() {
  if (const char* env = std::getenv(kCacheEnvVar); env != nullptr && *env) {
    return env;
  }
  return "encoder_cache";
}

std::filesystem::path encoder_weights_path(std::string_view name) {
  return encoder_cache_dir() / (sanitize_name(name) + ".vec");
}

std::unique_ptr<Encoder> make_encoder(
    const EncoderSpec& spec,
    const std::optional<std::filesystem::path>& weights_override) {
  spec.validate();
  const BackboneInfo* info = find_backbone(spec.name);
  if (info->toy) {
    return std::make_unique<ToyEncoder>(spec, info->toy_salt);
  }
  const std::filesystem::path file =
      weights_override ? *weights_override : encoder_weights_path(spec.name);
  return std::make_unique<TableEncoder>(spec, file);
}

Eigen::MatrixXd encode(const EncoderSpec& spec,
                       const std::vector<std::string>& texts) {
  return make_encoder(spec)->encode(texts);
}

}  // namespace empdis
