#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "empdis/types.hpp"

namespace empdis {

enum class Pooling { cls_token, mean_tokens, native_sentence };

const char* to_string(Pooling p);
Pooling pooling_from_string(std::string_view s);

struct EncoderSpec {
  std::string name;
  Pooling pooling = Pooling::mean_tokens;
  int max_tokens = 256;
  bool frozen = false;

  // Enforces max_tokens >= 8 and native_sentence only on backbones that
  // actually expose a sentence vector.
  void validate() const;

  std::uint64_t fingerprint() const;
};

// Reduces a token-embedding matrix (one row per token) to a single vector.
//   cls_token       -> first row
//   mean_tokens     -> arithmetic row mean, fixed left-to-right summation
//   native_sentence -> passthrough of the backbone's sentence vector,
//                      which arrives as a single-row matrix
// Errors: EmptySequence on zero rows.
Eigen::VectorXd pool(const Eigen::MatrixXd& token_embeddings, Pooling strategy);

class Encoder {
 public:
  virtual ~Encoder() = default;

  const EncoderSpec& spec() const { return spec_; }
  virtual int dim() const = 0;

  // Raw per-token rows before pooling. Backbones whose native output is a
  // sentence vector return it as a 1 x dim matrix.
  virtual Eigen::MatrixXd token_matrix(const std::string& text) const = 0;

  Eigen::VectorXd embed(const std::string& text) const;

  // Row i is the pooled embedding of texts[i]. Deterministic for fixed
  // weights and inputs; texts beyond max_tokens are truncated.
  Eigen::MatrixXd encode(const std::vector<std::string>& texts) const;

  // Deep copy; used for best-epoch checkpointing of fine-tuned weights.
  virtual std::unique_ptr<Encoder> clone() const = 0;

  // Fine-tuning hooks. Backbones that cannot take gradients report
  // trainable() == false and training touches only the regression head.
  virtual bool trainable() const { return false; }
  virtual void apply_embedding_gradient(const std::string& /*text*/,
                                        const Eigen::VectorXd& /*grad*/,
                                        double /*step*/) {}

  virtual std::uint64_t weights_fingerprint() const = 0;

  // Persists backbone weights when they were modified during training.
  // Returns false when there is nothing to save (closed-form or frozen).
  virtual bool save_weights(const std::filesystem::path& file) const {
    (void)file;
    return false;
  }

 protected:
  explicit Encoder(EncoderSpec spec) : spec_(std::move(spec)) {}
  EncoderSpec spec_;
};

// Registry ----------------------------------------------------------------

// Names understood by make_encoder: the four pretrained backbones plus the
// closed-form test encoders "toy" and "toy-alt". Pretrained backbones load
// an exported embedding table from the cache directory (environment
// variable EMPDIS_ENCODER_CACHE, default ./encoder_cache).
std::vector<std::string> registered_encoders();
bool encoder_known(std::string_view name);
bool encoder_has_native_sentence(std::string_view name);

// Registry defaults for a name (pooling, max_tokens). Errors: UnknownEncoder.
EncoderSpec default_encoder_spec(std::string_view name);

std::filesystem::path encoder_cache_dir();
std::filesystem::path encoder_weights_path(std::string_view name);

// Instantiates the backbone for a spec. weights_override points at a saved
// table from a model artifact and takes precedence over the cache dir.
// Errors: UnknownEncoder, EncoderLoadFailure.
std::unique_ptr<Encoder> make_encoder(
    const EncoderSpec& spec,
    const std::optional<std::filesystem::path>& weights_override = {});

// Convenience one-shot encode.
Eigen::MatrixXd encode(const EncoderSpec& spec,
                       const std::vector<std::string>& texts);

// Toy encoder closed form, exposed for tests: bucketed counts of the
// token's cyclic character n-grams (n = 1..3), before normalization. The
// cyclic window makes counts of a repeated string scale linearly, e.g.
// counts("aa") == 2 * counts("a").
inline constexpr int kToyDim = 64;
std::array<double, kToyDim> toy_ngram_counts(std::string_view token,
                                             std::uint64_t salt);

// Lowercased whitespace tokens, truncated to max_tokens.
std::vector<std::string> tokenize(std::string_view text, int max_tokens);

}  // namespace empdis
