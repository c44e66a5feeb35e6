#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "empdis/encoder.hpp"
#include "empdis/error.hpp"
#include "support/testutil.hpp"

using namespace empdis;

namespace {

// Independent restatement of the toy closed form: counts of cyclic
// character n-grams (n = 1..3) hashed into 64 buckets. Kept separate from
// the library so the two computations can disagree.
std::array<double, 64> reference_toy_counts(const std::string& token,
                                            std::uint64_t salt) {
  std::array<double, 64> counts{};
  const std::size_t len = token.size();
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i < len; ++i) {
      std::string gram;
      for (std::size_t j = 0; j < n; ++j) gram += token[(i + j) % len];
      std::uint64_t h = 0xcbf29ce484222325ULL ^ (salt + 0x517cc1b727220a95ULL * n);
      for (unsigned char c : gram) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      counts[h % 64] += 1.0;
    }
  }
  return counts;
}

std::string write_tiny_table(const testutil::TempDir& dir,
                             const std::string& filename) {
  // 4 tokens, dimension 3
  const std::string content =
      "4 3\n"
      "sun 1 0 0\n"
      "rain 0 1 0\n"
      "wind 0 0 1\n"
      "calm 0.5 0.5 0\n";
  const auto path = dir.path() / filename;
  testutil::write_text(path, content);
  return path.string();
}

}  // namespace

TEST_CASE("pool: single row passes through under every strategy") {
  Eigen::MatrixXd one(1, 3);
  one << 1.5, -2.0, 0.25;
  for (const Pooling p :
       {Pooling::cls_token, Pooling::mean_tokens, Pooling::native_sentence}) {
    const Eigen::VectorXd v = pool(one, p);
    CHECK(v == one.row(0).transpose());
  }
}

TEST_CASE("pool: mean of two unit rows") {
  Eigen::MatrixXd rows(2, 2);
  rows << 1, 0, 0, 1;
  const Eigen::VectorXd v = pool(rows, Pooling::mean_tokens);
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(0.5));
}

TEST_CASE("pool: mean matches independently computed column means") {
  testutil::Rng rng(13);
  Eigen::MatrixXd rows(5, 8);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 8; ++c) rows(r, c) = rng.uniform(-3.0, 3.0);
  }
  const Eigen::VectorXd v = pool(rows, Pooling::mean_tokens);
  for (int c = 0; c < 8; ++c) {
    double sum = 0.0;
    for (int r = 0; r < 5; ++r) sum += rows(r, c);
    CHECK(std::fabs(v[c] - sum / 5.0) < 1e-12);
  }
}

TEST_CASE("pool: constant rows mean-pool to that row exactly") {
  Eigen::MatrixXd rows(4, 3);
  for (int r = 0; r < 4; ++r) rows.row(r) << 0.3, -1.7, 2.2;
  const Eigen::VectorXd v = pool(rows, Pooling::mean_tokens);
  CHECK(v[0] == 0.3);
  CHECK(v[1] == -1.7);
  CHECK(v[2] == 2.2);
}

TEST_CASE("pool error cases") {
  Eigen::MatrixXd empty(0, 4);
  CHECK_THROWS_AS(pool(empty, Pooling::mean_tokens), Error);

  Eigen::MatrixXd two(2, 2);
  two << 1, 2, 3, 4;
  CHECK_THROWS_AS(pool(two, Pooling::native_sentence), Error);
  CHECK(pool(two, Pooling::cls_token) == two.row(0).transpose());
}

TEST_CASE("toy counts match the independent closed form") {
  for (const std::string token : {"a", "aa", "sad", "window", "abcabc"}) {
    for (const std::uint64_t salt : {0ULL, 0x9e3779b97f4a7c15ULL}) {
      const auto expected = reference_toy_counts(token, salt);
      const auto got = toy_ngram_counts(token, salt);
      for (std::size_t d = 0; d < 64; ++d) {
        INFO(token << " bucket " << d);
        CHECK(got[d] == expected[d]);
      }
    }
  }
}

TEST_CASE("toy counts of a repeated token scale linearly") {
  const auto once = toy_ngram_counts("a", 0);
  const auto twice = toy_ngram_counts("aa", 0);
  for (std::size_t d = 0; d < 64; ++d) CHECK(twice[d] == 2.0 * once[d]);

  const auto base = toy_ngram_counts("abc", 0);
  const auto tripled = toy_ngram_counts("abcabcabc", 0);
  for (std::size_t d = 0; d < 64; ++d) CHECK(tripled[d] == 3.0 * base[d]);
}

TEST_CASE("toy embedding of 'aa' equals the embedding of 'a' after normalization") {
  const EncoderSpec spec = default_encoder_spec("toy");
  const auto encoder = make_encoder(spec);
  const Eigen::VectorXd a = encoder->embed("a");
  const Eigen::VectorXd aa = encoder->embed("aa");
  REQUIRE(a.size() == aa.size());
  for (Eigen::Index d = 0; d < a.size(); ++d) CHECK(a[d] == aa[d]);
}

TEST_CASE("encode is deterministic and rowwise equal for identical texts") {
  const EncoderSpec spec = default_encoder_spec("toy");
  const std::vector<std::string> texts = {"the sad river", "bright window",
                                          "the sad river"};
  const Eigen::MatrixXd first = encode(spec, texts);
  const Eigen::MatrixXd second = encode(spec, texts);
  CHECK(first == second);
  CHECK(first.row(0) == first.row(2));
  CHECK(first.row(0) != first.row(1));
}

TEST_CASE("the two toy backbones embed the same text differently") {
  const Eigen::MatrixXd toy = encode(default_encoder_spec("toy"), {"sad river"});
  const Eigen::MatrixXd alt = encode(default_encoder_spec("toy-alt"), {"sad river"});
  CHECK(toy != alt);
}

TEST_CASE("mean pooling on a single-token text equals that token's row") {
  const auto encoder = make_encoder(default_encoder_spec("toy"));
  const Eigen::MatrixXd rows = encoder->token_matrix("river");
  REQUIRE(rows.rows() == 1);
  CHECK(encoder->embed("river") == rows.row(0).transpose());
}

TEST_CASE("texts beyond max_tokens are truncated") {
  EncoderSpec spec = default_encoder_spec("toy");
  spec.max_tokens = 8;
  const auto encoder = make_encoder(spec);

  std::string head, full;
  for (int i = 0; i < 8; ++i) head += "word" + std::to_string(i) + " ";
  full = head;
  for (int i = 8; i < 30; ++i) full += "extra" + std::to_string(i) + " ";

  CHECK(encoder->embed(full) == encoder->embed(head));
}

TEST_CASE("spec validation") {
  EncoderSpec spec = default_encoder_spec("toy");

  SUBCASE("unknown name") {
    spec.name = "bert-large";
    CHECK_THROWS_AS(spec.validate(), Error);
    try {
      spec.validate();
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownEncoder);
    }
  }
  SUBCASE("max_tokens floor") {
    spec.max_tokens = 4;
    CHECK_THROWS_AS(spec.validate(), Error);
  }
  SUBCASE("native_sentence restricted to sentence backbones") {
    spec.pooling = Pooling::native_sentence;
    CHECK_THROWS_AS(spec.validate(), Error);
    CHECK(encoder_has_native_sentence("princeton-nlp/unsup-simcse-roberta-base"));
    CHECK_FALSE(encoder_has_native_sentence("toy"));
    const EncoderSpec simcse =
        default_encoder_spec("princeton-nlp/unsup-simcse-roberta-base");
    CHECK(simcse.pooling == Pooling::native_sentence);
    CHECK_NOTHROW(simcse.validate());
  }
}

TEST_CASE("registry knows the four pretrained backbones plus the toys") {
  const auto names = registered_encoders();
  CHECK(names.size() == 6);
  for (const char* name :
       {"toy", "toy-alt", "roberta-base",
        "cardiffnlp/twitter-roberta-base-emotion",
        "cardiffnlp/twitter-roberta-base-sentiment-latest",
        "princeton-nlp/unsup-simcse-roberta-base"}) {
    CHECK(encoder_known(name));
  }
  CHECK_FALSE(encoder_known("gpt2"));
}

TEST_CASE("pretrained backbones fail cleanly without cached weights") {
  ::setenv("EMPDIS_ENCODER_CACHE", "/nonexistent/encoder/cache", 1);
  try {
    make_encoder(default_encoder_spec("roberta-base"));
    FAIL("expected EncoderLoadFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EncoderLoadFailure);
  }
  ::unsetenv("EMPDIS_ENCODER_CACHE");
}

TEST_CASE("table encoder: lookup, pooling and out-of-vocabulary behavior") {
  testutil::TempDir dir("table_encoder");
  const std::string table = write_tiny_table(dir, "tiny.vec");

  EncoderSpec spec = default_encoder_spec("roberta-base");
  const auto encoder = make_encoder(spec, std::filesystem::path(table));
  CHECK(encoder->dim() == 3);

  SUBCASE("mean pooling averages the in-vocabulary rows") {
    const Eigen::VectorXd v = encoder->embed("sun rain");
    CHECK(v[0] == doctest::Approx(0.5));
    CHECK(v[1] == doctest::Approx(0.5));
    CHECK(v[2] == doctest::Approx(0.0));
  }
  SUBCASE("unknown tokens are skipped") {
    CHECK(encoder->embed("sun zebra") == encoder->embed("sun"));
  }
  SUBCASE("all-unknown text embeds to zero") {
    const Eigen::VectorXd v = encoder->embed("zebra xylophone");
    CHECK(v.norm() == 0.0);
  }
  SUBCASE("cls pooling takes the first in-vocabulary row") {
    EncoderSpec cls = spec;
    cls.pooling = Pooling::cls_token;
    const auto cls_encoder = make_encoder(cls, std::filesystem::path(table));
    const Eigen::VectorXd v = cls_encoder->embed("rain sun");
    CHECK(v[1] == doctest::Approx(1.0));
  }
  SUBCASE("punctuation around tokens is stripped") {
    CHECK(encoder->embed("Sun, rain!") == encoder->embed("sun rain"));
  }
}

TEST_CASE("native sentence vector is the normalized token mean") {
  testutil::TempDir dir("table_native");
  const std::string table = write_tiny_table(dir, "tiny.vec");

  EncoderSpec spec = default_encoder_spec("princeton-nlp/unsup-simcse-roberta-base");
  const auto encoder = make_encoder(spec, std::filesystem::path(table));
  const Eigen::MatrixXd rows = encoder->token_matrix("sun rain");
  REQUIRE(rows.rows() == 1);
  const Eigen::VectorXd v = encoder->embed("sun rain");
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(v[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("fine-tune gradients shift the embedding as expected") {
  testutil::TempDir dir("table_grad");
  const std::string table = write_tiny_table(dir, "tiny.vec");

  EncoderSpec spec = default_encoder_spec("roberta-base");
  spec.frozen = false;
  const auto encoder = make_encoder(spec, std::filesystem::path(table));
  CHECK(encoder->trainable());

  const Eigen::VectorXd before = encoder->embed("sun rain");
  Eigen::VectorXd grad(3);
  grad << 1.0, -2.0, 0.5;
  encoder->apply_embedding_gradient("sun rain", grad, 0.1);
  const Eigen::VectorXd after = encoder->embed("sun rain");
  // two distinct tokens: the pooled mean moves by -step * grad / n_tokens
  for (int d = 0; d < 3; ++d) {
    CHECK(after[d] == doctest::Approx(before[d] - 0.1 * grad[d] / 2.0).epsilon(1e-12));
  }

  SUBCASE("modified tables persist and reload") {
    const auto saved = dir.path() / "tuned.vec";
    CHECK(encoder->save_weights(saved));
    const auto reloaded = make_encoder(spec, saved);
    CHECK(reloaded->embed("sun rain") == encoder->embed("sun rain"));
    CHECK(reloaded->weights_fingerprint() == encoder->weights_fingerprint());
  }

  SUBCASE("frozen instances refuse to be trainable") {
    EncoderSpec frozen = spec;
    frozen.frozen = true;
    const auto frozen_encoder = make_encoder(frozen, std::filesystem::path(table));
    CHECK_FALSE(frozen_encoder->trainable());
    CHECK_FALSE(frozen_encoder->save_weights(dir.path() / "never.vec"));
  }
}
