#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "empdis/types.hpp"

namespace empdis {

// Column mapping for the tab-separated essay files. The official column
// names are not fixed anywhere, so everything is configurable. Label
// columns may be named even when a given file lacks them; a missing label
// column in the header simply yields records without gold scores.
struct SchemaConfig {
  std::string id_column = "id";
  std::string essay_column = "essay";
  std::string empathy_column = "empathy";
  std::string distress_column = "distress";
  ScoreRange score_range{};

  const std::string& label_column(Target t) const {
    return t == Target::empathy ? empathy_column : distress_column;
  }
};

struct EssayRecord {
  std::string record_id;
  std::string essay;
  // Demographic columns in header order, values kept verbatim (empty cells
  // stay empty strings).
  std::vector<std::pair<std::string, std::string>> demographics;
  std::optional<double> gold_empathy;
  std::optional<double> gold_distress;

  std::optional<double> gold(Target t) const {
    return t == Target::empathy ? gold_empathy : gold_distress;
  }

  bool operator==(const EssayRecord&) const = default;
};

class Dataset {
 public:
  Split split_name = Split::train;
  std::vector<EssayRecord> records;
  std::vector<std::string> schema;  // header columns in file order

  std::size_t size() const { return records.size(); }

  // True when every record carries the target's gold score.
  bool has_labels(Target t) const;
  bool has_all_labels() const;

  // Identity of the inputs: split, ids and essay texts. Deliberately
  // excludes gold labels so prediction alignment does not depend on
  // whether a file ships with labels.
  std::uint64_t fingerprint() const;

  // Full content hash (identity + demographics + labels). Feeds train
  // fingerprints, where the labels matter.
  std::uint64_t content_fingerprint() const;

  bool operator==(const Dataset&) const = default;
};

struct SplitStats {
  std::size_t n_train = 0;
  std::size_t n_dev = 0;
  std::size_t n_test = 0;
  bool train_has_labels = false;
  bool dev_has_labels = false;
  bool test_has_labels = false;
};

// Parses a header-bearing TSV into a Dataset. Rows keep file order. CRLF
// and LF line endings are both accepted; the input must be UTF-8.
// Errors: MissingColumn, MalformedRow, NonNumericLabel, LabelOutOfRange,
// DuplicateId.
Dataset parse_essay_table(std::string_view raw_text, Split split_name,
                          const SchemaConfig& schema);

Dataset load_essay_file(const std::filesystem::path& path, Split split_name,
                        const SchemaConfig& schema);

// Inverse of parse_essay_table for datasets that came from the given
// schema; parse(serialize(d)) == d field for field.
std::string serialize_essay_table(const Dataset& dataset,
                                  const SchemaConfig& schema);

SplitStats split_summary(const Dataset& train, const Dataset& dev,
                         const Dataset& test);

// The text fed to encoders: the raw essay, or essay plus rendered
// demographic attributes when use_demographics is on.
std::vector<std::string> render_inputs(const Dataset& dataset,
                                       bool use_demographics);

using Example = std::pair<std::string, double>;

// One (text, label) pair per record, file order preserved.
// Errors: MissingLabel when any record lacks the target's gold score.
std::vector<Example> to_examples(const Dataset& dataset, Target target,
                                 bool use_demographics = false);

}  // namespace empdis
