#include "empdis/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "empdis/error.hpp"
#include "empdis/fingerprint.hpp"

namespace empdis {

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_label(const std::string& cell, const std::string& column,
                   std::size_t row_index, const ScoreRange& range) {
  const std::string text(trim(cell));
  if (text.empty()) {
    raise(ErrorCode::NonNumericLabel,
          "row " + std::to_string(row_index) + ": empty " + column + " cell");
  }
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE ||
      !std::isfinite(value)) {
    raise(ErrorCode::NonNumericLabel, "row " + std::to_string(row_index) +
                                          ": cannot parse " + column +
                                          " value '" + text + "'");
  }
  if (!range.contains(value)) {
    raise(ErrorCode::LabelOutOfRange,
          "row " + std::to_string(row_index) + ": " + column + " value " +
              text + " outside [" + std::to_string(range.lo) + ", " +
              std::to_string(range.hi) + "]");
  }
  return value;
}

std::string format_label(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace

bool Dataset::has_labels(Target t) const {
  if (records.empty()) return false;
  return std::all_of(records.begin(), records.end(),
                     [t](const EssayRecord& r) { return r.gold(t).has_value(); });
}

bool Dataset::has_all_labels() const {
  return has_labels(Target::empathy) && has_labels(Target::distress);
}

std::uint64_t Dataset::fingerprint() const {
  Fingerprint fp;
  fp.update(to_string(split_name));
  fp.update_u64(records.size());
  for (const auto& r : records) {
    fp.update(r.record_id);
    fp.update(r.essay);
  }
  return fp.digest();
}

std::uint64_t Dataset::content_fingerprint() const {
  Fingerprint fp;
  fp.update_u64(fingerprint());
  for (const auto& r : records) {
    for (const auto& [key, value] : r.demographics) {
      fp.update(key);
      fp.update(value);
    }
    fp.update_u64(r.gold_empathy.has_value());
    if (r.gold_empathy) fp.update_double(*r.gold_empathy);
    fp.update_u64(r.gold_distress.has_value());
    if (r.gold_distress) fp.update_double(*r.gold_distress);
  }
  return fp.digest();
}

Dataset parse_essay_table(std::string_view raw_text, Split split_name,
                          const SchemaConfig& schema) {
  schema.score_range.validate();

  Dataset dataset;
  dataset.split_name = split_name;

  // Normalize line endings; both CRLF and LF are accepted.
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= raw_text.size()) {
    std::size_t nl = raw_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw_text.size();
    std::string_view line = raw_text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  if (lines.empty()) {
    raise(ErrorCode::MalformedRow, "input has no header row");
  }

  const std::vector<std::string> header = split_fields(lines[0]);
  dataset.schema = header;

  const auto column_index = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };

  const std::ptrdiff_t id_col = column_index(schema.id_column);
  if (id_col < 0) {
    raise(ErrorCode::MissingColumn,
          "id column '" + schema.id_column + "' not in header");
  }
  const std::ptrdiff_t essay_col = column_index(schema.essay_column);
  if (essay_col < 0) {
    raise(ErrorCode::MissingColumn,
          "essay column '" + schema.essay_column + "' not in header");
  }
  // Label columns are optional: absent from the header means unlabeled split.
  const std::ptrdiff_t empathy_col = column_index(schema.empathy_column);
  const std::ptrdiff_t distress_col = column_index(schema.distress_column);

  std::unordered_set<std::string> seen_ids;
  std::size_t n_outside_band = 0;

  for (std::size_t row = 1; row < lines.size(); ++row) {
    const std::vector<std::string> fields = split_fields(lines[row]);
    if (fields.size() != header.size()) {
      raise(ErrorCode::MalformedRow,
            "row " + std::to_string(row) + ": expected " +
                std::to_string(header.size()) + " fields, got " +
                std::to_string(fields.size()));
    }

    EssayRecord record;
    record.record_id = std::string(trim(fields[static_cast<std::size_t>(id_col)]));
    if (record.record_id.empty()) {
      raise(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": empty id");
    }
    if (!seen_ids.insert(record.record_id).second) {
      raise(ErrorCode::DuplicateId, "row " + std::to_string(row) +
                                        ": duplicate id '" + record.record_id +
                                        "'");
    }

    record.essay = fields[static_cast<std::size_t>(essay_col)];
    if (trim(record.essay).empty()) {
      raise(ErrorCode::MalformedRow,
            "row " + std::to_string(row) + ": empty essay");
    }
    const std::size_t essay_len = record.essay.size();
    if (essay_len < 300 || essay_len > 800) ++n_outside_band;

    if (empathy_col >= 0) {
      record.gold_empathy =
          parse_label(fields[static_cast<std::size_t>(empathy_col)],
                      schema.empathy_column, row, schema.score_range);
    }
    if (distress_col >= 0) {
      record.gold_distress =
          parse_label(fields[static_cast<std::size_t>(distress_col)],
                      schema.distress_column, row, schema.score_range);
    }

    for (std::size_t c = 0; c < header.size(); ++c) {
      const auto sc = static_cast<std::ptrdiff_t>(c);
      if (sc == id_col || sc == essay_col || sc == empathy_col ||
          sc == distress_col) {
        continue;
      }
      record.demographics.emplace_back(header[c], fields[c]);
    }

    dataset.records.push_back(std::move(record));
  }

  if (n_outside_band > 0) {
    std::cerr << "[warn] " << to_string(split_name) << ": " << n_outside_band
              << " essay(s) outside the typical 300-800 character band\n";
  }
  return dataset;
}

Dataset load_essay_file(const std::filesystem::path& path, Split split_name,
                        const SchemaConfig& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::IoError, "cannot open dataset file " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_essay_table(buffer.str(), split_name, schema);
}

std::string serialize_essay_table(const Dataset& dataset,
                                  const SchemaConfig& schema) {
  std::string out;
  for (std::size_t c = 0; c < dataset.schema.size(); ++c) {
    if (c) out += '\t';
    out += dataset.schema[c];
  }
  out += '\n';

  for (const auto& record : dataset.records) {
    std::size_t demo_index = 0;
    for (std::size_t c = 0; c < dataset.schema.size(); ++c) {
      if (c) out += '\t';
      const std::string& column = dataset.schema[c];
      if (column == schema.id_column) {
        out += record.record_id;
      } else if (column == schema.essay_column) {
        out += record.essay;
      } else if (column == schema.empathy_column && record.gold_empathy) {
        out += format_label(*record.gold_empathy);
      } else if (column == schema.distress_column && record.gold_distress) {
        out += format_label(*record.gold_distress);
      } else {
        if (demo_index < record.demographics.size() &&
            record.demographics[demo_index].first == column) {
          out += record.demographics[demo_index].second;
          ++demo_index;
        }
      }
    }
    out += '\n';
  }
  return out;
}

SplitStats split_summary(const Dataset& train, const Dataset& dev,
                         const Dataset& test) {
  SplitStats stats;
  stats.n_train = train.size();
  stats.n_dev = dev.size();
  stats.n_test = test.size();
  stats.train_has_labels = train.has_all_labels();
  stats.dev_has_labels = dev.has_all_labels();
  stats.test_has_labels = test.has_all_labels();
  return stats;
}

std::vector<std::string> render_inputs(const Dataset& dataset,
                                       bool use_demographics) {
  std::vector<std::string> texts;
  texts.reserve(dataset.size());
  for (const auto& record : dataset.records) {
    if (!use_demographics) {
      texts.push_back(record.essay);
      continue;
    }
    std::string text = record.essay;
    for (const auto& [key, value] : record.demographics) {
      text += ' ';
      text += key;
      text += '=';
      text += value;
    }
    texts.push_back(std::move(text));
  }
  return texts;
}

std::vector<Example> to_examples(const Dataset& dataset, Target target,
                                 bool use_demographics) {
  std::vector<std::string> texts = render_inputs(dataset, use_demographics);
  std::vector<Example> examples;
  examples.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto gold = dataset.records[i].gold(target);
    if (!gold) {
      raise(ErrorCode::MissingLabel,
            "record '" + dataset.records[i].record_id + "' has no gold " +
                to_string(target) + " score");
    }
    examples.emplace_back(std::move(texts[i]), *gold);
  }
  return examples;
}

}  // namespace empdis
