#include "empdis/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "empdis/error.hpp"
#include "empdis/fingerprint.hpp"

namespace empdis {

namespace {

using nlohmann::json;

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) out += (c == '/' ? '_' : c);
  return out;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      raise(ErrorCode::ConfigInvalid,
            "unknown key '" + key + "' in " + where);
    }
  }
}

double number_at(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.at(key).is_number()) {
    raise(ErrorCode::ConfigInvalid, where + "." + key + " must be a number");
  }
  return obj.at(key).get<double>();
}

std::string string_at(const json& obj, const std::string& key,
                      const std::string& where) {
  if (!obj.at(key).is_string()) {
    raise(ErrorCode::ConfigInvalid, where + "." + key + " must be a string");
  }
  return obj.at(key).get<std::string>();
}

EncoderSpec parse_encoder_entry(const json& entry, std::size_t index) {
  const std::string where = "encoders[" + std::to_string(index) + "]";
  if (entry.is_string()) {
    return default_encoder_spec(entry.get<std::string>());
  }
  if (!entry.is_object()) {
    raise(ErrorCode::ConfigInvalid, where + " must be a name or an object");
  }
  reject_unknown_keys(entry, {"name", "pooling", "max_tokens", "frozen"}, where);
  if (!entry.contains("name")) {
    raise(ErrorCode::ConfigInvalid, where + " lacks 'name'");
  }
  EncoderSpec spec = default_encoder_spec(string_at(entry, "name", where));
  if (entry.contains("pooling")) {
    spec.pooling = pooling_from_string(string_at(entry, "pooling", where));
  }
  if (entry.contains("max_tokens")) {
    spec.max_tokens = static_cast<int>(number_at(entry, "max_tokens", where));
  }
  if (entry.contains("frozen")) {
    if (!entry.at("frozen").is_boolean()) {
      raise(ErrorCode::ConfigInvalid, where + ".frozen must be a boolean");
    }
    spec.frozen = entry.at("frozen").get<bool>();
  }
  return spec;
}

CombinerKind parse_combiner_entry(const json& entry, std::size_t index) {
  const std::string where = "combiners[" + std::to_string(index) + "]";
  CombinerKind kind;
  if (entry.is_string()) {
    kind.kind = combiner_kind_from_string(entry.get<std::string>());
    return kind;
  }
  if (!entry.is_object()) {
    raise(ErrorCode::ConfigInvalid, where + " must be a kind name or an object");
  }
  reject_unknown_keys(entry, {"kind", "hyper"}, where);
  if (!entry.contains("kind")) {
    raise(ErrorCode::ConfigInvalid, where + " lacks 'kind'");
  }
  kind.kind = combiner_kind_from_string(string_at(entry, "kind", where));
  if (entry.contains("hyper")) {
    if (!entry.at("hyper").is_object()) {
      raise(ErrorCode::ConfigInvalid, where + ".hyper must be an object");
    }
    for (const auto& [key, value] : entry.at("hyper").items()) {
      if (!value.is_number()) {
        raise(ErrorCode::ConfigInvalid,
              where + ".hyper." + key + " must be a number");
      }
      kind.hyper[key] = value.get<double>();
    }
  }
  kind.validate();
  return kind;
}

std::unordered_map<std::string, std::string> read_meta_file(
    const std::filesystem::path& file) {
  std::unordered_map<std::string, std::string> meta;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

std::vector<double> gold_column(const Dataset& dataset, Target target) {
  std::vector<double> gold;
  gold.reserve(dataset.size());
  for (const auto& record : dataset.records) {
    const auto value = record.gold(target);
    if (!value) {
      raise(ErrorCode::MissingLabel, "record '" + record.record_id +
                                         "' has no gold " + to_string(target) +
                                         " score");
    }
    gold.push_back(*value);
  }
  return gold;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  score_range.validate();
  train.validate();
  if (encoders.empty()) {
    raise(ErrorCode::ConfigInvalid, "at least one encoder is required");
  }
  std::set<std::string> names;
  for (const auto& spec : encoders) {
    spec.validate();
    if (!names.insert(spec.name).second) {
      raise(ErrorCode::ConfigInvalid,
            "duplicate encoder entry '" + spec.name + "'");
    }
  }
  std::set<std::string> kinds;
  for (const auto& kind : combiners) {
    kind.validate();
    if (!kinds.insert(to_string(kind.kind)).second) {
      raise(ErrorCode::ConfigInvalid,
            std::string("duplicate combiner entry '") + to_string(kind.kind) + "'");
    }
  }
  if (run_dir.empty()) {
    raise(ErrorCode::ConfigInvalid, "run_dir must not be empty");
  }
}

std::filesystem::path RunConfig::model_dir(const EncoderSpec& spec,
                                           Target t) const {
  return models_dir() / (sanitize(spec.name) + "__" + to_string(t));
}

std::filesystem::path RunConfig::prediction_cache_path(const EncoderSpec& spec,
                                                       Split s, Target t) const {
  return predictions_dir() / (sanitize(spec.name) + "__" +
                              std::string(to_string(s)) + "__" + to_string(t) +
                              ".tsv");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorCode::ConfigInvalid, "cannot open config file " + path.string());
  }
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorCode::ConfigInvalid,
          "config is not valid JSON: " + std::string(e.what()));
  }
  if (!root.is_object()) {
    raise(ErrorCode::ConfigInvalid, "config root must be an object");
  }

  reject_unknown_keys(root,
                      {"data", "schema", "encoders", "train", "combiners",
                       "score_range", "seed", "run_dir", "use_demographics"},
                      "config");

  const std::filesystem::path base =
      path.has_parent_path() ? path.parent_path() : ".";
  const auto resolve = [&base](const std::string& p) {
    const std::filesystem::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
  };

  RunConfig config;

  if (!root.contains("data") || !root.at("data").is_object()) {
    raise(ErrorCode::ConfigInvalid, "config lacks a 'data' object");
  }
  const json& data = root.at("data");
  reject_unknown_keys(data, {"train", "dev", "test"}, "data");
  for (const char* key : {"train", "dev", "test"}) {
    if (!data.contains(key)) {
      raise(ErrorCode::ConfigInvalid,
            std::string("data.") + key + " path is required");
    }
  }
  config.train_path = resolve(string_at(data, "train", "data"));
  config.dev_path = resolve(string_at(data, "dev", "data"));
  config.test_path = resolve(string_at(data, "test", "data"));

  if (root.contains("score_range")) {
    const json& range = root.at("score_range");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() ||
        !range[1].is_number()) {
      raise(ErrorCode::ConfigInvalid, "score_range must be [lo, hi]");
    }
    config.score_range.lo = range[0].get<double>();
    config.score_range.hi = range[1].get<double>();
  }

  if (root.contains("schema")) {
    const json& schema = root.at("schema");
    if (!schema.is_object()) {
      raise(ErrorCode::ConfigInvalid, "schema must be an object");
    }
    reject_unknown_keys(schema, {"id", "essay", "empathy", "distress"}, "schema");
    if (schema.contains("id")) config.schema.id_column = string_at(schema, "id", "schema");
    if (schema.contains("essay")) config.schema.essay_column = string_at(schema, "essay", "schema");
    if (schema.contains("empathy")) config.schema.empathy_column = string_at(schema, "empathy", "schema");
    if (schema.contains("distress")) config.schema.distress_column = string_at(schema, "distress", "schema");
  }
  config.schema.score_range = config.score_range;

  if (root.contains("seed")) {
    if (!root.at("seed").is_number_integer()) {
      raise(ErrorCode::ConfigInvalid, "seed must be an integer");
    }
    config.seed = root.at("seed").get<std::uint64_t>();
  }
  config.train.seed = config.seed;

  if (!root.contains("encoders") || !root.at("encoders").is_array()) {
    raise(ErrorCode::ConfigInvalid, "config lacks an 'encoders' array");
  }
  const json& encoders = root.at("encoders");
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    config.encoders.push_back(parse_encoder_entry(encoders[i], i));
  }

  if (root.contains("train")) {
    const json& train = root.at("train");
    if (!train.is_object()) {
      raise(ErrorCode::ConfigInvalid, "train must be an object");
    }
    reject_unknown_keys(train,
                        {"learning_rate", "epochs", "batch_size", "seed",
                         "loss", "weight_decay", "grad_clip"},
                        "train");
    if (train.contains("learning_rate")) {
      config.train.learning_rate = number_at(train, "learning_rate", "train");
    }
    if (train.contains("epochs")) {
      config.train.epochs = static_cast<int>(number_at(train, "epochs", "train"));
    }
    if (train.contains("batch_size")) {
      config.train.batch_size = static_cast<int>(number_at(train, "batch_size", "train"));
    }
    if (train.contains("seed")) {
      config.train.seed = static_cast<std::uint64_t>(number_at(train, "seed", "train"));
    }
    if (train.contains("loss")) {
      if (string_at(train, "loss", "train") != "mse") {
        raise(ErrorCode::ConfigInvalid, "train.loss: only 'mse' is supported");
      }
    }
    if (train.contains("weight_decay")) {
      config.train.weight_decay = number_at(train, "weight_decay", "train");
    }
    if (train.contains("grad_clip") && !train.at("grad_clip").is_null()) {
      config.train.grad_clip = number_at(train, "grad_clip", "train");
    }
  }

  if (root.contains("combiners")) {
    if (!root.at("combiners").is_array()) {
      raise(ErrorCode::ConfigInvalid, "combiners must be an array");
    }
    const json& combiners = root.at("combiners");
    for (std::size_t i = 0; i < combiners.size(); ++i) {
      config.combiners.push_back(parse_combiner_entry(combiners[i], i));
    }
  }
  // The mean combiner is always part of the ensemble step.
  const bool has_mean =
      std::any_of(config.combiners.begin(), config.combiners.end(),
                  [](const CombinerKind& k) { return k.kind == CombinerKindId::mean; });
  if (!has_mean) {
    config.combiners.insert(config.combiners.begin(), CombinerKind{});
  }

  if (root.contains("run_dir")) {
    config.run_dir = resolve(string_at(root, "run_dir", "config"));
  } else {
    config.run_dir = base / "run";
  }

  if (root.contains("use_demographics")) {
    if (!root.at("use_demographics").is_boolean()) {
      raise(ErrorCode::ConfigInvalid, "use_demographics must be a boolean");
    }
    config.use_demographics = root.at("use_demographics").get<bool>();
  }

  config.validate();
  return config;
}

std::vector<TrainOutcome> run_train(const RunConfig& config) {
  config.validate();
  const Dataset train_data =
      load_essay_file(config.train_path, Split::train, config.schema);
  const Dataset dev_data =
      load_essay_file(config.dev_path, Split::dev, config.schema);

  std::vector<TrainOutcome> outcomes;
  for (const Target target : kTargets) {
    const std::vector<Example> train_examples =
        to_examples(train_data, target, config.use_demographics);
    const std::vector<Example> dev_examples =
        to_examples(dev_data, target, config.use_demographics);

    for (const EncoderSpec& spec : config.encoders) {
      TrainOutcome outcome;
      outcome.model_name = spec.name;
      outcome.target = target;
      outcome.artifact_dir = config.model_dir(spec, target);

      std::unique_ptr<Encoder> encoder = make_encoder(spec);
      const std::uint64_t fingerprint = compute_train_fingerprint(
          train_examples, dev_examples, spec, config.train, target,
          config.score_range, encoder->weights_fingerprint());

      const auto saved = saved_model_fingerprint(outcome.artifact_dir);
      if (saved && *saved == fingerprint) {
        const auto meta = read_meta_file(outcome.artifact_dir / "meta.txt");
        const auto it = meta.find("best_dev_pearson");
        outcome.cached = true;
        outcome.best_dev_pearson = it == meta.end() ? 0.0 : std::stod(it->second);
        std::cerr << "[info] cache hit: " << outcome.artifact_dir.string()
                  << "\n";
        outcomes.push_back(std::move(outcome));
        continue;
      }

      auto [model, report] =
          train_regressor(std::move(encoder), train_examples, dev_examples,
                          config.train, target, config.score_range);
      save_model(model, report, config.train, outcome.artifact_dir);
      outcome.best_dev_pearson = report.best_dev_pearson;
      outcomes.push_back(std::move(outcome));
    }
  }
  return outcomes;
}

void write_prediction_file(const std::filesystem::path& path,
                           const std::vector<std::string>& ids,
                           const PredictionVector& prediction) {
  if (ids.size() != prediction.values.size()) {
    raise(ErrorCode::LengthMismatch,
          "prediction cache: " + std::to_string(ids.size()) + " ids vs " +
              std::to_string(prediction.values.size()) + " values");
  }
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << "record_id\tprediction\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t' << format_value(prediction.values[i]) << '\n';
  }
}

PredictionFile read_prediction_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::MissingArtifact, "missing prediction file " + path.string());
  }
  PredictionFile file;
  std::string line;
  bool first = true;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line == "record_id\tprediction") {
      first = false;
      continue;
    }
    first = false;
    ++row;
    const std::size_t tab = line.find('\t');
    std::string value_text;
    if (tab == std::string::npos) {
      value_text = line;  // bare one-column file: positional alignment
    } else {
      file.ids.push_back(line.substr(0, tab));
      value_text = line.substr(tab + 1);
    }
    try {
      file.values.push_back(std::stod(value_text));
    } catch (const std::exception&) {
      raise(ErrorCode::MalformedRow, path.string() + " row " +
                                         std::to_string(row) +
                                         ": bad prediction value '" +
                                         value_text + "'");
    }
  }
  if (!file.ids.empty() && file.ids.size() != file.values.size()) {
    raise(ErrorCode::MalformedRow,
          path.string() + ": mixed id-bearing and bare rows");
  }
  return file;
}

std::vector<std::filesystem::path> run_predict(const RunConfig& config,
                                               Split split) {
  config.validate();
  const std::filesystem::path data_path =
      split == Split::train ? config.train_path
      : split == Split::dev ? config.dev_path
                            : config.test_path;
  const Dataset dataset = load_essay_file(data_path, split, config.schema);
  const std::vector<std::string> texts =
      render_inputs(dataset, config.use_demographics);
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& record : dataset.records) ids.push_back(record.record_id);

  std::vector<std::filesystem::path> paths;
  for (const Target target : kTargets) {
    for (const EncoderSpec& spec : config.encoders) {
      const std::filesystem::path dir = config.model_dir(spec, target);
      if (!std::filesystem::exists(dir / "meta.txt")) {
        raise(ErrorCode::MissingArtifact,
              "no trained model at " + dir.string() + "; run train first");
      }
      const RegressorModel model = load_model(dir);
      const PredictionVector prediction =
          predict(model, texts, dataset.fingerprint());
      const std::filesystem::path out =
          config.prediction_cache_path(spec, split, target);
      write_prediction_file(out, ids, prediction);
      paths.push_back(out);
    }
  }
  return paths;
}

std::map<std::string, EnsembleOutcome> run_ensemble(const RunConfig& config) {
  config.validate();
  const Dataset dev_data =
      load_essay_file(config.dev_path, Split::dev, config.schema);
  const Dataset test_data =
      load_essay_file(config.test_path, Split::test, config.schema);

  const bool test_has_gold = test_data.has_all_labels();

  // Per-target matrices from the prediction caches.
  std::map<Target, PredictionMatrix> dev_matrices, test_matrices;
  std::map<Target, std::vector<double>> dev_gold;
  for (const Target target : kTargets) {
    dev_gold[target] = gold_column(dev_data, target);
    for (const Split split : {Split::dev, Split::test}) {
      const Dataset& dataset = split == Split::dev ? dev_data : test_data;
      std::vector<PredictionVector> vectors;
      for (const EncoderSpec& spec : config.encoders) {
        const std::filesystem::path path =
            config.prediction_cache_path(spec, split, target);
        const PredictionFile file = read_prediction_file(path);
        if (file.values.size() != dataset.size()) {
          raise(ErrorCode::AlignmentError,
                path.string() + " has " + std::to_string(file.values.size()) +
                    " rows but the " + to_string(split) + " split has " +
                    std::to_string(dataset.size()));
        }
        for (std::size_t i = 0; i < file.ids.size(); ++i) {
          if (file.ids[i] != dataset.records[i].record_id) {
            raise(ErrorCode::AlignmentError,
                  path.string() + " row " + std::to_string(i) +
                      ": id '" + file.ids[i] + "' does not match dataset id '" +
                      dataset.records[i].record_id + "'");
          }
        }
        PredictionVector vector;
        vector.values = file.values;
        vector.source_model = spec.name;
        vector.target = target;
        vector.dataset_fingerprint = dataset.fingerprint();
        vectors.push_back(std::move(vector));
      }
      PredictionMatrix matrix = assemble_matrix(vectors);
      (split == Split::dev ? dev_matrices : test_matrices)[target] =
          std::move(matrix);
    }
  }

  std::map<std::string, EnsembleOutcome> outcomes;
  std::filesystem::create_directories(config.ensembles_dir());

  std::vector<std::string> dev_ids, test_ids;
  for (const auto& r : dev_data.records) dev_ids.push_back(r.record_id);
  for (const auto& r : test_data.records) test_ids.push_back(r.record_id);

  // The mean combiner is part of every ensemble run.
  std::vector<CombinerKind> combiners = config.combiners;
  if (std::none_of(combiners.begin(), combiners.end(), [](const CombinerKind& k) {
        return k.kind == CombinerKindId::mean;
      })) {
    combiners.insert(combiners.begin(), CombinerKind{});
  }

  for (const CombinerKind& kind : combiners) {
    const std::string name = to_string(kind.kind);
    EnsembleOutcome outcome;

    std::map<Target, std::vector<double>> dev_out, test_out;
    for (const Target target : kTargets) {
      const FittedCombiner fitted =
          fit_combiner(kind, dev_matrices[target], dev_gold[target],
                       config.seed, config.score_range);
      save_combiner(fitted, config.ensembles_dir() /
                                (name + "__" + to_string(target)));

      const PredictionVector on_dev = combine(fitted, dev_matrices[target]);
      const PredictionVector on_test = combine(fitted, test_matrices[target]);
      dev_out[target] = on_dev.values;
      test_out[target] = on_test.values;

      write_prediction_file(
          config.ensembles_dir() /
              (name + "__dev__" + std::string(to_string(target)) + ".tsv"),
          dev_ids, on_dev);
      const std::filesystem::path test_path =
          config.ensembles_dir() /
          (name + "__test__" + std::string(to_string(target)) + ".tsv");
      write_prediction_file(test_path, test_ids, on_test);
      (target == Target::empathy ? outcome.empathy_path
                                 : outcome.distress_path) = test_path;
    }

    outcome.dev_report =
        evaluate(dev_out[Target::empathy], dev_out[Target::distress],
                 dev_gold[Target::empathy], dev_gold[Target::distress],
                 name + "@dev");
    append_report(config.results_log(), *outcome.dev_report);

    if (test_has_gold) {
      outcome.test_report = evaluate(
          test_out[Target::empathy], test_out[Target::distress],
          gold_column(test_data, Target::empathy),
          gold_column(test_data, Target::distress), name + "@test");
      append_report(config.results_log(), *outcome.test_report);
    }

    outcomes.emplace(name, std::move(outcome));
  }
  return outcomes;
}

EvalReport run_score(const std::filesystem::path& pred_empathy_path,
                     const std::filesystem::path& pred_distress_path,
                     const std::filesystem::path& gold_path,
                     const SchemaConfig& schema,
                     const std::filesystem::path& results_log,
                     const std::string& run_id) {
  const Dataset gold_data = load_essay_file(gold_path, Split::test, schema);
  const std::vector<double> gold_empathy = gold_column(gold_data, Target::empathy);
  const std::vector<double> gold_distress = gold_column(gold_data, Target::distress);

  std::unordered_map<std::string, std::size_t> id_index;
  for (std::size_t i = 0; i < gold_data.records.size(); ++i) {
    id_index.emplace(gold_data.records[i].record_id, i);
  }

  // Align one prediction file against the gold rows: by record_id when the
  // file carries ids, by position otherwise.
  const auto aligned = [&](const std::filesystem::path& path) {
    const PredictionFile file = read_prediction_file(path);
    if (file.ids.empty()) {
      if (file.values.size() != gold_data.size()) {
        raise(ErrorCode::AlignmentError,
              path.string() + ": " + std::to_string(file.values.size()) +
                  " rows cannot align positionally with " +
                  std::to_string(gold_data.size()) + " gold rows");
      }
      return file.values;
    }
    std::vector<double> by_gold_order(gold_data.size());
    std::vector<bool> seen(gold_data.size(), false);
    std::vector<std::string> offenders;
    for (std::size_t i = 0; i < file.ids.size(); ++i) {
      const auto it = id_index.find(file.ids[i]);
      if (it == id_index.end() || seen[it->second]) {
        if (offenders.size() < 5) offenders.push_back(file.ids[i]);
        continue;
      }
      seen[it->second] = true;
      by_gold_order[it->second] = file.values[i];
    }
    for (std::size_t i = 0; i < gold_data.size() && offenders.size() < 5; ++i) {
      if (!seen[i]) offenders.push_back(gold_data.records[i].record_id);
    }
    if (!offenders.empty() || file.ids.size() != gold_data.size()) {
      std::string list;
      for (const auto& id : offenders) list += " " + id;
      raise(ErrorCode::AlignmentError,
            path.string() + ": record ids do not match the gold file; first "
                            "offenders:" + list);
    }
    return by_gold_order;
  };

  const std::vector<double> pred_empathy = aligned(pred_empathy_path);
  const std::vector<double> pred_distress = aligned(pred_distress_path);

  const EvalReport report = evaluate(pred_empathy, pred_distress, gold_empathy,
                                     gold_distress, run_id);
  std::cout << format_report(report) << '\n';
  if (!results_log.empty()) {
    if (results_log.has_parent_path()) {
      std::filesystem::create_directories(results_log.parent_path());
    }
    append_report(results_log, report);
  }
  return report;
}

std::filesystem::path run_submit(const RunConfig& config,
                                 const std::string& combiner_name,
                                 std::filesystem::path out_path,
                                 bool distress_first) {
  combiner_kind_from_string(combiner_name);  // reject unknown names early
  const Dataset test_data =
      load_essay_file(config.test_path, Split::test, config.schema);

  PredictionVector vectors[2];
  for (const Target target : kTargets) {
    const std::filesystem::path path =
        config.ensembles_dir() /
        (combiner_name + "__test__" + std::string(to_string(target)) + ".tsv");
    if (!std::filesystem::exists(path)) {
      raise(ErrorCode::MissingArtifact,
            "no ensemble output at " + path.string() + "; run ensemble first");
    }
    const PredictionFile file = read_prediction_file(path);
    if (file.values.size() != test_data.size()) {
      raise(ErrorCode::AlignmentError,
            path.string() + " does not match the test split size");
    }
    PredictionVector& vector =
        vectors[target == Target::empathy ? 0 : 1];
    vector.values = file.values;
    vector.source_model = "ensemble:" + combiner_name;
    vector.target = target;
    vector.dataset_fingerprint = test_data.fingerprint();
  }

  if (out_path.empty()) out_path = config.run_dir / "submission.tsv";
  if (distress_first) {
    write_submission(vectors[1], vectors[0], out_path);
  } else {
    write_submission(vectors[0], vectors[1], out_path);
  }
  return out_path;
}

void write_submission(const PredictionVector& pred_empathy,
                      const PredictionVector& pred_distress,
                      const std::filesystem::path& path) {
  if (pred_empathy.values.size() != pred_distress.values.size()) {
    raise(ErrorCode::LengthMismatch,
          "submission: " + std::to_string(pred_empathy.values.size()) +
              " empathy vs " + std::to_string(pred_distress.values.size()) +
              " distress predictions");
  }
  if (pred_empathy.dataset_fingerprint != pred_distress.dataset_fingerprint) {
    raise(ErrorCode::FingerprintMismatch,
          "submission: empathy and distress predictions come from different "
          "datasets");
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  char buf[64];
  for (std::size_t i = 0; i < pred_empathy.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f\n", pred_empathy.values[i],
                  pred_distress.values[i]);
    out << buf;
  }
}

}  // namespace empdis
