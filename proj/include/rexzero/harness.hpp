#ifndef REXZERO_HARNESS_HPP
#define REXZERO_HARNESS_HPP

#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "rexzero/pipeline.hpp"

namespace rexzero {

enum class EvalKind { EndToEnd, TwoStep, Classifier };

inline std::string to_string(EvalKind k) {
  switch (k) {
    case EvalKind::EndToEnd: return "end_to_end";
    case EvalKind::TwoStep: return "two_step";
    default: return "classifier";
  }
}
inline EvalKind eval_kind_from_string(const std::string& s) {
  if (s == "end_to_end") return EvalKind::EndToEnd;
  if (s == "two_step") return EvalKind::TwoStep;
  if (s == "classifier") return EvalKind::Classifier;
  throw ConfigError("unknown evaluate kind: " + s);
}

struct DataConfig {
  bool cased = true;
  std::optional<SyntheticConfig> synthetic;
  // File-based inputs mirror the public release shape: per partition one
  // positive JSONL and optionally one zero-tuple JSONL.
  std::string schema_path;
  std::map<Partition, std::string> positive_paths;
  std::map<Partition, std::string> zero_paths;
  std::string dataset_name = "dataset";
  std::vector<ExpectedCounts> expected;

  bool file_based() const { return !positive_paths.empty(); }
};

struct ClassifierConfig {
  ClassifierMode mode = ClassifierMode::Binary;
  TrainConfig train;
};

struct ExtractorSpec {
  std::string name = "cascade";
  Setting train_setting = Setting::NZ;
  TrainConfig train;
  double tag_threshold = 0.5;
  int max_steps = 10;
  int relation_emb = 32;
};

struct EvaluateSpec {
  EvalKind kind = EvalKind::EndToEnd;
  Setting test_setting = Setting::WZ;
  std::string extractor_checkpoint;   // default path under output_dir when empty
  std::string classifier_checkpoint;  // idem
  std::string model_label;            // row label; defaults to extractor name
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::string output_dir;
  MatchMode match_mode = MatchMode::Exact;
  DataConfig data;
  EncoderConfig encoder;
  ClassifierConfig classifier;
  ExtractorSpec extractor;
  EvaluateSpec evaluate;

  std::filesystem::path out() const { return output_dir; }

  static ExperimentConfig load(const std::filesystem::path& path) {
    return from_json(json::parse(read_file(path)));
  }

  // The master seed fans out into independent derived streams; sub-seeds in
  // the file are ignored on purpose.
  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", "runs/" + c.name);
    if (const char* env = std::getenv("REXZERO_OUT")) c.output_dir = env;
    if (j.contains("match_mode")) c.match_mode = match_mode_from_string(j["match_mode"]);

    if (j.contains("data")) {
      const json& d = j["data"];
      c.data.cased = d.value("cased", true);
      if (d.contains("synthetic")) {
        const json& s = d["synthetic"];
        SyntheticConfig sc;
        sc.relations = s.value("relations", sc.relations);
        sc.n_train = s.value("train", sc.n_train);
        sc.n_validation = s.value("validation", sc.n_validation);
        sc.n_test = s.value("test", sc.n_test);
        sc.zero_fraction = s.value("zero_fraction", sc.zero_fraction);
        sc.vocab_size = s.value("vocab_size", sc.vocab_size);
        sc.cased = c.data.cased;
        sc.seed = derive_seed(c.seed, "synthetic");
        c.data.synthetic = sc;
      }
      if (d.contains("files")) {
        const json& f = d["files"];
        c.data.schema_path = f.at("schema").get<std::string>();
        for (Partition p : {Partition::Train, Partition::Validation, Partition::Test}) {
          std::string pos_key = to_string(p) + "_positive";
          std::string zero_key = to_string(p) + "_zeros";
          if (f.contains(pos_key)) c.data.positive_paths[p] = f[pos_key].get<std::string>();
          if (f.contains(zero_key)) c.data.zero_paths[p] = f[zero_key].get<std::string>();
        }
        if (c.data.positive_paths.empty())
          throw ConfigError("data.files present but no *_positive entries");
      }
      if (d.contains("dataset_name")) c.data.dataset_name = d["dataset_name"].get<std::string>();
      if (d.contains("expected_counts")) {
        for (const auto& e : d["expected_counts"]) {
          ExpectedCounts ec;
          ec.dataset = e.value("dataset", c.data.dataset_name);
          ec.partition = partition_from_string(e.at("partition").get<std::string>());
          ec.positive = e.at("positive").get<long>();
          ec.tuples = e.at("tuples").get<long>();
          ec.zeros = e.at("zeros").get<long>();
          c.data.expected.push_back(std::move(ec));
        }
      }
      if (!c.data.synthetic && !c.data.file_based())
        throw ConfigError("data: needs either 'synthetic' or 'files'");
      if (c.data.synthetic && c.data.file_based())
        throw ConfigError("data: 'synthetic' and 'files' are mutually exclusive");
    } else {
      throw ConfigError("config missing 'data'");
    }

    if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j["encoder"]);
    c.encoder.cased = c.data.cased;
    c.encoder.seed = derive_seed(c.seed, "encoder");

    if (j.contains("classifier")) {
      const json& cl = j["classifier"];
      if (cl.contains("mode")) c.classifier.mode = classifier_mode_from_string(cl["mode"]);
      if (cl.contains("train")) c.classifier.train = TrainConfig::from_json(cl["train"]);
    }
    c.classifier.train.seed = derive_seed(c.seed, "classifier");

    if (j.contains("extractor")) {
      const json& ex = j["extractor"];
      c.extractor.name = ex.value("name", c.extractor.name);
      if (ex.contains("train_setting"))
        c.extractor.train_setting = setting_from_string(ex["train_setting"]);
      if (ex.contains("train")) c.extractor.train = TrainConfig::from_json(ex["train"]);
      c.extractor.tag_threshold = ex.value("tag_threshold", c.extractor.tag_threshold);
      c.extractor.max_steps = ex.value("max_steps", c.extractor.max_steps);
      c.extractor.relation_emb = ex.value("relation_emb", c.extractor.relation_emb);
    }
    c.extractor.train.seed = derive_seed(c.seed, "extractor");

    if (j.contains("evaluate")) {
      const json& ev = j["evaluate"];
      if (ev.contains("pipeline")) c.evaluate.kind = eval_kind_from_string(ev["pipeline"]);
      if (ev.contains("test_setting"))
        c.evaluate.test_setting = setting_from_string(ev["test_setting"]);
      c.evaluate.extractor_checkpoint = ev.value("extractor_checkpoint", std::string());
      c.evaluate.classifier_checkpoint = ev.value("classifier_checkpoint", std::string());
      c.evaluate.model_label = ev.value("model_label", std::string());
    }
    return c;
  }
};

// --------------------------------------------------------------------------
// Prepared-data layout under <out>/data.
// --------------------------------------------------------------------------

inline std::filesystem::path data_dir(const ExperimentConfig& c) { return c.out() / "data"; }
inline std::filesystem::path setting_file(const ExperimentConfig& c, Setting s, Partition p) {
  return data_dir(c) / (to_lower(to_string(s)) + "_" + to_string(p) + ".jsonl");
}
inline std::filesystem::path classifier_dir(const ExperimentConfig& c) {
  return c.out() / ("classifier-" + to_string(c.classifier.mode));
}
inline std::filesystem::path extractor_dir(const ExperimentConfig& c) {
  return c.out() / ("extractor-" + c.extractor.name + "-" + to_string(c.extractor.train_setting));
}

struct PrepareResult {
  std::filesystem::path schema_path;
  std::vector<StatRow> stats;
};

inline PrepareResult cmd_prepare(const ExperimentConfig& cfg) {
  std::map<Partition, SettingPair> pairs;
  RelationSchema schema;
  if (cfg.data.synthetic) {
    SyntheticCorpus corpus = generate_synthetic(*cfg.data.synthetic);
    schema = corpus.schema;
    pairs[Partition::Train] = corpus.train;
    pairs[Partition::Validation] = corpus.validation;
    pairs[Partition::Test] = corpus.test;
  } else {
    schema = RelationSchema::load(cfg.data.schema_path);
    for (const auto& [partition, pos_path] : cfg.data.positive_paths) {
      auto positive = load_jsonl(pos_path, schema, cfg.data.cased);
      std::vector<AnnotatedSentence> zeros;
      auto zit = cfg.data.zero_paths.find(partition);
      if (zit != cfg.data.zero_paths.end())
        zeros = load_jsonl(zit->second, schema, cfg.data.cased);
      pairs[partition] = build_settings(positive, zeros, partition);
    }
  }

  PrepareResult result;
  std::filesystem::create_directories(data_dir(cfg));
  result.schema_path = data_dir(cfg) / "schema.json";
  schema.save(result.schema_path);
  for (const auto& [partition, pair] : pairs) {
    write_jsonl(setting_file(cfg, Setting::NZ, partition), pair.nz.sentences);
    write_jsonl(setting_file(cfg, Setting::WZ, partition), pair.wz.sentences);
  }

  if (!cfg.data.expected.empty()) {
    std::map<std::string, std::map<Partition, DatasetSetting>> wz;
    for (const auto& [partition, pair] : pairs) wz[cfg.data.dataset_name][partition] = pair.wz;
    result.stats = validate_statistics(wz, cfg.data.expected);
    write_file(data_dir(cfg) / "stats.csv", stat_rows_to_csv(result.stats));
  }
  return result;
}

inline RelationSchema load_prepared_schema(const ExperimentConfig& cfg) {
  auto path = data_dir(cfg) / "schema.json";
  if (!std::filesystem::exists(path))
    throw ConfigError("prepared schema missing (run prepare first): " + path.string());
  return RelationSchema::load(path);
}

inline DatasetSetting load_prepared(const ExperimentConfig& cfg, const RelationSchema& schema,
                                    Setting setting, Partition partition) {
  auto path = setting_file(cfg, setting, partition);
  if (!std::filesystem::exists(path))
    throw ConfigError("prepared " + to_string(setting) + " " + to_string(partition) +
                      " file missing (zeros absent or prepare not run): " + path.string());
  DatasetSetting ds;
  ds.setting = setting;
  ds.partition = partition;
  ds.sentences = load_jsonl(path, schema, cfg.data.cased);
  if (setting == Setting::NZ)
    for (const auto& s : ds.sentences)
      if (s.zero_cardinal())
        throw DataError("zero-cardinal sentence in NZ file: " + s.sentence.id);
  return ds;
}

inline std::vector<StatRow> cmd_validate_stats(const ExperimentConfig& cfg) {
  if (cfg.data.expected.empty())
    throw ConfigError("validate-stats: config has no data.expected_counts");
  RelationSchema schema = load_prepared_schema(cfg);
  std::map<std::string, std::map<Partition, DatasetSetting>> wz;
  for (Partition p : {Partition::Train, Partition::Validation, Partition::Test}) {
    if (std::filesystem::exists(setting_file(cfg, Setting::WZ, p)))
      wz[cfg.data.dataset_name][p] = load_prepared(cfg, schema, Setting::WZ, p);
  }
  auto rows = validate_statistics(wz, cfg.data.expected);
  write_file(data_dir(cfg) / "stats.csv", stat_rows_to_csv(rows));
  return rows;
}

// Emits the synthetic corpus in release shape (per-partition positive/zeros
// files plus schema) so the file-based path can consume it unchanged.
inline std::filesystem::path cmd_synth(const ExperimentConfig& cfg) {
  if (!cfg.data.synthetic) throw ConfigError("synth: config has no data.synthetic");
  SyntheticCorpus corpus = generate_synthetic(*cfg.data.synthetic);
  auto dir = cfg.out() / "synth";
  std::filesystem::create_directories(dir);
  corpus.schema.save(dir / "schema.json");
  auto split = [&](const SettingPair& pair, Partition p) {
    std::vector<AnnotatedSentence> zeros;
    for (const auto& s : pair.wz.sentences)
      if (s.zero_cardinal()) zeros.push_back(s);
    write_jsonl(dir / (to_string(p) + "_positive.jsonl"), pair.nz.sentences);
    write_jsonl(dir / (to_string(p) + "_zeros.jsonl"), zeros);
  };
  split(corpus.train, Partition::Train);
  split(corpus.validation, Partition::Validation);
  split(corpus.test, Partition::Test);
  return dir;
}

inline void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
  std::string out = "epoch,train_loss,validation_f1\n";
  for (const auto& e : log.epochs)
    out += std::to_string(e.epoch) + "," + format_fixed(e.train_loss, 6) + "," +
           format_fixed(e.validation_f1, 6) + "\n";
  write_file(path, out);
}

inline std::filesystem::path cmd_train_classifier(const ExperimentConfig& cfg) {
  RelationSchema schema = load_prepared_schema(cfg);
  DatasetSetting train = load_prepared(cfg, schema, Setting::WZ, Partition::Train);
  DatasetSetting validation = load_prepared(cfg, schema, Setting::WZ, Partition::Validation);
  TransformerEncoder encoder = make_encoder(cfg.encoder, train.sentences);
  ZeroCardClassifier clf(cfg.classifier.mode, std::move(encoder), schema, cfg.classifier.train);
  TrainLog log = clf.train(train, validation);
  auto dir = classifier_dir(cfg);
  clf.save(dir);
  write_train_log(dir / "train_log.csv", log);
  return dir;
}

inline std::filesystem::path cmd_train_extractor(const ExperimentConfig& cfg) {
  ExtractorRegistry& registry = ExtractorRegistry::global();
  if (registry.is_external(cfg.extractor.name))
    throw ConfigError("external adapters train out-of-band: " + cfg.extractor.name);
  RelationSchema schema = load_prepared_schema(cfg);
  Setting setting = cfg.extractor.train_setting;
  DatasetSetting train = load_prepared(cfg, schema, setting, Partition::Train);
  DatasetSetting validation = load_prepared(cfg, schema, setting, Partition::Validation);

  auto dir = extractor_dir(cfg);
  if (cfg.extractor.name == "cascade") {
    CascadeOptions opts;
    opts.tag_threshold = cfg.extractor.tag_threshold;
    CascadeExtractor ex(make_encoder(cfg.encoder, train.sentences), schema, opts);
    ex.train(train, validation, cfg.extractor.train);
    ex.save(dir);
    write_train_log(dir / "train_log.csv", ex.train_log());
  } else if (cfg.extractor.name == "pointer") {
    PointerOptions opts;
    opts.max_steps = cfg.extractor.max_steps;
    opts.relation_emb = cfg.extractor.relation_emb;
    PointerExtractor ex(make_encoder(cfg.encoder, train.sentences), schema, opts);
    ex.train(train, validation, cfg.extractor.train);
    ex.save(dir);
    write_train_log(dir / "train_log.csv", ex.train_log());
  } else {
    throw ConfigError("unknown extractor: " + cfg.extractor.name);
  }
  return dir;
}

// Loads either built-in extractor checkpoint, dispatching on its manifest.
inline std::unique_ptr<ExtractorInterface> load_extractor(const std::filesystem::path& dir) {
  json manifest = json::parse(read_file(dir / "manifest.json"));
  std::string kind = manifest.at("extractor").get<std::string>();
  if (kind == "cascade")
    return std::make_unique<CascadeExtractor>(CascadeExtractor::load(dir));
  if (kind == "pointer")
    return std::make_unique<PointerExtractor>(PointerExtractor::load(dir));
  throw DataError("unknown extractor checkpoint kind: " + kind);
}

inline std::filesystem::path eval_dir(const ExperimentConfig& c) { return c.out() / "eval"; }

// A checkpoint trained under one setting refuses to stand in for another
// unless explicitly overridden.
inline void check_setting(const std::string& what, Setting manifest_setting, Setting expected,
                          bool allow_mismatch) {
  if (manifest_setting == expected) return;
  std::string msg = what + " checkpoint trained on " + to_string(manifest_setting) +
                    " but the run declares " + to_string(expected);
  if (!allow_mismatch) throw ConfigError(msg + " (pass --allow-setting-mismatch to override)");
}

inline std::vector<std::filesystem::path> cmd_evaluate(const ExperimentConfig& cfg,
                                                       bool allow_setting_mismatch = false) {
  RelationSchema schema = load_prepared_schema(cfg);
  std::filesystem::create_directories(eval_dir(cfg) / "predictions");
  std::vector<std::filesystem::path> rows;
  std::string model = cfg.evaluate.model_label.empty() ? cfg.extractor.name
                                                       : cfg.evaluate.model_label;

  if (cfg.evaluate.kind == EvalKind::Classifier) {
    std::filesystem::path cdir = cfg.evaluate.classifier_checkpoint.empty()
                                     ? classifier_dir(cfg)
                                     : std::filesystem::path(cfg.evaluate.classifier_checkpoint);
    ZeroCardClassifier clf = ZeroCardClassifier::load(cdir);
    DatasetSetting test = load_prepared(cfg, schema, Setting::WZ, Partition::Test);
    if (test.sentences.empty()) throw ConfigError("empty testset");
    json row;
    row["kind"] = "classifier";
    row["classifier_mode"] = to_string(clf.mode());
    row["report"] = score_report_to_json(clf.evaluate(test), "sentence");
    if (clf.mode() == ClassifierMode::MCML)
      row["label_level"] = score_report_to_json(clf.evaluate_label_level(test), "sentence");
    auto path = eval_dir(cfg) / ("classifier_" + to_string(clf.mode()) + ".json");
    write_file(path, row.dump(2) + "\n");
    rows.push_back(path);
    return rows;
  }

  std::filesystem::path xdir = cfg.evaluate.extractor_checkpoint.empty()
                                   ? extractor_dir(cfg)
                                   : std::filesystem::path(cfg.evaluate.extractor_checkpoint);
  std::unique_ptr<ExtractorInterface> extractor = load_extractor(xdir);
  check_setting("extractor", extractor->trained_setting(), cfg.extractor.train_setting,
                allow_setting_mismatch);

  if (cfg.evaluate.kind == EvalKind::EndToEnd) {
    json row;
    row["kind"] = "end_to_end";
    row["model"] = model;
    row["train_setting"] = to_string(extractor->trained_setting());
    row["match_mode"] = to_string(cfg.match_mode);
    for (Setting s : {Setting::NZ, Setting::WZ}) {
      DatasetSetting test = load_prepared(cfg, schema, s, Partition::Test);
      if (test.sentences.empty()) throw ConfigError("empty testset");
      PredictionMap map = run_end_to_end(*extractor, test);
      write_file(eval_dir(cfg) / "predictions" /
                     (model + "_" + to_string(extractor->trained_setting()) + "_on_" +
                      to_string(s) + ".jsonl"),
                 prediction_map_to_jsonl(map, test));
      row["reports"][to_string(s)] =
          score_report_to_json(score(map.tuples_by_id(), test.sentences, cfg.match_mode));
    }
    auto path = eval_dir(cfg) / ("end_to_end_" + model + "_" +
                                 to_string(extractor->trained_setting()) + ".json");
    write_file(path, row.dump(2) + "\n");
    rows.push_back(path);
    return rows;
  }

  // Two-step: WZ-trained classifier filters, NZ-trained extractor extracts.
  std::filesystem::path cdir = cfg.evaluate.classifier_checkpoint.empty()
                                   ? classifier_dir(cfg)
                                   : std::filesystem::path(cfg.evaluate.classifier_checkpoint);
  ZeroCardClassifier clf = ZeroCardClassifier::load(cdir);
  DatasetSetting test = load_prepared(cfg, schema, cfg.evaluate.test_setting, Partition::Test);
  if (test.sentences.empty()) throw ConfigError("empty testset");
  PredictionMap map = run_two_step(clf, *extractor, test);
  write_file(eval_dir(cfg) / "predictions" /
                 (model + "_two_step_on_" + to_string(cfg.evaluate.test_setting) + ".jsonl"),
             prediction_map_to_jsonl(map, test));
  json row;
  row["kind"] = "two_step";
  row["model"] = model;
  row["classifier_mode"] = to_string(clf.mode());
  row["match_mode"] = to_string(cfg.match_mode);
  row["test_setting"] = to_string(cfg.evaluate.test_setting);
  row["report"] =
      score_report_to_json(score(map.tuples_by_id(), test.sentences, cfg.match_mode));
  auto path = eval_dir(cfg) / ("two_step_" + model + ".json");
  write_file(path, row.dump(2) + "\n");
  rows.push_back(path);
  return rows;
}

// --------------------------------------------------------------------------
// Report rendering: CSV plus a plain-text grid, scores at 3 decimals and
// point columns at 1 decimal. Derived columns are recomputed from the stored
// full-precision scores.
// --------------------------------------------------------------------------

struct ReportTables {
  std::string stats_csv, stats_txt;
  std::string end_to_end_csv, end_to_end_txt;
  std::string classifier_csv, classifier_txt;
  std::string two_step_csv, two_step_txt;
};

inline std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return "";
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      if (i + 1 < row.size()) out += std::string(widths[i] - row[i].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

inline ReportTables cmd_report(const std::filesystem::path& run_dir) {
  ReportTables tables;

  auto stats_path = run_dir / "data" / "stats.csv";
  if (std::filesystem::exists(stats_path)) {
    tables.stats_csv = read_file(stats_path);
    std::vector<std::vector<std::string>> grid;
    std::istringstream in(tables.stats_csv);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::size_t start = 0;
      while (start <= line.size()) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) comma = line.size();
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
      }
      grid.push_back(std::move(cells));
    }
    tables.stats_txt = render_grid(grid);
  }

  auto edir = run_dir / "eval";
  std::vector<json> end_rows, two_rows, clf_rows;
  if (std::filesystem::exists(edir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(edir))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      json row = json::parse(read_file(f));
      std::string kind = row.value("kind", "");
      if (kind == "end_to_end") end_rows.push_back(row);
      if (kind == "two_step") two_rows.push_back(row);
      if (kind == "classifier") clf_rows.push_back(row);
    }
  }
  if (end_rows.empty() && two_rows.empty() && clf_rows.empty() && tables.stats_csv.empty())
    throw ConfigError("report: no evaluation outputs under " + run_dir.string());

  // Green reference per model: NZ-trained, NZ-tested F1.
  std::map<std::string, double> green_f1;
  for (const auto& row : end_rows)
    if (row["train_setting"] == "NZ")
      green_f1[row["model"]] = row["reports"]["NZ"]["f1"].get<double>();
  // Red reference per model: WZ-trained, WZ-tested F1 (two-step baseline).
  std::map<std::string, double> red_f1;
  for (const auto& row : end_rows)
    if (row["train_setting"] == "WZ")
      red_f1[row["model"]] = row["reports"]["WZ"]["f1"].get<double>();

  {
    std::string csv =
        "model,train_setting,nz_precision,nz_recall,nz_f1,wz_precision,wz_recall,wz_f1,"
        "point_drop,cross_point_drop\n";
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"model", "train", "NZ-P", "NZ-R", "NZ-F1", "WZ-P", "WZ-R", "WZ-F1",
                    "% point v", "cross % point v"});
    for (const auto& row : end_rows) {
      ScoreReport nz = score_report_from_json(row["reports"]["NZ"]);
      ScoreReport wz = score_report_from_json(row["reports"]["WZ"]);
      double drop = drop_points(nz.f1, wz.f1);
      std::string model = row["model"];
      std::string train = row["train_setting"];
      std::string cross;
      if (train == "WZ" && green_f1.count(model))
        cross = format_fixed(drop_points(green_f1[model], wz.f1), 1);
      csv += model + "," + train + "," + format_fixed(nz.precision, 3) + "," +
             format_fixed(nz.recall, 3) + "," + format_fixed(nz.f1, 3) + "," +
             format_fixed(wz.precision, 3) + "," + format_fixed(wz.recall, 3) + "," +
             format_fixed(wz.f1, 3) + "," + format_fixed(drop, 1) + "," + cross + "\n";
      grid.push_back({model, train, format_fixed(nz.precision, 3), format_fixed(nz.recall, 3),
                      format_fixed(nz.f1, 3), format_fixed(wz.precision, 3),
                      format_fixed(wz.recall, 3), format_fixed(wz.f1, 3),
                      format_fixed(drop, 1), cross});
    }
    tables.end_to_end_csv = csv;
    tables.end_to_end_txt = render_grid(grid);
  }

  {
    std::string csv = "classifier,precision,recall,f1,label_precision,label_recall,label_f1\n";
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"classifier", "P", "R", "F1", "label-P", "label-R", "label-F1"});
    for (const auto& row : clf_rows) {
      ScoreReport rep = score_report_from_json(row["report"]);
      std::string lp, lr, lf;
      if (row.contains("label_level")) {
        ScoreReport lab = score_report_from_json(row["label_level"]);
        lp = format_fixed(lab.precision, 3);
        lr = format_fixed(lab.recall, 3);
        lf = format_fixed(lab.f1, 3);
      }
      std::string mode = row["classifier_mode"];
      csv += mode + "," + format_fixed(rep.precision, 3) + "," + format_fixed(rep.recall, 3) +
             "," + format_fixed(rep.f1, 3) + "," + lp + "," + lr + "," + lf + "\n";
      grid.push_back({mode, format_fixed(rep.precision, 3), format_fixed(rep.recall, 3),
                      format_fixed(rep.f1, 3), lp, lr, lf});
    }
    tables.classifier_csv = csv;
    tables.classifier_txt = render_grid(grid);
  }

  {
    std::string csv = "model,classifier,precision,recall,f1,point_gain\n";
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"model", "classifier", "P", "R", "F1", "% ^"});
    for (const auto& row : two_rows) {
      ScoreReport rep = score_report_from_json(row["report"]);
      std::string model = row["model"];
      std::string gain;
      if (red_f1.count(model))
        gain = format_fixed(improvement_points(rep.f1, red_f1[model]), 1);
      std::string cmode = row["classifier_mode"];
      csv += model + "," + cmode + "," + format_fixed(rep.precision, 3) + "," +
             format_fixed(rep.recall, 3) + "," + format_fixed(rep.f1, 3) + "," + gain + "\n";
      grid.push_back({model, cmode, format_fixed(rep.precision, 3),
                      format_fixed(rep.recall, 3), format_fixed(rep.f1, 3), gain});
    }
    tables.two_step_csv = csv;
    tables.two_step_txt = render_grid(grid);
  }

  auto rdir = run_dir / "report";
  std::filesystem::create_directories(rdir);
  if (!tables.stats_csv.empty()) {
    write_file(rdir / "stats.csv", tables.stats_csv);
    write_file(rdir / "stats.txt", tables.stats_txt);
  }
  write_file(rdir / "end_to_end.csv", tables.end_to_end_csv);
  write_file(rdir / "end_to_end.txt", tables.end_to_end_txt);
  write_file(rdir / "classifier.csv", tables.classifier_csv);
  write_file(rdir / "classifier.txt", tables.classifier_txt);
  write_file(rdir / "two_step.csv", tables.two_step_csv);
  write_file(rdir / "two_step.txt", tables.two_step_txt);
  return tables;
}

}  // namespace rexzero

#endif  // REXZERO_HARNESS_HPP
