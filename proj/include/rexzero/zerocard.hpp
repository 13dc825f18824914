#ifndef REXZERO_ZEROCARD_HPP
#define REXZERO_ZEROCARD_HPP

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rexzero/encoder.hpp"
#include "rexzero/metrics.hpp"

namespace rexzero {

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;  // 2e-5 is the usual choice for pretrained encoders
  double weight_decay = 0.01;
  int max_epochs = 30;
  int patience = 5;
  double threshold = 0.5;
  std::uint64_t seed = 1;
  double positive_weight = 1.0;  // optional reweighting for class imbalance

  void validate() const {
    if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be positive");
    if (patience < 1) throw ConfigError("train config: patience must be positive");
    if (threshold <= 0.0 || threshold >= 1.0)
      throw ConfigError("train config: threshold must be in (0,1)");
    if (positive_weight <= 0.0) throw ConfigError("train config: positive_weight must be positive");
  }

  json to_json() const {
    json j;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["weight_decay"] = weight_decay;
    j["max_epochs"] = max_epochs;
    j["patience"] = patience;
    j["threshold"] = threshold;
    j["seed"] = seed;
    j["positive_weight"] = positive_weight;
    return j;
  }
  static TrainConfig from_json(const json& j) {
    TrainConfig c;
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<int>();
    if (j.contains("patience")) c.patience = j["patience"].get<int>();
    if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("positive_weight")) c.positive_weight = j["positive_weight"].get<double>();
    c.validate();
    return c;
  }
};

enum class ClassifierMode { Binary, MCML };

inline std::string to_string(ClassifierMode m) {
  return m == ClassifierMode::Binary ? "binary" : "mcml";
}
inline ClassifierMode classifier_mode_from_string(const std::string& s) {
  if (s == "binary") return ClassifierMode::Binary;
  if (s == "mcml") return ClassifierMode::MCML;
  throw ConfigError("unknown classifier mode: " + s);
}

struct ClassifierOutput {
  ClassifierMode mode = ClassifierMode::Binary;
  double prob = 0.0;                  // Binary
  Eigen::VectorXd relation_probs;     // MCML, length c
  bool decision = false;              // has-tuples
};

// Has-tuples rule shared by both modes: any probability at or above the
// threshold. Binary passes a length-1 vector, so the MCML sentence decision
// is by construction the binary rule applied to max(relation_probs).
inline bool has_tuples_decision(const Eigen::VectorXd& probs, double threshold) {
  return probs.size() > 0 && probs.maxCoeff() >= threshold;
}

// BCE target row: Binary gets one positive/negative cell, MCML a multi-hot
// row over relations. Zero-cardinal sentences yield the all-zero row.
inline Matrix classifier_target(ClassifierMode mode, const AnnotatedSentence& s,
                                const RelationSchema& schema) {
  Matrix target = Matrix::Zero(1, mode == ClassifierMode::Binary ? 1 : schema.size());
  if (mode == ClassifierMode::Binary) {
    target(0, 0) = s.zero_cardinal() ? 0.0 : 1.0;
  } else {
    for (const auto& t : s.tuples) target(0, schema.index_of(t.relation)) = 1.0;
  }
  return target;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_f1 = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_validation_f1 = 0.0;
};

// Sentence-level detection scoring: positive class = "has at least one gold
// tuple". True negatives play no role in P/R/F1.
template <typename DecisionFn>
inline ScoreReport score_detection(const DatasetSetting& testset, DecisionFn&& decide) {
  long tp = 0, fp = 0, fn = 0;
  for (const auto& s : testset.sentences) {
    bool positive = !s.zero_cardinal();
    bool decision = decide(s);
    if (positive && decision) ++tp;
    if (!positive && decision) ++fp;
    if (positive && !decision) ++fn;
  }
  return make_report(tp, fp, fn, MatchMode::Exact);
}

// Zero-cardinality classifier over the encoder's sentinel vector: one sigmoid
// logit (Binary) or c sigmoid logits with multi-hot targets (MCML); trained
// with binary cross-entropy and AdamW, early-stopped on validation detection
// F1. Zero-cardinal sentences supply the all-negative target in both modes.
class ZeroCardClassifier {
public:
  ZeroCardClassifier(ClassifierMode mode, TransformerEncoder encoder, RelationSchema schema,
                     TrainConfig config)
      : mode_(mode), encoder_(std::move(encoder)), schema_(std::move(schema)), cfg_(config) {
    cfg_.validate();
    int out = mode_ == ClassifierMode::Binary ? 1 : schema_.size();
    head_.add("head_w", encoder_.config().hidden, out);
    head_.add("head_b", 1, out);
    head_.init_uniform(derive_seed(cfg_.seed, "classifier/head"));
  }

  ClassifierMode mode() const { return mode_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const RelationSchema& schema() const { return schema_; }
  const TrainConfig& config() const { return cfg_; }
  bool trained() const { return trained_; }
  const TrainLog& train_log() const { return log_; }

  std::vector<Parameter*> trainable_parameters() const {
    auto params = encoder_.trainable_parameters();
    for (auto* p : head_.all()) params.push_back(p);
    return params;
  }

  TrainLog train(const DatasetSetting& train_set, const DatasetSetting& validation_set) {
    if (train_set.setting != Setting::WZ)
      throw ContractError("classifier training requires a WZ setting (no negatives otherwise)");
    if (validation_set.setting != Setting::WZ)
      throw ContractError("classifier validation requires a WZ setting");
    if (train_set.sentences.empty()) throw ContractError("empty classifier training set");

    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg_.learning_rate;
    opt_cfg.weight_decay = cfg_.weight_decay;
    auto params = trainable_parameters();
    AdamW opt(params, opt_cfg);
    std::mt19937_64 shuffle_rng(derive_seed(cfg_.seed, "classifier/shuffle"));

    std::vector<std::size_t> order(train_set.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    log_ = TrainLog{};
    std::vector<Matrix> best;
    int bad_epochs = 0;
    for (int epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double epoch_loss = 0.0;
      long batches = 0;
      for (std::size_t at = 0; at < order.size(); at += cfg_.batch_size) {
        std::size_t take = std::min<std::size_t>(cfg_.batch_size, order.size() - at);
        opt.zero_grad();
        double batch_loss = 0.0;
        for (std::size_t k = 0; k < take; ++k) {
          const auto& s = train_set.sentences[order[at + k]];
          Tape tape;
          Expr loss = sentence_loss(tape, s);
          Expr scaled = tape.scale(loss, 1.0 / static_cast<double>(take));
          tape.backward(scaled);
          batch_loss += scaled.scalar();
        }
        opt.step();
        epoch_loss += batch_loss;
        ++batches;
      }
      trained_ = true;  // evaluable from here on
      double val_f1 = evaluate(validation_set).f1;
      log_.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches), val_f1});
      if (log_.best_epoch < 0 || val_f1 > log_.best_validation_f1) {
        log_.best_epoch = epoch;
        log_.best_validation_f1 = val_f1;
        best = snapshot_params(params);
        bad_epochs = 0;
      } else if (++bad_epochs >= cfg_.patience) {
        break;
      }
    }
    restore_params(params, best);
    return log_;
  }

  ClassifierOutput classify(const Sentence& sentence) const {
    if (!trained_) throw ContractError("classifier not trained");
    Tape tape;
    Expr logits = logits_expr(tape, sentence);
    Eigen::VectorXd probs =
        (1.0 / (1.0 + (-logits.value().row(0).array()).exp())).matrix().transpose();
    ClassifierOutput out;
    out.mode = mode_;
    out.decision = has_tuples_decision(probs, cfg_.threshold);
    if (mode_ == ClassifierMode::Binary)
      out.prob = probs(0);
    else
      out.relation_probs = probs;
    return out;
  }

  // Forward-only training loss of one sentence.
  double loss(const AnnotatedSentence& s) const {
    Tape tape;
    return sentence_loss(tape, s).scalar();
  }

  // Forward plus backward; gradients accumulate into the parameters.
  double backprop(const AnnotatedSentence& s) const {
    Tape tape;
    Expr loss = sentence_loss(tape, s);
    tape.backward(loss);
    return loss.scalar();
  }

  ScoreReport evaluate(const DatasetSetting& testset) const {
    return score_detection(testset,
                           [this](const AnnotatedSentence& s) { return classify(s.sentence).decision; });
  }

  // Label-level micro scoring for MCML: one decision per (sentence, relation).
  ScoreReport evaluate_label_level(const DatasetSetting& testset) const {
    if (mode_ != ClassifierMode::MCML)
      throw ContractError("label-level evaluation requires MCML mode");
    long tp = 0, fp = 0, fn = 0;
    for (const auto& s : testset.sentences) {
      std::set<int> gold;
      for (const auto& t : s.tuples) gold.insert(schema_.index_of(t.relation));
      Eigen::VectorXd probs = classify(s.sentence).relation_probs;
      for (int r = 0; r < schema_.size(); ++r) {
        bool pred = probs(r) >= cfg_.threshold;
        bool is_gold = gold.count(r) > 0;
        if (pred && is_gold) ++tp;
        if (pred && !is_gold) ++fp;
        if (!pred && is_gold) ++fn;
      }
    }
    return make_report(tp, fp, fn, MatchMode::Exact);
  }

  // Mean per-sentence training loss over a dataset, no updates.
  double dataset_loss(const DatasetSetting& dataset) const {
    double total = 0.0;
    for (const auto& s : dataset.sentences) total += loss(s);
    return total / static_cast<double>(dataset.sentences.size());
  }

  void save(const std::filesystem::path& dir) const {
    if (!trained_) throw ContractError("refusing to save an untrained classifier");
    std::filesystem::create_directories(dir);
    encoder_.save(dir / "encoder");
    head_.save(dir / "head.bin");
    json manifest;
    manifest["mode"] = to_string(mode_);
    manifest["threshold"] = cfg_.threshold;
    manifest["schema"] = schema_.relations();
    manifest["schema_hash"] = schema_.hash();
    manifest["train_config"] = cfg_.to_json();
    manifest["trained_setting"] = "WZ";
    manifest["best_epoch"] = log_.best_epoch;
    manifest["validation_f1"] = log_.best_validation_f1;
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  }

  static ZeroCardClassifier load(const std::filesystem::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    RelationSchema schema(manifest.at("schema").get<std::vector<std::string>>());
    if (schema.hash() != manifest.at("schema_hash").get<std::uint64_t>())
      throw DataError("schema hash mismatch in " + dir.string());
    ZeroCardClassifier clf(classifier_mode_from_string(manifest.at("mode")),
                           TransformerEncoder::load(dir / "encoder"), std::move(schema),
                           TrainConfig::from_json(manifest.at("train_config")));
    clf.head_.load(dir / "head.bin");
    clf.trained_ = true;
    clf.log_.best_epoch = manifest.value("best_epoch", -1);
    clf.log_.best_validation_f1 = manifest.value("validation_f1", 0.0);
    return clf;
  }

private:
  Expr logits_expr(Tape& tape, const Sentence& sentence) const {
    EncodedExpr enc = encoder_.encode_expr(tape, sentence);
    return affine(enc.cls, tape.param(head_.get("head_w")), tape.param(head_.get("head_b")));
  }

  Expr sentence_loss(Tape& tape, const AnnotatedSentence& s) const {
    Expr logits = logits_expr(tape, s.sentence);
    Expr loss = tape.bce_with_logits_sum(logits, classifier_target(mode_, s, schema_));
    if (cfg_.positive_weight != 1.0 && !s.zero_cardinal())
      loss = tape.scale(loss, cfg_.positive_weight);
    return loss;
  }

  ClassifierMode mode_;
  TransformerEncoder encoder_;
  RelationSchema schema_;
  TrainConfig cfg_;
  ParamStore head_;
  TrainLog log_;
  bool trained_ = false;
};

}  // namespace rexzero

#endif  // REXZERO_ZEROCARD_HPP
