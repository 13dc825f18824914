#ifndef REXZERO_EXTRACTORS_HPP
#define REXZERO_EXTRACTORS_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rexzero/zerocard.hpp"

namespace rexzero {

// Per-token 0/1 tags for one tagging role.
struct TagSequence {
  std::vector<int> tags;

  static TagSequence zeros(int n) {
    TagSequence t;
    t.tags.assign(n, 0);
    return t;
  }
};

// One decoding step of the pointer extractor. `relation` indexes the schema;
// a value equal to the schema size is the end-of-sequence marker.
struct DecodeStep {
  int s_start = -1;
  int s_end = -1;
  int o_start = -1;
  int o_end = -1;
  int relation = -1;

  bool is_eos(int schema_size) const { return relation == schema_size; }
};

inline bool valid_decode_step(const DecodeStep& step, int n_tokens, int schema_size) {
  if (step.relation < 0 || step.relation >= schema_size) return false;
  if (step.s_start < 0 || step.s_end < step.s_start || step.s_end >= n_tokens) return false;
  if (step.o_start < 0 || step.o_end < step.o_start || step.o_end >= n_tokens) return false;
  if (step.s_start == step.o_start && step.s_end == step.o_end) return false;
  return true;
}

// Uniform surface for all joint extraction models; the two built-ins below
// plus any externally registered adapter implement it.
class ExtractorInterface {
public:
  virtual ~ExtractorInterface() = default;
  virtual const std::string& name() const = 0;
  virtual void train(const DatasetSetting& train_set, const DatasetSetting& validation_set,
                     const TrainConfig& config) = 0;
  virtual std::vector<RelationTuple> extract(const Sentence& sentence) const = 0;
  virtual bool trained() const = 0;
  // Setting of the data the model was trained on; meaningful once trained.
  virtual Setting trained_setting() const = 0;
};

// ---------------------------------------------------------------------------
// Shared decode helpers (pure, unit-tested directly).
// ---------------------------------------------------------------------------

// Pairs each start with the nearest end at or after it; unpaired starts drop.
inline std::vector<std::pair<int, int>> pair_spans(const std::vector<int>& starts,
                                                   const std::vector<int>& ends) {
  std::vector<std::pair<int, int>> spans;
  for (int s : starts) {
    int best = -1;
    for (int e : ends)
      if (e >= s && (best < 0 || e < best)) best = e;
    if (best >= 0) spans.push_back({s, best});
  }
  return spans;
}

inline std::vector<std::pair<int, int>> decode_tag_spans(const Eigen::VectorXd& start_probs,
                                                         const Eigen::VectorXd& end_probs,
                                                         double threshold) {
  std::vector<int> starts, ends;
  for (int i = 0; i < start_probs.size(); ++i)
    if (start_probs(i) >= threshold) starts.push_back(i);
  for (int i = 0; i < end_probs.size(); ++i)
    if (end_probs(i) >= threshold) ends.push_back(i);
  return pair_spans(starts, ends);
}

inline EntityMention mention_from_span(const Sentence& sentence, int start, int end) {
  EntityMention m;
  m.start = start;
  m.end = end;
  m.surface = join_tokens(sentence.tokens, start, end + 1);
  return m;
}

// ---------------------------------------------------------------------------
// Cascade 0/1 tagging extractor: stage 1 tags subject starts/ends over the
// token vectors; stage 2, conditioned on a subject-span representation, tags
// object starts/ends once per relation. Zero-cardinal sentences train both
// stages toward all-zero tags; stage 2 is then conditioned on the sentence
// mean since there is no subject to condition on.
// ---------------------------------------------------------------------------

struct CascadeTargets {
  TagSequence subj_start;
  TagSequence subj_end;
  struct Stage2 {
    std::pair<int, int> subject;  // conditioning span
    Matrix obj_start;             // n x c
    Matrix obj_end;               // n x c
  };
  std::vector<Stage2> stage2;
  bool pseudo_subject = false;  // true when conditioning on the sentence mean
};

inline CascadeTargets make_cascade_targets(const AnnotatedSentence& s, int n_tokens,
                                           const RelationSchema& schema) {
  CascadeTargets t;
  t.subj_start = TagSequence::zeros(n_tokens);
  t.subj_end = TagSequence::zeros(n_tokens);
  std::map<std::pair<int, int>, std::vector<const RelationTuple*>> by_subject;
  for (const auto& tup : s.tuples) {
    if (tup.subject.end >= n_tokens || tup.object.end >= n_tokens) continue;  // truncated away
    by_subject[{tup.subject.start, tup.subject.end}].push_back(&tup);
  }
  for (const auto& [span, tups] : by_subject) {
    t.subj_start.tags[span.first] = 1;
    t.subj_end.tags[span.second] = 1;
    CascadeTargets::Stage2 st;
    st.subject = span;
    st.obj_start = Matrix::Zero(n_tokens, schema.size());
    st.obj_end = Matrix::Zero(n_tokens, schema.size());
    for (const auto* tup : tups) {
      int r = schema.index_of(tup->relation);
      st.obj_start(tup->object.start, r) = 1.0;
      st.obj_end(tup->object.end, r) = 1.0;
    }
    t.stage2.push_back(std::move(st));
  }
  if (t.stage2.empty()) {
    CascadeTargets::Stage2 st;
    st.subject = {0, n_tokens - 1};
    st.obj_start = Matrix::Zero(n_tokens, schema.size());
    st.obj_end = Matrix::Zero(n_tokens, schema.size());
    t.stage2.push_back(std::move(st));
    t.pseudo_subject = true;
  }
  return t;
}

struct CascadeOptions {
  double tag_threshold = 0.5;
};

class CascadeExtractor : public ExtractorInterface {
public:
  CascadeExtractor(TransformerEncoder encoder, RelationSchema schema, CascadeOptions opts = {})
      : encoder_(std::move(encoder)), schema_(std::move(schema)), opts_(opts) {
    int h = encoder_.config().hidden;
    int c = schema_.size();
    head_.add("subj_start_w", h, 1);
    head_.add("subj_start_w_b", 1, 1);
    head_.add("subj_end_w", h, 1);
    head_.add("subj_end_w_b", 1, 1);
    head_.add("obj_start_w", h, c);
    head_.add("obj_start_w_b", 1, c);
    head_.add("obj_end_w", h, c);
    head_.add("obj_end_w_b", 1, c);
    head_.init_uniform(derive_seed(encoder_.config().seed, "cascade/head"));
  }

  const std::string& name() const override { return name_; }
  bool trained() const override { return trained_; }
  Setting trained_setting() const override { return trained_setting_; }
  const RelationSchema& schema() const { return schema_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const TrainLog& train_log() const { return log_; }

  // All head probabilities read as 0: the empty output is representable.
  void set_clamp_output(bool clamp) { clamp_output_ = clamp; }

  std::vector<Parameter*> trainable_parameters() const {
    auto params = encoder_.trainable_parameters();
    for (auto* p : head_.all()) params.push_back(p);
    return params;
  }

  void train(const DatasetSetting& train_set, const DatasetSetting& validation_set,
             const TrainConfig& config) override {
    if (train_set.sentences.empty()) throw ContractError("empty extractor training set");
    config.validate();
    cfg_ = config;
    AdamWConfig opt_cfg;
    opt_cfg.lr = config.learning_rate;
    opt_cfg.weight_decay = config.weight_decay;
    auto params = trainable_parameters();
    AdamW opt(params, opt_cfg);
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "cascade/shuffle"));

    std::vector<std::size_t> order(train_set.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    log_ = TrainLog{};
    std::vector<Matrix> best;
    int bad_epochs = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double epoch_loss = 0.0;
      long batches = 0;
      for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
        std::size_t take = std::min<std::size_t>(config.batch_size, order.size() - at);
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
      trained_ = true;
      double val_f1 = validation_f1(validation_set);
      log_.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches), val_f1});
      if (log_.best_epoch < 0 || val_f1 > log_.best_validation_f1) {
        log_.best_epoch = epoch;
        log_.best_validation_f1 = val_f1;
        best = snapshot_params(params);
        bad_epochs = 0;
      } else if (++bad_epochs >= config.patience) {
        break;
      }
    }
    restore_params(params, best);
    trained_setting_ = train_set.setting;
  }

  std::vector<RelationTuple> extract(const Sentence& sentence) const override {
    if (!trained_) throw ContractError("extractor not trained");
    return decode(sentence);
  }

  // Stage-1 sigmoid probabilities, one entry per surviving token.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> subject_tag_probs(const Sentence& sentence) const {
    Tape tape;
    EncodedExpr enc = encoder_.encode_expr(tape, sentence);
    return {head_probs(tape, enc.tokens, "subj_start_w").col(0),
            head_probs(tape, enc.tokens, "subj_end_w").col(0)};
  }

  // Stage-2 sigmoid probabilities (n x relations) under one subject span.
  std::pair<Matrix, Matrix> object_tag_probs(const Sentence& sentence,
                                             std::pair<int, int> subject) const {
    Tape tape;
    EncodedExpr enc = encoder_.encode_expr(tape, sentence);
    int n = static_cast<int>(enc.token_rows.size());
    Expr conditioned = subject_conditioned(tape, enc.tokens, subject.first, subject.second, n);
    return {head_probs(tape, conditioned, "obj_start_w"),
            head_probs(tape, conditioned, "obj_end_w")};
  }

  // Forward-only training loss of one sentence.
  double loss(const AnnotatedSentence& s) const {
    Tape tape;
    return sentence_loss(tape, s).scalar();
  }

  // Forward plus backward; gradients accumulate into the parameters.
  double backprop(const AnnotatedSentence& s) const {
    Tape tape;
    Expr l = sentence_loss(tape, s);
    tape.backward(l);
    return l.scalar();
  }

  void save(const std::filesystem::path& dir) const {
    if (!trained_) throw ContractError("refusing to save an untrained extractor");
    std::filesystem::create_directories(dir);
    encoder_.save(dir / "encoder");
    head_.save(dir / "head.bin");
    json manifest;
    manifest["extractor"] = name_;
    manifest["schema"] = schema_.relations();
    manifest["schema_hash"] = schema_.hash();
    manifest["tag_threshold"] = opts_.tag_threshold;
    manifest["train_config"] = cfg_.to_json();
    manifest["trained_setting"] = to_string(trained_setting_);
    manifest["best_epoch"] = log_.best_epoch;
    manifest["validation_f1"] = log_.best_validation_f1;
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  }

  static CascadeExtractor load(const std::filesystem::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    if (manifest.at("extractor").get<std::string>() != "cascade")
      throw DataError("not a cascade checkpoint: " + dir.string());
    RelationSchema schema(manifest.at("schema").get<std::vector<std::string>>());
    CascadeOptions opts;
    opts.tag_threshold = manifest.at("tag_threshold").get<double>();
    CascadeExtractor ex(TransformerEncoder::load(dir / "encoder"), std::move(schema), opts);
    ex.head_.load(dir / "head.bin");
    ex.cfg_ = TrainConfig::from_json(manifest.at("train_config"));
    ex.trained_ = true;
    ex.trained_setting_ = setting_from_string(manifest.at("trained_setting"));
    ex.log_.best_epoch = manifest.value("best_epoch", -1);
    ex.log_.best_validation_f1 = manifest.value("validation_f1", 0.0);
    return ex;
  }

private:
  Expr subject_conditioned(Tape& tape, Expr tokens, int start, int end, int n) const {
    Expr span_mean = tape.mean_rows(tape.slice_rows(tokens, start, end - start + 1));
    return tape.add(tokens, tape.broadcast_row(span_mean, n));
  }

  Expr sentence_loss(Tape& tape, const AnnotatedSentence& s) const {
    EncodedExpr enc = encoder_.encode_expr(tape, s.sentence);
    int n = static_cast<int>(enc.token_rows.size());
    if (n == 0) return tape.input(Matrix::Zero(1, 1));
    CascadeTargets targets = make_cascade_targets(s, n, schema_);

    auto to_col = [&](const TagSequence& t) {
      Matrix m(n, 1);
      for (int i = 0; i < n; ++i) m(i, 0) = t.tags[i];
      return m;
    };
    Expr loss = tape.bce_with_logits_sum(
        affine(enc.tokens, tape.param(head_.get("subj_start_w")),
               tape.param(head_.get("subj_start_w_b"))),
        to_col(targets.subj_start));
    loss = tape.add(loss, tape.bce_with_logits_sum(
                              affine(enc.tokens, tape.param(head_.get("subj_end_w")),
                                     tape.param(head_.get("subj_end_w_b"))),
                              to_col(targets.subj_end)));
    for (const auto& st : targets.stage2) {
      Expr conditioned = subject_conditioned(tape, enc.tokens, st.subject.first,
                                             st.subject.second, n);
      loss = tape.add(loss, tape.bce_with_logits_sum(
                                affine(conditioned, tape.param(head_.get("obj_start_w")),
                                       tape.param(head_.get("obj_start_w_b"))),
                                st.obj_start));
      loss = tape.add(loss, tape.bce_with_logits_sum(
                                affine(conditioned, tape.param(head_.get("obj_end_w")),
                                       tape.param(head_.get("obj_end_w_b"))),
                                st.obj_end));
    }
    return loss;
  }

  Matrix head_probs(Tape& tape, Expr tokens, const std::string& head) const {
    Expr logits =
        affine(tokens, tape.param(head_.get(head)), tape.param(head_.get(head + "_b")));
    Matrix p = (1.0 / (1.0 + (-logits.value().array()).exp())).matrix();
    if (clamp_output_) p.setZero();
    return p;
  }

  std::vector<RelationTuple> decode(const Sentence& sentence) const {
    Tape tape;
    EncodedExpr enc = encoder_.encode_expr(tape, sentence);
    int n = static_cast<int>(enc.token_rows.size());
    std::vector<RelationTuple> out;
    if (n == 0) return out;

    Matrix subj_start = head_probs(tape, enc.tokens, "subj_start_w");
    Matrix subj_end = head_probs(tape, enc.tokens, "subj_end_w");
    auto subjects = decode_tag_spans(subj_start.col(0), subj_end.col(0), opts_.tag_threshold);
    for (const auto& subj : subjects) {
      Expr conditioned = subject_conditioned(tape, enc.tokens, subj.first, subj.second, n);
      Matrix obj_start = head_probs(tape, conditioned, "obj_start_w");
      Matrix obj_end = head_probs(tape, conditioned, "obj_end_w");
      for (int r = 0; r < schema_.size(); ++r) {
        auto objects = decode_tag_spans(obj_start.col(r), obj_end.col(r), opts_.tag_threshold);
        for (const auto& obj : objects) {
          RelationTuple t;
          t.subject = mention_from_span(sentence, subj.first, subj.second);
          t.object = mention_from_span(sentence, obj.first, obj.second);
          t.relation = schema_.relations()[r];
          append_unique_tuple(out, std::move(t));
        }
      }
    }
    return out;
  }

  double validation_f1(const DatasetSetting& validation_set) const {
    std::map<std::string, std::vector<RelationTuple>> preds;
    for (const auto& s : validation_set.sentences)
      preds[s.sentence.id] = decode(s.sentence);
    return score(preds, validation_set.sentences, MatchMode::Exact).f1;
  }

  std::string name_ = "cascade";
  TransformerEncoder encoder_;
  RelationSchema schema_;
  CascadeOptions opts_;
  TrainConfig cfg_;
  ParamStore head_;
  TrainLog log_;
  bool trained_ = false;
  bool clamp_output_ = false;
  Setting trained_setting_ = Setting::NZ;
};

// ---------------------------------------------------------------------------
// Pointer-network extractor: encoder-decoder where each step emits four
// pointer distributions over token positions plus a relation classification
// over schema-plus-EOS. Zero-cardinal sentences train toward EOS as the very
// first step; greedy decoding stops at EOS or max_steps.
// ---------------------------------------------------------------------------

inline std::vector<DecodeStep> make_pointer_gold(const AnnotatedSentence& s, int n_tokens,
                                                 const RelationSchema& schema) {
  std::vector<DecodeStep> steps;
  for (const auto& t : s.tuples) {
    if (t.subject.end >= n_tokens || t.object.end >= n_tokens) continue;
    DecodeStep step;
    step.s_start = t.subject.start;
    step.s_end = t.subject.end;
    step.o_start = t.object.start;
    step.o_end = t.object.end;
    step.relation = schema.index_of(t.relation);
    steps.push_back(step);
  }
  std::sort(steps.begin(), steps.end(), [](const DecodeStep& a, const DecodeStep& b) {
    return std::tie(a.s_start, a.o_start, a.relation, a.s_end, a.o_end) <
           std::tie(b.s_start, b.o_start, b.relation, b.s_end, b.o_end);
  });
  DecodeStep eos;
  eos.relation = schema.size();
  steps.push_back(eos);
  return steps;
}

struct PointerOptions {
  int max_steps = 10;
  int relation_emb = 32;
};

class PointerExtractor : public ExtractorInterface {
public:
  PointerExtractor(TransformerEncoder encoder, RelationSchema schema, PointerOptions opts = {})
      : encoder_(std::move(encoder)), schema_(std::move(schema)), opts_(opts) {
    int h = encoder_.config().hidden;
    int c = schema_.size();
    int di = 2 * h + opts_.relation_emb;
    head_.add("rel_emb", c, opts_.relation_emb);
    head_.add("start_x", 1, di);
    for (const char* g : {"z", "r", "n"}) {
      head_.add(std::string("gru_w") + g, di, h);
      head_.add(std::string("gru_u") + g, h, h);
      head_.add(std::string("gru_") + g + "_b", 1, h);
    }
    for (const char* p : {"ss", "se", "os", "oe"}) {
      head_.add(std::string("ptr_") + p + "_w", h, h);
      head_.add(std::string("ptr_") + p + "_w_b", 1, h);
    }
    head_.add("rel_w", 2 * h, c + 1);
    head_.add("rel_w_b", 1, c + 1);
    head_.init_uniform(derive_seed(encoder_.config().seed, "pointer/head"));
  }

  const std::string& name() const override { return name_; }
  bool trained() const override { return trained_; }
  Setting trained_setting() const override { return trained_setting_; }
  const RelationSchema& schema() const { return schema_; }
  const TransformerEncoder& encoder() const { return encoder_; }
  const TrainLog& train_log() const { return log_; }

  // Forces the relation decision to EOS at every step: the empty output is
  // representable regardless of learned weights.
  void set_force_eos(bool force) { force_eos_ = force; }

  std::vector<Parameter*> trainable_parameters() const {
    auto params = encoder_.trainable_parameters();
    for (auto* p : head_.all()) params.push_back(p);
    return params;
  }

  void train(const DatasetSetting& train_set, const DatasetSetting& validation_set,
             const TrainConfig& config) override {
    if (train_set.sentences.empty()) throw ContractError("empty extractor training set");
    config.validate();
    cfg_ = config;
    AdamWConfig opt_cfg;
    opt_cfg.lr = config.learning_rate;
    opt_cfg.weight_decay = config.weight_decay;
    auto params = trainable_parameters();
    AdamW opt(params, opt_cfg);
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "pointer/shuffle"));

    std::vector<std::size_t> order(train_set.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    log_ = TrainLog{};
    std::vector<Matrix> best;
    int bad_epochs = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double epoch_loss = 0.0;
      long batches = 0;
      for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
        std::size_t take = std::min<std::size_t>(config.batch_size, order.size() - at);
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
      trained_ = true;
      double val_f1 = validation_f1(validation_set);
      log_.epochs.push_back({epoch, epoch_loss / static_cast<double>(batches), val_f1});
      if (log_.best_epoch < 0 || val_f1 > log_.best_validation_f1) {
        log_.best_epoch = epoch;
        log_.best_validation_f1 = val_f1;
        best = snapshot_params(params);
        bad_epochs = 0;
      } else if (++bad_epochs >= config.patience) {
        break;
      }
    }
    restore_params(params, best);
    trained_setting_ = train_set.setting;
  }

  std::vector<RelationTuple> extract(const Sentence& sentence) const override {
    if (!trained_) throw ContractError("extractor not trained");
    return decode(sentence);
  }

  // Forward-only training loss of one sentence.
  double loss(const AnnotatedSentence& s) const {
    Tape tape;
    return sentence_loss(tape, s).scalar();
  }

  // Forward plus backward; gradients accumulate into the parameters.
  double backprop(const AnnotatedSentence& s) const {
    Tape tape;
    Expr l = sentence_loss(tape, s);
    tape.backward(l);
    return l.scalar();
  }

  void save(const std::filesystem::path& dir) const {
    if (!trained_) throw ContractError("refusing to save an untrained extractor");
    std::filesystem::create_directories(dir);
    encoder_.save(dir / "encoder");
    head_.save(dir / "head.bin");
    json manifest;
    manifest["extractor"] = name_;
    manifest["schema"] = schema_.relations();
    manifest["schema_hash"] = schema_.hash();
    manifest["max_steps"] = opts_.max_steps;
    manifest["relation_emb"] = opts_.relation_emb;
    manifest["train_config"] = cfg_.to_json();
    manifest["trained_setting"] = to_string(trained_setting_);
    manifest["best_epoch"] = log_.best_epoch;
    manifest["validation_f1"] = log_.best_validation_f1;
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  }

  static PointerExtractor load(const std::filesystem::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    if (manifest.at("extractor").get<std::string>() != "pointer")
      throw DataError("not a pointer checkpoint: " + dir.string());
    RelationSchema schema(manifest.at("schema").get<std::vector<std::string>>());
    PointerOptions opts;
    opts.max_steps = manifest.at("max_steps").get<int>();
    opts.relation_emb = manifest.at("relation_emb").get<int>();
    PointerExtractor ex(TransformerEncoder::load(dir / "encoder"), std::move(schema), opts);
    ex.head_.load(dir / "head.bin");
    ex.cfg_ = TrainConfig::from_json(manifest.at("train_config"));
    ex.trained_ = true;
    ex.trained_setting_ = setting_from_string(manifest.at("trained_setting"));
    ex.log_.best_epoch = manifest.value("best_epoch", -1);
    ex.log_.best_validation_f1 = manifest.value("validation_f1", 0.0);
    return ex;
  }

private:
  Expr gru_step(Tape& tape, Expr x, Expr h) const {
    auto W = [&](const std::string& n) { return tape.param(head_.get(n)); };
    Expr z = tape.sigmoid(tape.add(affine(x, W("gru_wz"), W("gru_z_b")), tape.matmul(h, W("gru_uz"))));
    Expr r = tape.sigmoid(tape.add(affine(x, W("gru_wr"), W("gru_r_b")), tape.matmul(h, W("gru_ur"))));
    Expr n = tape.tanh_(tape.add(affine(x, W("gru_wn"), W("gru_n_b")),
                                 tape.matmul(tape.mul_elem(r, h), W("gru_un"))));
    Expr keep = tape.mul_elem(z, h);
    Expr fresh = tape.mul_elem(tape.add_scalar(tape.scale(z, -1.0), 1.0), n);
    return tape.add(keep, fresh);
  }

  Expr pointer_scores(Tape& tape, Expr tokens, Expr state, const std::string& which) const {
    Expr projected = affine(state, tape.param(head_.get("ptr_" + which + "_w")),
                            tape.param(head_.get("ptr_" + which + "_w_b")));
    return tape.transpose(tape.matmul(tokens, tape.transpose(projected)));  // 1 x n
  }

  Expr relation_logits(Tape& tape, Expr tokens, Expr state) const {
    Expr joined = tape.concat_cols({state, tape.mean_rows(tokens)});
    return affine(joined, tape.param(head_.get("rel_w")), tape.param(head_.get("rel_w_b")));
  }

  Expr span_mean(Tape& tape, Expr tokens, int start, int end) const {
    int lo = std::min(start, end), hi = std::max(start, end);
    return tape.mean_rows(tape.slice_rows(tokens, lo, hi - lo + 1));
  }

  Expr step_input(Tape& tape, Expr tokens, const DecodeStep& step) const {
    Expr rel = tape.gather_rows(head_.get("rel_emb"), {step.relation});
    return tape.concat_cols({span_mean(tape, tokens, step.s_start, step.s_end),
                             span_mean(tape, tokens, step.o_start, step.o_end), rel});
  }

  Expr sentence_loss(Tape& tape, const AnnotatedSentence& s) const {
    EncodedExpr enc = encoder_.encode_expr(tape, s.sentence);
    int n = static_cast<int>(enc.token_rows.size());
    if (n == 0) return tape.input(Matrix::Zero(1, 1));
    std::vector<DecodeStep> gold = make_pointer_gold(s, n, schema_);

    Expr state = enc.cls;
    Expr x = tape.param(head_.get("start_x"));
    Expr loss = tape.input(Matrix::Zero(1, 1));
    for (const auto& step : gold) {
      state = gru_step(tape, x, state);
      loss = tape.add(loss, tape.softmax_ce(relation_logits(tape, enc.tokens, state), step.relation));
      if (!step.is_eos(schema_.size())) {
        loss = tape.add(loss, tape.softmax_ce(pointer_scores(tape, enc.tokens, state, "ss"), step.s_start));
        loss = tape.add(loss, tape.softmax_ce(pointer_scores(tape, enc.tokens, state, "se"), step.s_end));
        loss = tape.add(loss, tape.softmax_ce(pointer_scores(tape, enc.tokens, state, "os"), step.o_start));
        loss = tape.add(loss, tape.softmax_ce(pointer_scores(tape, enc.tokens, state, "oe"), step.o_end));
        x = step_input(tape, enc.tokens, step);  // teacher forcing
      }
    }
    return loss;
  }

  std::vector<RelationTuple> decode(const Sentence& sentence) const {
    Tape tape;
    EncodedExpr enc = encoder_.encode_expr(tape, sentence);
    int n = static_cast<int>(enc.token_rows.size());
    std::vector<RelationTuple> out;
    if (n == 0) return out;

    auto argmax_row = [](const Matrix& row) {
      int best = 0;
      for (int i = 1; i < row.cols(); ++i)
        if (row(0, i) > row(0, best)) best = i;
      return best;
    };

    Expr state = enc.cls;
    Expr x = tape.param(head_.get("start_x"));
    for (int t = 0; t < opts_.max_steps; ++t) {
      state = gru_step(tape, x, state);
      int rel = force_eos_ ? schema_.size()
                           : argmax_row(relation_logits(tape, enc.tokens, state).value());
      if (rel == schema_.size()) break;  // EOS
      DecodeStep step;
      step.relation = rel;
      step.s_start = argmax_row(pointer_scores(tape, enc.tokens, state, "ss").value());
      step.s_end = argmax_row(pointer_scores(tape, enc.tokens, state, "se").value());
      step.o_start = argmax_row(pointer_scores(tape, enc.tokens, state, "os").value());
      step.o_end = argmax_row(pointer_scores(tape, enc.tokens, state, "oe").value());
      if (valid_decode_step(step, n, schema_.size())) {
        RelationTuple tup;
        tup.subject = mention_from_span(sentence, step.s_start, step.s_end);
        tup.object = mention_from_span(sentence, step.o_start, step.o_end);
        tup.relation = schema_.relations()[rel];
        append_unique_tuple(out, std::move(tup));
      }
      x = step_input(tape, enc.tokens, step);  // continue from the prediction
    }
    return out;
  }

  double validation_f1(const DatasetSetting& validation_set) const {
    std::map<std::string, std::vector<RelationTuple>> preds;
    for (const auto& s : validation_set.sentences)
      preds[s.sentence.id] = decode(s.sentence);
    return score(preds, validation_set.sentences, MatchMode::Exact).f1;
  }

  std::string name_ = "pointer";
  TransformerEncoder encoder_;
  RelationSchema schema_;
  PointerOptions opts_;
  TrainConfig cfg_;
  ParamStore head_;
  TrainLog log_;
  bool trained_ = false;
  bool force_eos_ = false;
  Setting trained_setting_ = Setting::NZ;
};

// ---------------------------------------------------------------------------
// Extractor registry. The built-in factories construct fresh cascade/pointer
// models; external adapters register a ready instance under their own name.
// Externally registered adapters are how other published joint extraction
// families (relation-specific matrix tagging, handshaking token-pair linking,
// table filling, multi-stage bidirectional tagging) plug into the harness
// without being reimplemented here.
// ---------------------------------------------------------------------------

class ExtractorRegistry {
public:
  struct Context {
    EncoderConfig encoder;
    RelationSchema schema;
    const std::vector<AnnotatedSentence>* vocab_source = nullptr;
  };
  using Factory = std::function<std::shared_ptr<ExtractorInterface>(const Context&)>;

  ExtractorRegistry() {
    factories_["cascade"] = [](const Context& ctx) {
      return std::make_shared<CascadeExtractor>(
          make_encoder(ctx.encoder, *ctx.vocab_source), ctx.schema);
    };
    factories_["pointer"] = [](const Context& ctx) {
      return std::make_shared<PointerExtractor>(
          make_encoder(ctx.encoder, *ctx.vocab_source), ctx.schema);
    };
  }

  void register_external(std::shared_ptr<ExtractorInterface> adapter) {
    if (!adapter) throw ContractError("null extractor adapter");
    const std::string& name = adapter->name();
    if (factories_.count(name) || externals_.count(name))
      throw ContractError("extractor name already registered: " + name);
    externals_[name] = std::move(adapter);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [n, _] : factories_) out.push_back(n);
    for (const auto& [n, _] : externals_) out.push_back(n);
    return out;
  }

  bool is_external(const std::string& name) const { return externals_.count(name) > 0; }

  std::shared_ptr<ExtractorInterface> create(const std::string& name, const Context& ctx) const {
    auto fit = factories_.find(name);
    if (fit != factories_.end()) {
      if (!ctx.vocab_source) throw ContractError("built-in extractor needs a vocabulary source");
      return fit->second(ctx);
    }
    auto eit = externals_.find(name);
    if (eit != externals_.end()) return eit->second;
    throw ConfigError("unknown extractor: " + name);
  }

  static ExtractorRegistry& global() {
    static ExtractorRegistry registry;
    return registry;
  }

private:
  std::map<std::string, Factory> factories_;
  std::map<std::string, std::shared_ptr<ExtractorInterface>> externals_;
};

}  // namespace rexzero

#endif  // REXZERO_EXTRACTORS_HPP
