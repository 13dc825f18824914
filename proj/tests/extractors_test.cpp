#include <catch2/catch_amalgamated.hpp>

#include "rexzero/extractors.hpp"
#include "testutil.hpp"

using namespace rexzero;
using namespace rexzero::test;

namespace {

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.hidden = 32;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ffn = 64;
  cfg.max_length = 32;
  cfg.seed = 5;
  return cfg;
}

SyntheticCorpus tiny_corpus() {
  SyntheticConfig cfg;
  cfg.relations = 3;
  cfg.n_train = 120;
  cfg.n_validation = 60;
  cfg.n_test = 60;
  cfg.zero_fraction = 0.5;
  cfg.vocab_size = 50;
  cfg.seed = 77;
  return generate_synthetic(cfg);
}

TrainConfig fast_train(int epochs, int batch = 16) {
  TrainConfig tc;
  tc.batch_size = batch;
  tc.max_epochs = epochs;
  tc.patience = epochs;
  tc.seed = 13;
  return tc;
}

// Canned-output extractor standing in for an externally hosted model.
class StubExtractor : public ExtractorInterface {
public:
  StubExtractor(std::string name, Setting setting, bool is_trained = true)
      : name_(std::move(name)), setting_(setting), trained_(is_trained) {}
  const std::string& name() const override { return name_; }
  void train(const DatasetSetting&, const DatasetSetting&, const TrainConfig&) override {
    trained_ = true;
  }
  std::vector<RelationTuple> extract(const Sentence& s) const override {
    auto it = canned_.find(s.id);
    return it == canned_.end() ? std::vector<RelationTuple>{} : it->second;
  }
  bool trained() const override { return trained_; }
  Setting trained_setting() const override { return setting_; }
  std::map<std::string, std::vector<RelationTuple>> canned_;

private:
  std::string name_;
  Setting setting_;
  bool trained_;
};

}  // namespace

TEST_CASE("pair_spans follows the nearest-at-or-after rule") {
  REQUIRE(pair_spans({1}, {0, 3}) == std::vector<std::pair<int, int>>{{1, 3}});
  REQUIRE(pair_spans({1, 4}, {2, 5}) == std::vector<std::pair<int, int>>{{1, 2}, {4, 5}});
  REQUIRE(pair_spans({3}, {0, 1}).empty());  // unpaired start drops
  REQUIRE(pair_spans({2}, {2}) == std::vector<std::pair<int, int>>{{2, 2}});
}

TEST_CASE("decode_tag_spans thresholds then pairs") {
  Eigen::VectorXd start(5), end(5);
  start << 0.9, 0.1, 0.0, 0.8, 0.0;
  end << 0.0, 0.95, 0.0, 0.0, 0.6;
  auto spans = decode_tag_spans(start, end, 0.5);
  REQUIRE(spans == std::vector<std::pair<int, int>>{{0, 1}, {3, 4}});
  REQUIRE(decode_tag_spans(start, end, 0.99).empty());
}

TEST_CASE("cascade target construction") {
  RelationSchema schema = small_schema(3);
  Sentence s = sentence_of("t0 t1 t2 t3 t4 t5");
  AnnotatedSentence a;
  a.sentence = s;
  a.tuples.push_back(tuple_of(s, 0, 1, 5, 5, schema.relations()[2]));

  CascadeTargets t = make_cascade_targets(a, 6, schema);
  REQUIRE(t.subj_start.tags == std::vector<int>{1, 0, 0, 0, 0, 0});
  REQUIRE(t.subj_end.tags == std::vector<int>{0, 1, 0, 0, 0, 0});
  REQUIRE(t.stage2.size() == 1);
  REQUIRE(t.stage2[0].subject == std::pair<int, int>{0, 1});
  REQUIRE(t.stage2[0].obj_start(5, 2) == 1.0);
  REQUIRE(t.stage2[0].obj_end(5, 2) == 1.0);
  REQUIRE(t.stage2[0].obj_start.sum() == 1.0);
  REQUIRE_FALSE(t.pseudo_subject);

  AnnotatedSentence zero;
  zero.sentence = s;
  CascadeTargets z = make_cascade_targets(zero, 6, schema);
  REQUIRE(z.subj_start.tags == std::vector<int>(6, 0));
  REQUIRE(z.subj_end.tags == std::vector<int>(6, 0));
  REQUIRE(z.stage2.size() == 1);
  REQUIRE(z.pseudo_subject);
  REQUIRE(z.stage2[0].obj_start.isZero());
  REQUIRE(z.stage2[0].obj_end.isZero());

  // tuples beyond the encoded window are dropped from the targets
  CascadeTargets trunc = make_cascade_targets(a, 4, schema);
  REQUIRE(trunc.pseudo_subject);
}

TEST_CASE("shared subjects merge into one stage-2 block") {
  RelationSchema schema = small_schema(3);
  Sentence s = sentence_of("t0 t1 t2 t3 t4 t5");
  AnnotatedSentence a;
  a.sentence = s;
  a.tuples.push_back(tuple_of(s, 0, 0, 2, 2, schema.relations()[0]));
  a.tuples.push_back(tuple_of(s, 0, 0, 4, 4, schema.relations()[1]));
  CascadeTargets t = make_cascade_targets(a, 6, schema);
  REQUIRE(t.stage2.size() == 1);
  REQUIRE(t.stage2[0].obj_start(2, 0) == 1.0);
  REQUIRE(t.stage2[0].obj_start(4, 1) == 1.0);
}

TEST_CASE("pointer gold sequences") {
  RelationSchema schema = small_schema(3);
  Sentence s = sentence_of("t0 t1 t2 t3 t4 t5");
  AnnotatedSentence zero;
  zero.sentence = s;
  auto z = make_pointer_gold(zero, 6, schema);
  REQUIRE(z.size() == 1);
  REQUIRE(z[0].is_eos(schema.size()));

  AnnotatedSentence two;
  two.sentence = s;
  two.tuples.push_back(tuple_of(s, 3, 3, 1, 1, schema.relations()[1]));
  two.tuples.push_back(tuple_of(s, 0, 0, 5, 5, schema.relations()[0]));
  auto g = make_pointer_gold(two, 6, schema);
  REQUIRE(g.size() == 3);  // two tuples plus the end marker
  REQUIRE(g[0].s_start == 0);  // canonical order sorts by subject start first
  REQUIRE(g[1].s_start == 3);
  REQUIRE(g[2].is_eos(schema.size()));
}

TEST_CASE("decode step validity") {
  int c = 3;
  DecodeStep good{0, 1, 3, 4, 1};
  REQUIRE(valid_decode_step(good, 6, c));
  DecodeStep backwards{2, 1, 3, 4, 1};
  REQUIRE_FALSE(valid_decode_step(backwards, 6, c));
  DecodeStep self{1, 2, 1, 2, 1};
  REQUIRE_FALSE(valid_decode_step(self, 6, c));
  DecodeStep oob{0, 1, 3, 9, 1};
  REQUIRE_FALSE(valid_decode_step(oob, 6, c));
  DecodeStep eos;
  eos.relation = c;
  REQUIRE_FALSE(valid_decode_step(eos, 6, c));
  REQUIRE(eos.is_eos(c));
}

TEST_CASE("cascade learns a tiny corpus; extraction is deterministic and valid") {
  auto corpus = tiny_corpus();
  CascadeExtractor ex(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  REQUIRE_THROWS_AS(ex.extract(sentence_of("a b")), ContractError);  // untrained
  ex.train(corpus.train.nz, corpus.validation.nz, fast_train(60, 8));
  REQUIRE(ex.trained_setting() == Setting::NZ);

  std::map<std::string, std::vector<RelationTuple>> preds;
  for (const auto& s : corpus.train.nz.sentences) preds[s.sentence.id] = ex.extract(s.sentence);
  auto rep = score(preds, corpus.train.nz.sentences, MatchMode::Exact);
  REQUIRE(rep.f1 >= 0.8);  // overfit capacity on its own training data

  const auto& s0 = corpus.train.nz.sentences[0].sentence;
  REQUIRE(ex.extract(s0) == ex.extract(s0));

  // output validity under arbitrary inputs, including unseen tokens
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    int n = 1 + static_cast<int>(rng() % 20);
    std::vector<std::string> toks;
    for (int k = 0; k < n; ++k) toks.push_back("zz" + std::to_string(rng() % 90));
    Sentence s = sentence_of(join_tokens(toks), "fz");
    for (const auto& t : ex.extract(s)) {
      validate_mention(t.subject, s);
      validate_mention(t.object, s);
      REQUIRE(corpus.schema.contains(t.relation));
    }
  }
}

TEST_CASE("cascade emits overlapping tuples sharing a subject") {
  RelationSchema schema({"/r/a", "/r/b"});
  // one sentence, two tuples under the same subject, overfit hard
  Sentence s = sentence_of("alpha beta gamma delta epsilon");
  AnnotatedSentence a;
  a.sentence = s;
  a.tuples.push_back(tuple_of(s, 0, 0, 2, 2, "/r/a"));
  a.tuples.push_back(tuple_of(s, 0, 0, 4, 4, "/r/b"));
  DatasetSetting train;
  train.setting = Setting::NZ;
  train.partition = Partition::Train;
  for (int i = 0; i < 8; ++i) {
    auto copy = a;
    copy.sentence.id = "o" + std::to_string(i);
    train.sentences.push_back(copy);
  }
  CascadeExtractor ex(TransformerEncoder(tiny_encoder(), train.sentences), schema);
  ex.train(train, train, fast_train(40));
  auto out = ex.extract(s);
  REQUIRE(out.size() == 2);
  REQUIRE(out[0].subject == out[1].subject);
}

TEST_CASE("clamped cascade output decodes to the empty set") {
  auto corpus = tiny_corpus();
  CascadeExtractor ex(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  ex.train(corpus.train.nz, corpus.validation.nz, fast_train(2));
  ex.set_clamp_output(true);
  for (const auto& s : corpus.test.wz.sentences) REQUIRE(ex.extract(s.sentence).empty());
  ex.set_clamp_output(false);
}

TEST_CASE("pointer learns a tiny corpus and respects EOS") {
  auto corpus = tiny_corpus();
  PointerExtractor ex(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  ex.train(corpus.train.nz, corpus.validation.nz, fast_train(30));

  std::map<std::string, std::vector<RelationTuple>> preds;
  for (const auto& s : corpus.train.nz.sentences) preds[s.sentence.id] = ex.extract(s.sentence);
  auto rep = score(preds, corpus.train.nz.sentences, MatchMode::Exact);
  REQUIRE(rep.f1 >= 0.8);

  // forced EOS at the first step: empty output everywhere
  ex.set_force_eos(true);
  for (const auto& s : corpus.test.wz.sentences) REQUIRE(ex.extract(s.sentence).empty());
  ex.set_force_eos(false);

  // determinism and validity
  const auto& s0 = corpus.train.nz.sentences[0].sentence;
  REQUIRE(ex.extract(s0) == ex.extract(s0));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    int n = 1 + static_cast<int>(rng() % 20);
    std::vector<std::string> toks;
    for (int k = 0; k < n; ++k) toks.push_back("q" + std::to_string(rng() % 90));
    Sentence s = sentence_of(join_tokens(toks), "fz");
    for (const auto& t : ex.extract(s)) {
      validate_mention(t.subject, s);
      validate_mention(t.object, s);
      REQUIRE(corpus.schema.contains(t.relation));
    }
  }
}

TEST_CASE("extractor training rejects an empty set") {
  auto corpus = tiny_corpus();
  CascadeExtractor ex(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  DatasetSetting empty;
  REQUIRE_THROWS_AS(ex.train(empty, corpus.validation.nz, fast_train(1)), ContractError);
  PointerExtractor px(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  REQUIRE_THROWS_AS(px.train(empty, corpus.validation.nz, fast_train(1)), ContractError);
}

TEST_CASE("extractor checkpoints round trip") {
  auto corpus = tiny_corpus();
  auto dir = temp_dir("ex-ckpt");

  CascadeExtractor cx(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  cx.train(corpus.train.nz, corpus.validation.nz, fast_train(3));
  cx.save(dir / "cascade");
  auto cback = CascadeExtractor::load(dir / "cascade");
  REQUIRE(cback.trained_setting() == Setting::NZ);
  for (int i = 0; i < 10; ++i) {
    const auto& s = corpus.test.nz.sentences[i].sentence;
    REQUIRE(cx.extract(s) == cback.extract(s));
  }

  PointerExtractor px(TransformerEncoder(tiny_encoder(), corpus.train.nz.sentences),
                      corpus.schema);
  px.train(corpus.train.wz, corpus.validation.wz, fast_train(3));
  px.save(dir / "pointer");
  auto pback = PointerExtractor::load(dir / "pointer");
  REQUIRE(pback.trained_setting() == Setting::WZ);
  for (int i = 0; i < 10; ++i) {
    const auto& s = corpus.test.nz.sentences[i].sentence;
    REQUIRE(px.extract(s) == pback.extract(s));
  }

  REQUIRE_THROWS_AS(CascadeExtractor::load(dir / "pointer"), DataError);
}

TEST_CASE("registry lists built-ins and hosts external adapters") {
  ExtractorRegistry registry;
  auto names = registry.names();
  REQUIRE(std::find(names.begin(), names.end(), "cascade") != names.end());
  REQUIRE(std::find(names.begin(), names.end(), "pointer") != names.end());
  REQUIRE(names.size() == 2);

  auto adapter = std::make_shared<StubExtractor>("tplinker-external", Setting::NZ);
  registry.register_external(adapter);
  REQUIRE(registry.is_external("tplinker-external"));
  REQUIRE(registry.names().size() == 3);

  REQUIRE_THROWS_AS(registry.register_external(
                        std::make_shared<StubExtractor>("tplinker-external", Setting::NZ)),
                    ContractError);
  REQUIRE_THROWS_AS(
      registry.register_external(std::make_shared<StubExtractor>("cascade", Setting::NZ)),
      ContractError);

  auto corpus = tiny_corpus();
  ExtractorRegistry::Context ctx{tiny_encoder(), corpus.schema, &corpus.train.nz.sentences};
  auto built = registry.create("cascade", ctx);
  REQUIRE(built->name() == "cascade");
  REQUIRE_FALSE(built->trained());
  auto external = registry.create("tplinker-external", ctx);
  REQUIRE(external == adapter);
  REQUIRE_THROWS_AS(registry.create("missing", ctx), ConfigError);
}
