#include <catch2/catch_amalgamated.hpp>

#include "rexzero/corpus.hpp"
#include "testutil.hpp"

using namespace rexzero;
using namespace rexzero::test;

TEST_CASE("make_sentence normalizes whitespace and rejects empty input") {
  Sentence s = make_sentence("a", "  Paul   Allen  ", true);
  REQUIRE(s.tokens == std::vector<std::string>{"Paul", "Allen"});
  REQUIRE(s.text == "Paul Allen");
  REQUIRE_THROWS_AS(make_sentence("b", "   ", true), DataError);
}

TEST_CASE("align_entity_spans returns the leftmost occurrence") {
  Sentence s = sentence_of("a b c b");
  EntityMention m = align_entity_spans(s, "b");
  REQUIRE(m.start == 1);
  REQUIRE(m.end == 1);

  Sentence paul = sentence_of(
      "Paul Allen , a co-founder of Microsoft , paid the bills for aircraft designer Burt Rutan");
  EntityMention pa = align_entity_spans(paul, "Paul Allen");
  REQUIRE(pa.start == 0);
  REQUIRE(pa.end == 1);
  REQUIRE(pa.surface == "Paul Allen");

  REQUIRE_THROWS_AS(align_entity_spans(sentence_of("a b"), "c"), DataError);
}

TEST_CASE("load_jsonl parses records, aligns spans, and deduplicates") {
  auto dir = temp_dir("corpus-load");
  RelationSchema schema({"/business/company/founders", "/business/person/company"});
  std::string lines =
      R"({"id":"s1","sentText":"nothing here","relationMentions":[]})"
      "\n"
      R"({"id":"s2","sentText":"Paul Allen , a co-founder of Microsoft , paid the bills","relationMentions":[{"em1Text":"Microsoft","em2Text":"Paul Allen","label":"/business/company/founders"},{"em1Text":"Microsoft","em2Text":"Paul Allen","label":"/business/company/founders"}]})"
      "\n";
  write_file(dir / "c.jsonl", lines);
  auto loaded = load_jsonl(dir / "c.jsonl", schema, true);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[0].zero_cardinal());
  REQUIRE(loaded[1].tuples.size() == 1);  // identical tuple repeated twice collapses
  const auto& t = loaded[1].tuples[0];
  REQUIRE(t.subject.surface == "Microsoft");
  REQUIRE(t.object.surface == "Paul Allen");
  REQUIRE(t.object.start == 0);
  REQUIRE(t.object.end == 1);
  REQUIRE(t.relation == "/business/company/founders");
}

TEST_CASE("load_jsonl error paths carry the offending detail") {
  auto dir = temp_dir("corpus-err");
  RelationSchema schema({"/r/a"});

  write_file(dir / "bad.jsonl", "{\"id\":\"x\"\n");
  try {
    load_jsonl(dir / "bad.jsonl", schema, true);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line() == 1);
  }

  write_file(dir / "label.jsonl",
             R"({"id":"s","sentText":"a b","relationMentions":[{"em1Text":"a","em2Text":"b","label":"/r/unknown"}]})"
             "\n");
  REQUIRE_THROWS_WITH(load_jsonl(dir / "label.jsonl", schema, true),
                      Catch::Matchers::ContainsSubstring("/r/unknown"));

  write_file(dir / "surface.jsonl",
             R"({"id":"sid9","sentText":"a b","relationMentions":[{"em1Text":"zz","em2Text":"b","label":"/r/a"}]})"
             "\n");
  try {
    load_jsonl(dir / "surface.jsonl", schema, true);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("sid9") != std::string::npos);
    REQUIRE(msg.find("zz") != std::string::npos);
  }
}

TEST_CASE("load_jsonl is order-preserving and idempotent") {
  auto dir = temp_dir("corpus-idem");
  SyntheticConfig cfg;
  cfg.n_train = 50;
  cfg.n_validation = 10;
  cfg.n_test = 10;
  auto corpus = generate_synthetic(cfg);
  write_jsonl(dir / "w.jsonl", corpus.train.wz.sentences);
  auto once = load_jsonl(dir / "w.jsonl", corpus.schema, true);
  auto twice = load_jsonl(dir / "w.jsonl", corpus.schema, true);
  REQUIRE(once.size() == corpus.train.wz.sentences.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    REQUIRE(once[i].sentence.id == corpus.train.wz.sentences[i].sentence.id);
    REQUIRE(once[i].sentence.text == corpus.train.wz.sentences[i].sentence.text);
    REQUIRE(once[i].tuples == twice[i].tuples);
    REQUIRE(once[i].tuples == corpus.train.wz.sentences[i].tuples);
  }
}

TEST_CASE("build_settings concatenates and enforces its contract") {
  RelationSchema schema = small_schema();
  std::mt19937_64 rng(3);
  std::vector<AnnotatedSentence> positive, zeros;
  for (int i = 0; i < 2; ++i) {
    auto s = random_annotated(rng, schema, "p" + std::to_string(i));
    if (s.tuples.empty()) s.tuples.push_back(tuple_of(s.sentence, 0, 0, 1, 1, schema.relations()[0]));
    positive.push_back(s);
  }
  for (int i = 0; i < 3; ++i) {
    auto s = random_annotated(rng, schema, "z" + std::to_string(i));
    s.tuples.clear();
    zeros.push_back(s);
  }
  auto pair = build_settings(positive, zeros, Partition::Test);
  REQUIRE(pair.nz.sentences.size() == 2);
  REQUIRE(pair.wz.sentences.size() == 5);
  REQUIRE(pair.nz.setting == Setting::NZ);
  REQUIRE(pair.wz.setting == Setting::WZ);
  // WZ = NZ followed by the zeros, disjoint ids.
  for (std::size_t i = 0; i < positive.size(); ++i)
    REQUIRE(pair.wz.sentences[i].sentence.id == positive[i].sentence.id);
  for (std::size_t i = 0; i < zeros.size(); ++i)
    REQUIRE(pair.wz.sentences[positive.size() + i].sentence.id == zeros[i].sentence.id);

  REQUIRE_THROWS_AS(build_settings(zeros, zeros, Partition::Test), ContractError);
  REQUIRE_THROWS_AS(build_settings(positive, positive, Partition::Test), ContractError);

  auto degenerate = build_settings(positive, {}, Partition::Train);
  REQUIRE(degenerate.nz.sentences.size() == degenerate.wz.sentences.size());
}

TEST_CASE("validate_statistics reports per-cell pass/fail") {
  SyntheticConfig cfg;
  cfg.n_train = 40;
  cfg.n_validation = 10;
  cfg.n_test = 10;
  cfg.zero_fraction = 0.5;
  auto corpus = generate_synthetic(cfg);
  auto stats = count_stats(corpus.train.wz);

  std::map<std::string, std::map<Partition, DatasetSetting>> wz;
  wz["syn"][Partition::Train] = corpus.train.wz;

  ExpectedCounts good{"syn", Partition::Train, stats.positive, stats.tuples, stats.zeros};
  ExpectedCounts bad{"syn", Partition::Train, stats.positive + 1, stats.tuples, stats.zeros};
  ExpectedCounts missing{"other", Partition::Test, 0, 0, 0};
  auto rows = validate_statistics(wz, {good, bad, missing});
  REQUIRE(rows.size() == 9);
  REQUIRE((rows[0].pass && rows[1].pass && rows[2].pass));
  REQUIRE_FALSE(rows[3].pass);  // positive count off by one
  REQUIRE(rows[4].pass);
  for (int i = 6; i < 9; ++i) {
    REQUIRE_FALSE(rows[i].pass);
    REQUIRE(rows[i].actual == -1);
  }
  std::string csv = stat_rows_to_csv(rows);
  REQUIRE(csv.rfind("dataset,partition,quantity,expected,actual,pass\n", 0) == 0);

  // all-zero expectations against an absent-zero corpus
  std::map<std::string, std::map<Partition, DatasetSetting>> empty_wz;
  DatasetSetting empty_setting;
  empty_setting.setting = Setting::WZ;
  // counting an empty WZ setting yields all-zero rows that match zero expectations
  empty_wz["e"][Partition::Train] = empty_setting;
  auto zero_rows = validate_statistics(empty_wz, {{"e", Partition::Train, 0, 0, 0}});
  for (const auto& r : zero_rows) REQUIRE(r.pass);
}

TEST_CASE("generate_synthetic honors sizes, zero fraction, and clue structure") {
  SyntheticConfig cfg;
  cfg.relations = 5;
  cfg.n_train = 2000;
  cfg.n_validation = 100;
  cfg.n_test = 100;
  cfg.zero_fraction = 0.5;
  auto corpus = generate_synthetic(cfg);
  REQUIRE(corpus.schema.size() == 5);

  // direct enumeration of emitted records
  long pos = 0, zero = 0;
  for (const auto& s : corpus.train.wz.sentences) (s.zero_cardinal() ? zero : pos)++;
  REQUIRE(pos == 1000);
  REQUIRE(zero == 1000);

  for (const auto& s : corpus.train.wz.sentences) {
    long clues = 0;
    for (const auto& tok : s.sentence.tokens)
      if (tok.rfind("clue_", 0) == 0) ++clues;
    if (s.zero_cardinal()) {
      REQUIRE(clues == 0);
    } else {
      REQUIRE(clues == 1);
      REQUIRE(s.tuples.size() == 1);
      for (const auto& t : s.tuples) {
        validate_mention(t.subject, s.sentence);
        validate_mention(t.object, s.sentence);
        REQUIRE(corpus.schema.contains(t.relation));
        REQUIRE_FALSE(t.subject == t.object);
      }
    }
  }
}

TEST_CASE("generate_synthetic determinism and seed sensitivity") {
  SyntheticConfig cfg;
  cfg.n_train = 60;
  cfg.n_validation = 20;
  cfg.n_test = 20;
  auto a = generate_synthetic(cfg);
  auto b = generate_synthetic(cfg);
  auto dir = temp_dir("corpus-det");
  write_jsonl(dir / "a.jsonl", a.train.wz.sentences);
  write_jsonl(dir / "b.jsonl", b.train.wz.sentences);
  REQUIRE(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));

  cfg.seed = 999;
  auto c = generate_synthetic(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train.wz.sentences.size(); ++i)
    if (a.train.wz.sentences[i].sentence.text != c.train.wz.sentences[i].sentence.text)
      any_diff = true;
  REQUIRE(any_diff);
}

TEST_CASE("generate_synthetic degenerate and error cases") {
  SyntheticConfig cfg;
  cfg.n_train = 30;
  cfg.n_validation = 10;
  cfg.n_test = 10;
  cfg.zero_fraction = 0.0;
  auto corpus = generate_synthetic(cfg);
  REQUIRE(corpus.train.nz.sentences.size() == corpus.train.wz.sentences.size());

  SyntheticConfig bad = cfg;
  bad.relations = 0;
  REQUIRE_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad = cfg;
  bad.zero_fraction = 1.0;
  REQUIRE_THROWS_AS(generate_synthetic(bad), ConfigError);
  bad = cfg;
  bad.n_validation = 0;
  REQUIRE_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("mention invariants hold over random corpora") {
  RelationSchema schema = small_schema(4);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    auto s = random_annotated(rng, schema, "f" + std::to_string(i));
    for (const auto& t : s.tuples) {
      validate_mention(t.subject, s.sentence);
      validate_mention(t.object, s.sentence);
      REQUIRE(t.subject.surface ==
              join_tokens(s.sentence.tokens, t.subject.start, t.subject.end + 1));
      REQUIRE(t.object.surface ==
              join_tokens(s.sentence.tokens, t.object.start, t.object.end + 1));
    }
  }
}

TEST_CASE("relation schema rejects duplicates and hashes stably") {
  REQUIRE_THROWS_AS(RelationSchema({"/a", "/a"}), ConfigError);
  RelationSchema s1({"/a", "/b"});
  RelationSchema s2({"/a", "/b"});
  RelationSchema s3({"/b", "/a"});
  REQUIRE(s1.hash() == s2.hash());
  REQUIRE(s1.hash() != s3.hash());
  REQUIRE(s1.index_of("/b") == 1);
  REQUIRE_THROWS_AS(s1.index_of("/c"), DataError);

  auto dir = temp_dir("schema");
  s1.save(dir / "schema.json");
  auto loaded = RelationSchema::load(dir / "schema.json");
  REQUIRE(loaded.relations() == s1.relations());
}
