#ifndef REXZERO_CORPUS_HPP
#define REXZERO_CORPUS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "rexzero/common.hpp"

namespace rexzero {

using json = nlohmann::ordered_json;

// A whitespace-tokenized sentence. `text` is always the single-space join of
// `tokens`; no re-tokenization happens anywhere downstream.
struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::string text;
  bool cased = true;
};

inline Sentence make_sentence(std::string id, const std::string& text, bool cased) {
  Sentence s;
  s.id = std::move(id);
  s.tokens = split_whitespace(text);
  if (s.tokens.empty()) throw DataError("sentence '" + s.id + "' has no tokens");
  s.text = join_tokens(s.tokens);
  s.cased = cased;
  return s;
}

// Token-index span, inclusive on both ends.
struct EntityMention {
  int start = 0;
  int end = 0;
  std::string surface;

  friend bool operator==(const EntityMention& a, const EntityMention& b) {
    return a.start == b.start && a.end == b.end;
  }
};

struct RelationTuple {
  EntityMention subject;
  EntityMention object;
  std::string relation;

  friend bool operator==(const RelationTuple& a, const RelationTuple& b) {
    return a.subject == b.subject && a.object == b.object && a.relation == b.relation;
  }
};

class RelationSchema {
public:
  RelationSchema() = default;
  explicit RelationSchema(std::vector<std::string> relations)
      : relations_(std::move(relations)) {
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      if (!index_.emplace(relations_[i], static_cast<int>(i)).second)
        throw ConfigError("duplicate relation label: " + relations_[i]);
    }
  }

  const std::vector<std::string>& relations() const { return relations_; }
  int size() const { return static_cast<int>(relations_.size()); }
  bool contains(const std::string& label) const { return index_.count(label) > 0; }
  int index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw DataError("relation label outside schema: " + label);
    return it->second;
  }
  std::uint64_t hash() const {
    std::string joined;
    for (const auto& r : relations_) {
      joined += r;
      joined += '\n';
    }
    return fnv1a(joined);
  }

  static RelationSchema load(const std::filesystem::path& path) {
    json j = json::parse(read_file(path));
    if (!j.contains("relations") || !j["relations"].is_array())
      throw ConfigError("schema file missing 'relations' array: " + path.string());
    std::vector<std::string> labels;
    for (const auto& r : j["relations"]) labels.push_back(r.get<std::string>());
    return RelationSchema(std::move(labels));
  }
  void save(const std::filesystem::path& path) const {
    json j;
    j["relations"] = relations_;
    write_file(path, j.dump(2) + "\n");
  }

private:
  std::vector<std::string> relations_;
  std::map<std::string, int> index_;
};

// Sentence plus its (possibly empty) deduplicated tuple set. Kept as a vector
// in first-occurrence order so loading stays order-preserving.
struct AnnotatedSentence {
  Sentence sentence;
  std::vector<RelationTuple> tuples;

  bool zero_cardinal() const { return tuples.empty(); }
};

enum class Setting { NZ, WZ };
enum class Partition { Train, Validation, Test };

inline std::string to_string(Setting s) { return s == Setting::NZ ? "NZ" : "WZ"; }
inline std::string to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Validation: return "validation";
    default: return "test";
  }
}
inline Setting setting_from_string(const std::string& s) {
  if (s == "NZ") return Setting::NZ;
  if (s == "WZ") return Setting::WZ;
  throw ConfigError("unknown setting: " + s + " (expected NZ or WZ)");
}
inline Partition partition_from_string(const std::string& s) {
  if (s == "train") return Partition::Train;
  if (s == "validation") return Partition::Validation;
  if (s == "test") return Partition::Test;
  throw ConfigError("unknown partition: " + s);
}

struct DatasetSetting {
  Setting setting = Setting::NZ;
  Partition partition = Partition::Train;
  std::vector<AnnotatedSentence> sentences;
};

// Leftmost token-aligned occurrence of `surface` in the sentence.
inline EntityMention align_entity_spans(const Sentence& sentence, const std::string& surface) {
  std::vector<std::string> needle = split_whitespace(surface);
  if (needle.empty()) throw DataError("empty entity surface in sentence '" + sentence.id + "'");
  const auto& toks = sentence.tokens;
  if (needle.size() <= toks.size()) {
    for (std::size_t i = 0; i + needle.size() <= toks.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < needle.size(); ++k) {
        if (toks[i + k] != needle[k]) {
          match = false;
          break;
        }
      }
      if (match) {
        EntityMention m;
        m.start = static_cast<int>(i);
        m.end = static_cast<int>(i + needle.size() - 1);
        m.surface = join_tokens(needle);
        return m;
      }
    }
  }
  throw DataError("entity surface not found in sentence '" + sentence.id + "': " + surface);
}

inline void validate_mention(const EntityMention& m, const Sentence& s) {
  if (m.start < 0 || m.end < m.start || m.end >= static_cast<int>(s.tokens.size()))
    throw DataError("invalid mention span [" + std::to_string(m.start) + "," +
                    std::to_string(m.end) + "] in sentence '" + s.id + "'");
}

inline void append_unique_tuple(std::vector<RelationTuple>& tuples, RelationTuple t) {
  if (std::find(tuples.begin(), tuples.end(), t) == tuples.end())
    tuples.push_back(std::move(t));
}

// One JSONL record per sentence: {id, sentText, relationMentions:
// [{em1Text, em2Text, label}]}, mirroring the public NYT-style releases.
// em1 is the subject, em2 the object.
inline AnnotatedSentence parse_sentence_record(const json& rec, std::size_t line_no,
                                               const RelationSchema& schema, bool cased) {
  if (!rec.is_object()) throw ParseError(line_no, "record is not a JSON object");
  if (!rec.contains("sentText") || !rec["sentText"].is_string())
    throw ParseError(line_no, "missing string field 'sentText'");
  std::string id = rec.contains("id") ? rec["id"].get<std::string>()
                                      : "line-" + std::to_string(line_no);
  AnnotatedSentence out;
  try {
    out.sentence = make_sentence(id, rec["sentText"].get<std::string>(), cased);
  } catch (const DataError& e) {
    throw ParseError(line_no, e.what());
  }
  if (!rec.contains("relationMentions")) throw ParseError(line_no, "missing 'relationMentions'");
  if (!rec["relationMentions"].is_array())
    throw ParseError(line_no, "'relationMentions' is not an array");
  for (const auto& rm : rec["relationMentions"]) {
    if (!rm.contains("em1Text") || !rm.contains("em2Text") || !rm.contains("label"))
      throw ParseError(line_no, "relation mention missing em1Text/em2Text/label");
    std::string label = rm["label"].get<std::string>();
    if (!schema.contains(label)) throw DataError("relation label outside schema: " + label);
    RelationTuple t;
    t.subject = align_entity_spans(out.sentence, rm["em1Text"].get<std::string>());
    t.object = align_entity_spans(out.sentence, rm["em2Text"].get<std::string>());
    t.relation = label;
    append_unique_tuple(out.tuples, std::move(t));
  }
  return out;
}

inline std::vector<AnnotatedSentence> load_jsonl(const std::filesystem::path& path,
                                                 const RelationSchema& schema, bool cased) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path.string());
  std::vector<AnnotatedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    out.push_back(parse_sentence_record(rec, line_no, schema, cased));
  }
  return out;
}

inline json sentence_to_json(const AnnotatedSentence& s) {
  json rec;
  rec["id"] = s.sentence.id;
  rec["sentText"] = s.sentence.text;
  json mentions = json::array();
  for (const auto& t : s.tuples) {
    json m;
    m["em1Text"] = t.subject.surface;
    m["em2Text"] = t.object.surface;
    m["label"] = t.relation;
    mentions.push_back(std::move(m));
  }
  rec["relationMentions"] = std::move(mentions);
  return rec;
}

inline void write_jsonl(const std::filesystem::path& path,
                        const std::vector<AnnotatedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    out += sentence_to_json(s).dump();
    out += '\n';
  }
  write_file(path, out);
}

struct SettingPair {
  DatasetSetting nz;
  DatasetSetting wz;
};

// NZ = exactly the positive sentences; WZ = positives followed by zeros.
inline SettingPair build_settings(const std::vector<AnnotatedSentence>& positive,
                                  const std::vector<AnnotatedSentence>& zeros,
                                  Partition partition) {
  for (const auto& s : positive)
    if (s.zero_cardinal())
      throw ContractError("zero-cardinal sentence '" + s.sentence.id + "' in positive input");
  for (const auto& s : zeros)
    if (!s.zero_cardinal())
      throw ContractError("sentence '" + s.sentence.id + "' with tuples in zeros input");
  SettingPair pair;
  pair.nz.setting = Setting::NZ;
  pair.nz.partition = partition;
  pair.nz.sentences = positive;
  pair.wz.setting = Setting::WZ;
  pair.wz.partition = partition;
  pair.wz.sentences = positive;
  pair.wz.sentences.insert(pair.wz.sentences.end(), zeros.begin(), zeros.end());
  return pair;
}

struct DatasetStats {
  long positive = 0;
  long tuples = 0;
  long zeros = 0;
};

inline DatasetStats count_stats(const DatasetSetting& setting) {
  DatasetStats st;
  for (const auto& s : setting.sentences) {
    if (s.zero_cardinal()) {
      ++st.zeros;
    } else {
      ++st.positive;
      st.tuples += static_cast<long>(s.tuples.size());
    }
  }
  return st;
}

struct ExpectedCounts {
  std::string dataset;
  Partition partition = Partition::Train;
  long positive = 0;
  long tuples = 0;
  long zeros = 0;
};

struct StatRow {
  std::string dataset;
  Partition partition = Partition::Train;
  std::string quantity;  // "positive" | "tuples" | "zeros"
  long expected = 0;
  long actual = -1;  // -1 when the setting is absent
  bool pass = false;
};

// Mismatches become failing rows, never exceptions.
inline std::vector<StatRow> validate_statistics(
    const std::map<std::string, std::map<Partition, DatasetSetting>>& wz_settings,
    const std::vector<ExpectedCounts>& expected) {
  std::vector<StatRow> rows;
  for (const auto& exp : expected) {
    std::optional<DatasetStats> actual;
    auto dit = wz_settings.find(exp.dataset);
    if (dit != wz_settings.end()) {
      auto pit = dit->second.find(exp.partition);
      if (pit != dit->second.end()) actual = count_stats(pit->second);
    }
    auto add = [&](const std::string& quantity, long want, long got) {
      StatRow row;
      row.dataset = exp.dataset;
      row.partition = exp.partition;
      row.quantity = quantity;
      row.expected = want;
      row.actual = actual ? got : -1;
      row.pass = actual && want == got;
      rows.push_back(std::move(row));
    };
    add("positive", exp.positive, actual ? actual->positive : -1);
    add("tuples", exp.tuples, actual ? actual->tuples : -1);
    add("zeros", exp.zeros, actual ? actual->zeros : -1);
  }
  return rows;
}

inline std::string stat_rows_to_csv(const std::vector<StatRow>& rows) {
  std::string out = "dataset,partition,quantity,expected,actual,pass\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + to_string(r.partition) + "," + r.quantity + "," +
           std::to_string(r.expected) + "," + std::to_string(r.actual) + "," +
           (r.pass ? "true" : "false") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic clue-token corpus. Every positive sentence carries exactly one
// relation-specific clue token plus a subject and an object placeholder at
// random positions; zero-cardinal sentences carry no clue token (but may
// contain decoy placeholders, which is what makes them hard negatives for
// extractors trained without them).
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  int relations = 5;
  int n_train = 2000;
  int n_validation = 500;
  int n_test = 500;
  double zero_fraction = 0.5;
  int vocab_size = 120;
  std::uint64_t seed = 1;
  bool cased = true;
};

struct SyntheticCorpus {
  RelationSchema schema;
  SettingPair train;
  SettingPair validation;
  SettingPair test;
};

namespace detail {

inline std::string synth_relation_label(int r) { return "/syn/relation/r" + std::to_string(r); }
inline std::string synth_clue_token(int r) { return "clue_r" + std::to_string(r); }

constexpr int kEntityPool = 30;

inline std::vector<AnnotatedSentence> synth_sentences(const SyntheticConfig& cfg,
                                                      Partition partition, int n_pos, int n_zero,
                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto rand_int = [&](int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto filler = [&]() { return "w" + std::to_string(rand_int(0, cfg.vocab_size - 1)); };

  std::vector<AnnotatedSentence> out;
  const std::string prefix = to_string(partition) + "-";
  int index = 0;

  for (int i = 0; i < n_pos; ++i) {
    int n_fill = rand_int(6, 12);
    std::vector<std::string> fillers;
    for (int k = 0; k < n_fill; ++k) fillers.push_back(filler());

    int rel = rand_int(0, cfg.relations - 1);
    std::vector<std::string> sub_tokens = {"sub" + std::to_string(rand_int(0, kEntityPool - 1))};
    std::vector<std::string> obj_tokens = {"obj" + std::to_string(rand_int(0, kEntityPool - 1))};

    // Each block gets a filler gap; blocks sharing a gap keep subject-object-
    // clue order. Key = gap-major, block-minor so spans map back to blocks.
    std::vector<std::vector<std::string>> block_tokens = {
        sub_tokens, obj_tokens, {detail::synth_clue_token(rel)}};
    std::vector<std::pair<int, int>> tagged;  // (gap * 4 + block id, block id)
    for (int b = 0; b < 3; ++b) tagged.push_back({rand_int(0, n_fill) * 4 + b, b});
    std::sort(tagged.begin(), tagged.end());

    std::vector<std::string> tokens;
    std::vector<std::pair<int, int>> placed(3);  // span by block id
    std::size_t next = 0;
    for (int gap = 0; gap <= n_fill; ++gap) {
      while (next < tagged.size() && tagged[next].first / 4 == gap) {
        int block_id = tagged[next].second;
        placed[block_id] = {static_cast<int>(tokens.size()),
                            static_cast<int>(tokens.size() + block_tokens[block_id].size() - 1)};
        for (const auto& t : block_tokens[block_id]) tokens.push_back(t);
        ++next;
      }
      if (gap < n_fill) tokens.push_back(fillers[gap]);
    }

    AnnotatedSentence s;
    s.sentence = make_sentence(prefix + std::to_string(index++), join_tokens(tokens), cfg.cased);
    RelationTuple t;
    t.subject.start = placed[0].first;
    t.subject.end = placed[0].second;
    t.subject.surface = join_tokens(sub_tokens);
    t.object.start = placed[1].first;
    t.object.end = placed[1].second;
    t.object.surface = join_tokens(obj_tokens);
    t.relation = detail::synth_relation_label(rel);
    s.tuples.push_back(std::move(t));
    out.push_back(std::move(s));
  }

  for (int i = 0; i < n_zero; ++i) {
    int n_fill = rand_int(6, 12);
    std::vector<std::string> tokens;
    for (int k = 0; k < n_fill; ++k) tokens.push_back(filler());
    // Decoy placeholders, no clue token.
    if (rand_int(0, 9) < 8) {
      int n_decoys = rand_int(1, 2);
      for (int d = 0; d < n_decoys; ++d) {
        std::string decoy = (rand_int(0, 1) == 0 ? "sub" : "obj") +
                            std::to_string(rand_int(0, kEntityPool - 1));
        tokens.insert(tokens.begin() + rand_int(0, static_cast<int>(tokens.size())), decoy);
      }
    }
    AnnotatedSentence s;
    s.sentence = make_sentence(prefix + std::to_string(index++), join_tokens(tokens), cfg.cased);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.relations < 1) throw ConfigError("synthetic config: relations must be >= 1");
  if (cfg.n_train < 1 || cfg.n_validation < 1 || cfg.n_test < 1)
    throw ConfigError("synthetic config: partition sizes must be >= 1");
  if (cfg.zero_fraction < 0.0 || cfg.zero_fraction >= 1.0)
    throw ConfigError("synthetic config: zero_fraction must be in [0,1)");
  if (cfg.vocab_size < 1) throw ConfigError("synthetic config: vocab_size must be >= 1");

  std::vector<std::string> labels;
  for (int r = 0; r < cfg.relations; ++r) labels.push_back(detail::synth_relation_label(r));

  SyntheticCorpus corpus;
  corpus.schema = RelationSchema(std::move(labels));
  auto build = [&](Partition partition, int n, const char* tag) {
    int n_zero = static_cast<int>(std::lround(n * cfg.zero_fraction));
    int n_pos = n - n_zero;
    auto sentences = detail::synth_sentences(cfg, partition, n_pos, n_zero,
                                             derive_seed(cfg.seed, tag));
    std::vector<AnnotatedSentence> positive(sentences.begin(), sentences.begin() + n_pos);
    std::vector<AnnotatedSentence> zeros(sentences.begin() + n_pos, sentences.end());
    return build_settings(positive, zeros, partition);
  };
  corpus.train = build(Partition::Train, cfg.n_train, "synthetic/train");
  corpus.validation = build(Partition::Validation, cfg.n_validation, "synthetic/validation");
  corpus.test = build(Partition::Test, cfg.n_test, "synthetic/test");
  return corpus;
}

}  // namespace rexzero

#endif  // REXZERO_CORPUS_HPP
