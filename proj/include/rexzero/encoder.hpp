#ifndef REXZERO_ENCODER_HPP
#define REXZERO_ENCODER_HPP

#include <atomic>
#include <map>
#include <string>
#include <vector>

#include "rexzero/autograd.hpp"
#include "rexzero/corpus.hpp"

namespace rexzero {

enum class EncoderVariant { Pretrained, Scratch };

inline std::string to_string(EncoderVariant v) {
  return v == EncoderVariant::Pretrained ? "pretrained" : "scratch";
}
inline EncoderVariant encoder_variant_from_string(const std::string& s) {
  if (s == "pretrained") return EncoderVariant::Pretrained;
  if (s == "scratch") return EncoderVariant::Scratch;
  throw ConfigError("unknown encoder variant: " + s);
}

struct EncoderConfig {
  EncoderVariant variant = EncoderVariant::Scratch;
  int hidden = 128;      // h
  bool cased = true;
  int max_length = 128;  // sentinel plus at most max_length-1 tokens
  int layers = 2;
  int heads = 4;
  int ffn = 256;
  int vocab_cap = 50000;
  std::uint64_t seed = 1;
  // Pretrained encoders are only ever constructed by loading a checkpoint.
  std::string pretrained_path;

  void validate() const {
    if (hidden <= 0) throw ConfigError("encoder: hidden must be positive");
    if (max_length < 2) throw ConfigError("encoder: max_length must be >= 2");
    if (layers < 1 || heads < 1 || ffn < 1) throw ConfigError("encoder: bad scratch shape");
    if (hidden % heads != 0) throw ConfigError("encoder: heads must divide hidden");
  }

  json to_json() const {
    json j;
    j["variant"] = rexzero::to_string(variant);
    j["hidden"] = hidden;
    j["cased"] = cased;
    j["max_length"] = max_length;
    j["layers"] = layers;
    j["heads"] = heads;
    j["ffn"] = ffn;
    j["vocab_cap"] = vocab_cap;
    j["seed"] = seed;
    if (!pretrained_path.empty()) j["pretrained_path"] = pretrained_path;
    return j;
  }
  static EncoderConfig from_json(const json& j) {
    EncoderConfig c;
    if (j.contains("variant")) c.variant = encoder_variant_from_string(j["variant"]);
    if (j.contains("hidden")) c.hidden = j["hidden"].get<int>();
    if (j.contains("cased")) c.cased = j["cased"].get<bool>();
    if (j.contains("max_length")) c.max_length = j["max_length"].get<int>();
    if (j.contains("layers")) c.layers = j["layers"].get<int>();
    if (j.contains("heads")) c.heads = j["heads"].get<int>();
    if (j.contains("ffn")) c.ffn = j["ffn"].get<int>();
    if (j.contains("vocab_cap")) c.vocab_cap = j["vocab_cap"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("pretrained_path")) c.pretrained_path = j["pretrained_path"].get<std::string>();
    c.validate();
    return c;
  }
};

// id 0 is the unknown bucket, id 1 the CLS sentinel. Entries keep
// first-seen order so builds are reproducible.
class Vocabulary {
public:
  static constexpr int kUnk = 0;
  static constexpr int kCls = 1;

  Vocabulary() {
    add("[UNK]");
    add("[CLS]");
  }

  static Vocabulary build(const std::vector<AnnotatedSentence>& sentences, bool cased, int cap) {
    Vocabulary v;
    for (const auto& s : sentences) {
      for (const auto& tok : s.sentence.tokens) {
        if (v.size() >= cap + 2) return v;
        v.add(cased ? tok : to_lower(tok));
      }
    }
    return v;
  }

  int add(const std::string& item) {
    auto it = index_.find(item);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(items_.size());
    items_.push_back(item);
    index_.emplace(item, id);
    return id;
  }

  int lookup(const std::string& token, bool cased) const {
    auto it = index_.find(cased ? token : to_lower(token));
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& item) const { return index_.count(item) > 0; }
  int size() const { return static_cast<int>(items_.size()); }
  const std::vector<std::string>& items() const { return items_; }

  std::uint64_t hash() const {
    std::string joined;
    for (const auto& i : items_) {
      joined += i;
      joined += '\n';
    }
    return fnv1a(joined);
  }

  void save(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& i : items_) {
      out += i;
      out += '\n';
    }
    write_file(path, out);
  }
  static Vocabulary load(const std::filesystem::path& path) {
    std::string content = read_file(path);
    Vocabulary v;
    v.items_.clear();
    v.index_.clear();
    std::size_t start = 0;
    while (start < content.size()) {
      std::size_t nl = content.find('\n', start);
      if (nl == std::string::npos) nl = content.size();
      v.add(content.substr(start, nl - start));
      start = nl + 1;
    }
    if (v.size() < 2) throw DataError("vocabulary file too small: " + path.string());
    return v;
  }

  // Greedy longest-match subword segmentation with "##" continuations;
  // a token with no usable prefix becomes a single unknown piece.
  std::vector<int> segment(const std::string& token, bool cased) const {
    std::string t = cased ? token : to_lower(token);
    std::vector<int> pieces;
    std::size_t at = 0;
    while (at < t.size()) {
      std::size_t len = t.size() - at;
      int found = -1;
      while (len > 0) {
        std::string piece = (at == 0) ? t.substr(0, len) : "##" + t.substr(at, len);
        auto it = index_.find(piece);
        if (it != index_.end()) {
          found = it->second;
          break;
        }
        --len;
      }
      if (found < 0) return {kUnk};
      pieces.push_back(found);
      at += len;
    }
    return pieces;
  }

private:
  std::vector<std::string> items_;
  std::map<std::string, int> index_;
};

struct SentenceEncoding {
  Eigen::VectorXd cls_vector;
  Matrix token_vectors;  // one row per surviving sentence token
};

// Graph-side view of one encoded sentence.
struct EncodedExpr {
  Expr all;                     // (1 + pieces) x h, row 0 is the sentinel
  std::vector<int> token_rows;  // sentence token index -> row in `all`
  Expr cls;                     // 1 x h
  Expr tokens;                  // n x h gathered at token_rows
};

// Bidirectional self-attention encoder over whole tokens (scratch) or
// checkpoint-defined subword pieces (pretrained). Pre-norm residual blocks.
class TransformerEncoder {
public:
  // Scratch construction: vocabulary comes from the training corpus.
  TransformerEncoder(const EncoderConfig& cfg, const std::vector<AnnotatedSentence>& vocab_source)
      : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.variant == EncoderVariant::Pretrained)
      throw ContractError("pretrained encoders are constructed via load()");
    vocab_ = Vocabulary::build(vocab_source, cfg_.cased, cfg_.vocab_cap);
    subword_ = false;
    build_params();
    store_.init_uniform(derive_seed(cfg_.seed, "encoder/init"));
  }

  static TransformerEncoder load(const std::filesystem::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    EncoderConfig cfg = EncoderConfig::from_json(manifest.at("config"));
    TransformerEncoder enc(cfg, Vocabulary::load(dir / "vocab.txt"),
                           manifest.at("subword").get<bool>());
    enc.store_.load(dir / "params.bin");
    std::uint64_t expect = manifest.at("vocab_hash").get<std::uint64_t>();
    if (enc.vocab_.hash() != expect)
      throw DataError("vocabulary hash mismatch in " + dir.string());
    return enc;
  }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["config"] = cfg_.to_json();
    manifest["subword"] = subword_;
    manifest["vocab_hash"] = vocab_.hash();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    vocab_.save(dir / "vocab.txt");
    store_.save(dir / "params.bin");
  }

  const EncoderConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  bool subword() const { return subword_; }
  long truncation_count() const { return truncation_count_->load(); }

  void set_frozen(bool frozen) { frozen_ = frozen; }
  std::vector<Parameter*> trainable_parameters() const {
    return frozen_ ? std::vector<Parameter*>{} : store_.all();
  }
  std::size_t parameter_count() const { return store_.parameter_count(); }

  // Builds the forward graph on the caller's tape so heads can backprop
  // through the encoder (full fine-tuning).
  EncodedExpr encode_expr(Tape& tape, const Sentence& sentence) const {
    std::vector<int> piece_ids = {Vocabulary::kCls};
    std::vector<int> token_rows;
    bool truncated = false;
    for (const auto& tok : sentence.tokens) {
      std::vector<int> pieces = subword_ ? vocab_.segment(tok, cfg_.cased)
                                         : std::vector<int>{vocab_.lookup(tok, cfg_.cased)};
      if (static_cast<int>(piece_ids.size() + pieces.size()) > cfg_.max_length) {
        truncated = true;
        break;
      }
      token_rows.push_back(static_cast<int>(piece_ids.size()));
      piece_ids.insert(piece_ids.end(), pieces.begin(), pieces.end());
    }
    if (truncated) truncation_count_->fetch_add(1);

    int m = static_cast<int>(piece_ids.size());
    std::vector<int> positions(m);
    for (int i = 0; i < m; ++i) positions[i] = i;

    Expr x = tape.add(tape.gather_rows(store_.get("tok_emb"), piece_ids),
                      tape.gather_rows(store_.get("pos_emb"), positions));
    x = tape.layer_norm(x, tape.param(store_.get("emb_ln_g")), tape.param(store_.get("emb_ln_b")));

    int dk = cfg_.hidden / cfg_.heads;
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string p = "layer" + std::to_string(l) + "/";
      Expr normed = tape.layer_norm(x, tape.param(store_.get(p + "attn_ln_g")),
                                    tape.param(store_.get(p + "attn_ln_b")));
      Expr q = affine(normed, tape.param(store_.get(p + "wq")), tape.param(store_.get(p + "wq_b")));
      Expr k = affine(normed, tape.param(store_.get(p + "wk")), tape.param(store_.get(p + "wk_b")));
      Expr v = affine(normed, tape.param(store_.get(p + "wv")), tape.param(store_.get(p + "wv_b")));
      std::vector<Expr> heads;
      for (int hh = 0; hh < cfg_.heads; ++hh) {
        Expr qi = tape.slice_cols(q, hh * dk, dk);
        Expr ki = tape.slice_cols(k, hh * dk, dk);
        Expr vi = tape.slice_cols(v, hh * dk, dk);
        Expr scores = tape.scale(tape.matmul(qi, tape.transpose(ki)), 1.0 / std::sqrt(dk));
        heads.push_back(tape.matmul(tape.softmax_rows(scores), vi));
      }
      Expr attn = affine(tape.concat_cols(heads), tape.param(store_.get(p + "wo")),
                         tape.param(store_.get(p + "wo_b")));
      x = tape.add(x, attn);

      Expr normed2 = tape.layer_norm(x, tape.param(store_.get(p + "ffn_ln_g")),
                                     tape.param(store_.get(p + "ffn_ln_b")));
      Expr h1 = tape.relu(
          affine(normed2, tape.param(store_.get(p + "w1")), tape.param(store_.get(p + "w1_b"))));
      Expr h2 = affine(h1, tape.param(store_.get(p + "w2")), tape.param(store_.get(p + "w2_b")));
      x = tape.add(x, h2);
    }
    x = tape.layer_norm(x, tape.param(store_.get("out_ln_g")), tape.param(store_.get("out_ln_b")));

    EncodedExpr out;
    out.all = x;
    out.token_rows = token_rows;
    out.cls = tape.slice_rows(x, 0, 1);
    if (!token_rows.empty()) {
      std::vector<Expr> rows;
      rows.reserve(token_rows.size());
      // Contiguous whole-token case needs no gather.
      bool contiguous = !subword_;
      if (contiguous) {
        out.tokens = tape.slice_rows(x, 1, static_cast<int>(token_rows.size()));
      } else {
        for (int r : token_rows) rows.push_back(tape.slice_rows(x, r, 1));
        out.tokens = tape.concat_rows(rows);
      }
    } else {
      out.tokens = tape.slice_rows(x, 0, 0);
    }
    return out;
  }

  // Evaluation-mode encoding: forward only, deterministic.
  SentenceEncoding encode(const Sentence& sentence) const {
    Tape tape;
    EncodedExpr e = encode_expr(tape, sentence);
    SentenceEncoding enc;
    enc.cls_vector = e.cls.value().row(0).transpose();
    enc.token_vectors = e.tokens.value();
    return enc;
  }

private:
  TransformerEncoder(const EncoderConfig& cfg, Vocabulary vocab, bool subword)
      : cfg_(cfg), vocab_(std::move(vocab)), subword_(subword) {
    cfg_.validate();
    build_params();
  }

  void build_params() {
    store_.add("tok_emb", vocab_.size(), cfg_.hidden);
    store_.add("pos_emb", cfg_.max_length, cfg_.hidden);
    add_ln("emb_ln");
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string p = "layer" + std::to_string(l) + "/";
      for (const char* w : {"wq", "wk", "wv", "wo"}) {
        store_.add(p + w, cfg_.hidden, cfg_.hidden);
        store_.add(p + w + std::string("_b"), 1, cfg_.hidden);
      }
      add_ln(p + "attn_ln");
      store_.add(p + "w1", cfg_.hidden, cfg_.ffn);
      store_.add(p + "w1_b", 1, cfg_.ffn);
      store_.add(p + "w2", cfg_.ffn, cfg_.hidden);
      store_.add(p + "w2_b", 1, cfg_.hidden);
      add_ln(p + "ffn_ln");
    }
    add_ln("out_ln");
  }

  void add_ln(const std::string& name) {
    Parameter& g = store_.add(name + "_g", 1, cfg_.hidden);
    g.value.setOnes();
    store_.add(name + "_b", 1, cfg_.hidden);
  }

  EncoderConfig cfg_;
  Vocabulary vocab_;
  bool subword_ = false;
  bool frozen_ = false;
  ParamStore store_;
  std::shared_ptr<std::atomic<long>> truncation_count_ = std::make_shared<std::atomic<long>>(0);
};

// Constructs the encoder a config asks for; scratch variants build their
// vocabulary from the given corpus.
inline TransformerEncoder make_encoder(const EncoderConfig& cfg,
                                       const std::vector<AnnotatedSentence>& vocab_source) {
  if (cfg.variant == EncoderVariant::Pretrained) {
    if (cfg.pretrained_path.empty())
      throw ConfigError("pretrained encoder requires pretrained_path");
    return TransformerEncoder::load(cfg.pretrained_path);
  }
  return TransformerEncoder(cfg, vocab_source);
}

}  // namespace rexzero

#endif  // REXZERO_ENCODER_HPP
