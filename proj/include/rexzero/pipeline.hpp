#ifndef REXZERO_PIPELINE_HPP
#define REXZERO_PIPELINE_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rexzero/extractors.hpp"

namespace rexzero {

enum class PipelineKind { EndToEnd, TwoStep };

inline std::string to_string(PipelineKind k) {
  return k == PipelineKind::EndToEnd ? "end_to_end" : "two_step";
}
inline PipelineKind pipeline_kind_from_string(const std::string& s) {
  if (s == "end_to_end") return PipelineKind::EndToEnd;
  if (s == "two_step") return PipelineKind::TwoStep;
  throw ConfigError("unknown pipeline kind: " + s);
}

struct PredictionEntry {
  std::vector<RelationTuple> tuples;
  bool filtered_out = false;
};

// Per-sentence predictions plus the filter provenance flag. A filtered-out
// sentence always has an empty tuple set.
struct PredictionMap {
  std::map<std::string, PredictionEntry> entries;

  void set(const std::string& id, std::vector<RelationTuple> tuples, bool filtered_out) {
    if (filtered_out && !tuples.empty())
      throw ContractError("filtered-out sentence with tuples: " + id);
    entries[id] = PredictionEntry{std::move(tuples), filtered_out};
  }

  std::map<std::string, std::vector<RelationTuple>> tuples_by_id() const {
    std::map<std::string, std::vector<RelationTuple>> out;
    for (const auto& [id, e] : entries) out[id] = e.tuples;
    return out;
  }
};

// Every sentence goes straight to the extractor; nothing is filtered.
inline PredictionMap run_end_to_end(const ExtractorInterface& extractor,
                                    const DatasetSetting& testset) {
  if (!extractor.trained()) throw ContractError("end-to-end run with untrained extractor");
  PredictionMap map;
  for (const auto& s : testset.sentences)
    map.set(s.sentence.id, extractor.extract(s.sentence), false);
  return map;
}

// Generic filter front-end: sentences the filter rejects are emitted empty
// with filtered_out set; survivors go to the extractor untouched.
inline PredictionMap run_two_step_with_filter(
    const std::function<bool(const AnnotatedSentence&)>& keep,
    const ExtractorInterface& extractor, const DatasetSetting& testset) {
  if (!extractor.trained()) throw ContractError("two-step run with untrained extractor");
  if (extractor.trained_setting() != Setting::NZ)
    throw ContractError("two-step runs expect an NZ-trained extractor");
  PredictionMap map;
  for (const auto& s : testset.sentences) {
    if (keep(s))
      map.set(s.sentence.id, extractor.extract(s.sentence), false);
    else
      map.set(s.sentence.id, {}, true);
  }
  return map;
}

inline PredictionMap run_two_step(const ZeroCardClassifier& classifier,
                                  const ExtractorInterface& extractor,
                                  const DatasetSetting& testset) {
  if (!classifier.trained()) throw ContractError("two-step run with untrained classifier");
  return run_two_step_with_filter(
      [&classifier](const AnnotatedSentence& s) { return classifier.classify(s.sentence).decision; },
      extractor, testset);
}

// Oracle filter: keep exactly the sentences that have gold tuples.
inline PredictionMap run_two_step_oracle(const ExtractorInterface& extractor,
                                         const DatasetSetting& testset) {
  return run_two_step_with_filter(
      [](const AnnotatedSentence& s) { return !s.zero_cardinal(); }, extractor, testset);
}

struct ComparisonRow {
  ScoreReport two_step;
  ScoreReport end_to_end;
  double improvement = 0.0;  // percentage points on F1
};

inline ComparisonRow compare_runs(const PredictionMap& two_step, const PredictionMap& end_to_end,
                                  const std::vector<AnnotatedSentence>& gold, MatchMode mode) {
  auto ids_of = [](const PredictionMap& m) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : m.entries) ids.push_back(id);
    return ids;
  };
  if (ids_of(two_step) != ids_of(end_to_end))
    throw ContractError("compare_runs: prediction maps cover different sentence ids");
  ComparisonRow row;
  row.two_step = score(two_step.tuples_by_id(), gold, mode);
  row.end_to_end = score(end_to_end.tuples_by_id(), gold, mode);
  row.improvement = improvement_points(row.two_step.f1, row.end_to_end.f1);
  return row;
}

// JSONL serialization: {id, filtered_out, tuples: [...]}; tuples reuse the
// corpus mention shape plus explicit spans so scoring needs no re-alignment.
inline std::string prediction_map_to_jsonl(const PredictionMap& map,
                                           const DatasetSetting& testset) {
  std::string out;
  for (const auto& s : testset.sentences) {
    auto it = map.entries.find(s.sentence.id);
    if (it == map.entries.end())
      throw ContractError("prediction map missing sentence id: " + s.sentence.id);
    json rec;
    rec["id"] = s.sentence.id;
    rec["filtered_out"] = it->second.filtered_out;
    json tuples = json::array();
    for (const auto& t : it->second.tuples) {
      json m;
      m["em1Text"] = t.subject.surface;
      m["em2Text"] = t.object.surface;
      m["label"] = t.relation;
      m["em1Span"] = {t.subject.start, t.subject.end};
      m["em2Span"] = {t.object.start, t.object.end};
      tuples.push_back(std::move(m));
    }
    rec["tuples"] = std::move(tuples);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

inline PredictionMap prediction_map_from_jsonl(const std::string& content) {
  PredictionMap map;
  std::size_t start = 0, line_no = 0;
  while (start < content.size()) {
    std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) nl = content.size();
    std::string line = content.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    std::vector<RelationTuple> tuples;
    for (const auto& m : rec.at("tuples")) {
      RelationTuple t;
      t.subject.surface = m.at("em1Text").get<std::string>();
      t.subject.start = m.at("em1Span")[0].get<int>();
      t.subject.end = m.at("em1Span")[1].get<int>();
      t.object.surface = m.at("em2Text").get<std::string>();
      t.object.start = m.at("em2Span")[0].get<int>();
      t.object.end = m.at("em2Span")[1].get<int>();
      t.relation = m.at("label").get<std::string>();
      tuples.push_back(std::move(t));
    }
    map.set(rec.at("id").get<std::string>(), std::move(tuples),
            rec.at("filtered_out").get<bool>());
  }
  return map;
}

}  // namespace rexzero

#endif  // REXZERO_PIPELINE_HPP
