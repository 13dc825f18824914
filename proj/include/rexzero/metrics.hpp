#ifndef REXZERO_METRICS_HPP
#define REXZERO_METRICS_HPP

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "rexzero/corpus.hpp"

namespace rexzero {

// Exact compares full entity spans; the partial variants compare a single
// boundary token of each entity. Relation labels always take part.
enum class MatchMode { Exact, PartialFirst, PartialLast };

inline std::string to_string(MatchMode m) {
  switch (m) {
    case MatchMode::Exact: return "exact";
    case MatchMode::PartialFirst: return "partial_first";
    default: return "partial_last";
  }
}
inline MatchMode match_mode_from_string(const std::string& s) {
  if (s == "exact") return MatchMode::Exact;
  if (s == "partial_first") return MatchMode::PartialFirst;
  if (s == "partial_last") return MatchMode::PartialLast;
  throw ConfigError("unknown match mode: " + s);
}

// Two tuples with equal keys under a mode count as the same prediction.
// Unused span components are held at -1 so Exact keys refine partial keys.
struct MatchKey {
  int s_a = -1;
  int s_b = -1;
  int o_a = -1;
  int o_b = -1;
  std::string relation;

  friend bool operator==(const MatchKey& x, const MatchKey& y) {
    return x.s_a == y.s_a && x.s_b == y.s_b && x.o_a == y.o_a && x.o_b == y.o_b &&
           x.relation == y.relation;
  }
  friend bool operator<(const MatchKey& x, const MatchKey& y) {
    return std::tie(x.s_a, x.s_b, x.o_a, x.o_b, x.relation) <
           std::tie(y.s_a, y.s_b, y.o_a, y.o_b, y.relation);
  }
};

inline MatchKey tuple_key(const RelationTuple& t, MatchMode mode) {
  MatchKey k;
  k.relation = t.relation;
  switch (mode) {
    case MatchMode::Exact:
      k.s_a = t.subject.start;
      k.s_b = t.subject.end;
      k.o_a = t.object.start;
      k.o_b = t.object.end;
      break;
    case MatchMode::PartialFirst:
      k.s_a = t.subject.start;
      k.o_a = t.object.start;
      break;
    case MatchMode::PartialLast:
      k.s_a = t.subject.end;
      k.o_a = t.object.end;
      break;
  }
  return k;
}

struct ScoreReport {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  MatchMode mode = MatchMode::Exact;
};

inline double f1_from_pr(double p, double r) {
  if (p < 0.0 || p > 1.0 || r < 0.0 || r > 1.0)
    throw std::domain_error("precision/recall outside [0,1]");
  if (p + r <= 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

inline ScoreReport make_report(long tp, long fp, long fn, MatchMode mode) {
  ScoreReport rep;
  rep.tp = tp;
  rep.fp = fp;
  rep.fn = fn;
  rep.mode = mode;
  rep.precision = (tp + fp > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  rep.recall = (tp + fn > 0) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  rep.f1 = f1_from_pr(rep.precision, rep.recall);
  return rep;
}

// Micro counting over sentences: per sentence the predicted and gold tuple
// sets are reduced to key sets under `mode` (which also deduplicates
// predictions), then tp/fp/fn come from set intersection and differences.
inline ScoreReport score(const std::map<std::string, std::vector<RelationTuple>>& predictions,
                         const std::vector<AnnotatedSentence>& gold, MatchMode mode) {
  std::set<std::string> gold_ids;
  for (const auto& s : gold) gold_ids.insert(s.sentence.id);
  for (const auto& [id, _] : predictions)
    if (!gold_ids.count(id))
      throw ContractError("prediction for unknown sentence id: " + id);

  long tp = 0, fp = 0, fn = 0;
  for (const auto& s : gold) {
    std::set<MatchKey> gold_keys;
    for (const auto& t : s.tuples) gold_keys.insert(tuple_key(t, mode));
    std::set<MatchKey> pred_keys;
    auto it = predictions.find(s.sentence.id);
    if (it != predictions.end()) {
      for (const auto& t : it->second) {
        validate_mention(t.subject, s.sentence);
        validate_mention(t.object, s.sentence);
        pred_keys.insert(tuple_key(t, mode));
      }
    }
    for (const auto& k : pred_keys) {
      if (gold_keys.count(k))
        ++tp;
      else
        ++fp;
    }
    for (const auto& k : gold_keys)
      if (!pred_keys.count(k)) ++fn;
  }
  return make_report(tp, fp, fn, mode);
}

// Percentage-point F1 drop, 100*(a - b). Used both for the within-training
// drop (NZ-test minus WZ-test) and the cross-setting drop between the
// NZ-trained/NZ-tested score and the WZ-trained/WZ-tested score.
inline double drop_points(double f1_a, double f1_b) { return 100.0 * (f1_a - f1_b); }

// Percentage-point gain of two-step over end-to-end on the same WZ testset;
// negative when filtering hurts.
inline double improvement_points(double two_step_f1, double end_to_end_f1) {
  return 100.0 * (two_step_f1 - end_to_end_f1);
}

inline std::string score_report_csv_header() { return "mode,tp,fp,fn,precision,recall,f1"; }

// `mode_name` overrides the mode column for sentence-level detection reports.
inline std::string score_report_csv_row(const ScoreReport& rep, const std::string& mode_name = "") {
  std::string mode = mode_name.empty() ? to_string(rep.mode) : mode_name;
  return mode + "," + std::to_string(rep.tp) + "," + std::to_string(rep.fp) + "," +
         std::to_string(rep.fn) + "," + format_fixed(rep.precision, 3) + "," +
         format_fixed(rep.recall, 3) + "," + format_fixed(rep.f1, 3);
}

inline json score_report_to_json(const ScoreReport& rep, const std::string& mode_name = "") {
  json j;
  j["mode"] = mode_name.empty() ? to_string(rep.mode) : mode_name;
  j["tp"] = rep.tp;
  j["fp"] = rep.fp;
  j["fn"] = rep.fn;
  j["precision"] = rep.precision;
  j["recall"] = rep.recall;
  j["f1"] = rep.f1;
  return j;
}

inline ScoreReport score_report_from_json(const json& j) {
  ScoreReport rep;
  rep.tp = j.at("tp").get<long>();
  rep.fp = j.at("fp").get<long>();
  rep.fn = j.at("fn").get<long>();
  rep.precision = j.at("precision").get<double>();
  rep.recall = j.at("recall").get<double>();
  rep.f1 = j.at("f1").get<double>();
  std::string mode = j.at("mode").get<std::string>();
  rep.mode = (mode == "sentence") ? MatchMode::Exact : match_mode_from_string(mode);
  return rep;
}

}  // namespace rexzero

#endif  // REXZERO_METRICS_HPP
