#include "talkdep/bench.hpp"

#include "talkdep/context.hpp"

#include <algorithm>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

namespace talkdep {

namespace {

const PersonaProfile& lookup(const std::vector<PersonaProfile>& roster, const std::string& id) {
  if (const auto* p = find_persona(roster, id)) return *p;
  throw Error(ErrorCode::not_found, "persona '" + id + "' not in roster");
}

double pct(int num, int den) { return den == 0 ? 0.0 : 100.0 * num / den; }

constexpr std::string_view kReask =
    "Your answer did not end with a verdict line. Reply with exactly one final line: "
    "VERDICT: A, VERDICT: B, or VERDICT: NEITHER.";

}  // namespace

std::string_view to_string(PresentationOrder o) { return o == PresentationOrder::ab ? "ab" : "ba"; }
std::string_view to_string(LevelRelation r) { return r == LevelRelation::same ? "same" : "different"; }

std::vector<PersonaPair> enumerate_pairs(const std::vector<PersonaProfile>& roster) {
  std::vector<std::string> ids;
  for (const auto& p : roster) ids.push_back(p.persona_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::precondition, "roster has duplicate persona ids");
  }
  if (ids.size() < 2) throw Error(ErrorCode::precondition, "need at least two personas to compare");
  std::vector<PersonaPair> pairs;
  pairs.reserve(ids.size() * (ids.size() - 1) / 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) pairs.push_back({ids[i], ids[j]});
  }
  return pairs;
}

Verdict ground_truth(const PersonaProfile& a, const PersonaProfile& b) {
  if (a.bdi_total > b.bdi_total) return Verdict::A;
  if (b.bdi_total > a.bdi_total) return Verdict::B;
  return Verdict::Neither;
}

Verdict ground_truth(const PersonaPair& pair, const std::vector<PersonaProfile>& roster) {
  return ground_truth(lookup(roster, pair.persona_a), lookup(roster, pair.persona_b));
}

LevelRelation level_relation(const PersonaProfile& a, const PersonaProfile& b) {
  return a.severity_band == b.severity_band ? LevelRelation::same : LevelRelation::different;
}

int same_level_pair_count(const std::vector<PersonaProfile>& roster) {
  int n = 0;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    for (std::size_t j = i + 1; j < roster.size(); ++j) {
      if (roster[i].severity_band == roster[j].severity_band) ++n;
    }
  }
  return n;
}

Verdict unswap(Verdict presented, PresentationOrder order) {
  if (order == PresentationOrder::ab || presented == Verdict::Neither) return presented;
  return presented == Verdict::A ? Verdict::B : Verdict::A;
}

PresentationOrder draw_order(std::mt19937_64& rng) {
  return (rng() & 1U) ? PresentationOrder::ba : PresentationOrder::ab;
}

PairwiseVerdict judge_pair(const PersonaPair& pair, const std::map<std::string, DialogueTranscript>& transcripts,
                           const std::vector<PersonaProfile>& roster, Gateway& gateway,
                           const PromptTemplate& judge_template, const CompletionParams& params,
                           PresentationOrder order, std::string_view run_id) {
  const auto ta = transcripts.find(pair.persona_a);
  const auto tb = transcripts.find(pair.persona_b);
  if (ta == transcripts.end() || tb == transcripts.end()) {
    throw Error(ErrorCode::precondition, "missing eval transcript for pair " + pair.pair_id());
  }
  const auto& pa = lookup(roster, pair.persona_a);
  const auto& pb = lookup(roster, pair.persona_b);

  const auto& first = order == PresentationOrder::ab ? ta->second : tb->second;
  const auto& second = order == PresentationOrder::ab ? tb->second : ta->second;
  std::vector<ChatMessage> messages{{ChatRole::user, build_judge_prompt(first, second, judge_template)}};

  PairwiseVerdict v;
  v.pair_id = pair.pair_id();
  v.persona_a = pair.persona_a;
  v.persona_b = pair.persona_b;
  v.presentation_order = order;
  v.level_relation = level_relation(pa, pb);
  v.judge_model = params.model_id;

  ChatMessage reply = gateway.complete(messages, params, run_id);
  v.raw_reply = reply.content;
  auto presented = parse_verdict(reply.content);
  if (!presented) {
    messages.push_back(reply);
    messages.push_back({ChatRole::user, std::string(kReask)});
    reply = gateway.complete(messages, params, run_id);
    v.raw_reply += "\n---\n" + reply.content;
    presented = parse_verdict(reply.content);
  }
  if (presented) {
    v.verdict = unswap(*presented, order);
    if (*v.verdict != Verdict::Neither) v.correct = *v.verdict == ground_truth(pa, pb);
  }
  return v;
}

PairwiseVerdict judge_pair(const PersonaPair& pair, const std::map<std::string, DialogueTranscript>& transcripts,
                           const std::vector<PersonaProfile>& roster, Gateway& gateway,
                           const PromptTemplate& judge_template, const CompletionParams& params,
                           std::mt19937_64& rng, std::string_view run_id) {
  return judge_pair(pair, transcripts, roster, gateway, judge_template, params, draw_order(rng), run_id);
}

BenchReport score_run(const std::vector<PairwiseVerdict>& verdicts, const std::vector<PersonaProfile>& roster) {
  const auto pairs = enumerate_pairs(roster);
  std::map<std::string, const PairwiseVerdict*> by_pair;
  for (const auto& v : verdicts) {
    if (!by_pair.emplace(v.pair_id, &v).second) {
      throw Error(ErrorCode::precondition, "duplicate verdict for pair " + v.pair_id);
    }
  }
  BenchReport r;
  r.total_pairs = static_cast<int>(pairs.size());
  r.same_level_pairs = same_level_pair_count(roster);
  for (const auto& pair : pairs) {
    auto it = by_pair.find(pair.pair_id());
    if (it == by_pair.end()) throw Error(ErrorCode::precondition, "no verdict for pair " + pair.pair_id());
    const PairwiseVerdict& v = *it->second;
    r.verdicts.push_back(v);
    if (r.judge_model.empty()) r.judge_model = v.judge_model;
    if (!v.verdict) {
      ++r.protocol_error_count;
      continue;
    }
    if (*v.verdict == Verdict::Neither) {
      ++r.neither_count;
      continue;
    }
    ++r.decided;
    const auto& pa = lookup(roster, pair.persona_a);
    const auto& pb = lookup(roster, pair.persona_b);
    if (*v.verdict == ground_truth(pa, pb)) {
      ++r.correct;
    } else if (level_relation(pa, pb) == LevelRelation::same) {
      ++r.err_same;
    } else {
      ++r.err_diff;
    }
  }
  if (by_pair.size() != pairs.size()) throw Error(ErrorCode::precondition, "verdict for an unknown pair");
  r.accuracy_pct = pct(r.correct, r.decided);
  r.err_same_pct = pct(r.err_same, r.decided);
  r.err_diff_pct = pct(r.err_diff, r.decided);
  return r;
}

BenchReport run_bench(const std::vector<PersonaProfile>& roster,
                      const std::map<std::string, DialogueTranscript>& transcripts, Gateway& gateway,
                      const PromptTemplate& judge_template, const BenchConfig& config, std::string_view run_id) {
  const auto pairs = enumerate_pairs(roster);
  for (const auto& p : roster) {
    if (!transcripts.count(p.persona_id)) {
      throw Error(ErrorCode::precondition, "no eval transcript for " + p.persona_id);
    }
  }
  // Orders are drawn up front so concurrency cannot change them.
  std::mt19937_64 rng(static_cast<std::uint64_t>(config.seed));
  std::vector<PresentationOrder> orders;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto drawn = draw_order(rng);
    orders.push_back(config.both_orders ? PresentationOrder::ab : config.forced_order.value_or(drawn));
  }

  auto judge_all = [&](const std::vector<PresentationOrder>& order_of) {
    std::vector<std::future<PairwiseVerdict>> futures;
    futures.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        return judge_pair(pairs[i], transcripts, roster, gateway, judge_template, config.judge, order_of[i], run_id);
      }));
    }
    std::vector<PairwiseVerdict> out;
    for (auto& f : futures) out.push_back(f.get());
    return out;
  };

  const auto verdicts = judge_all(orders);
  BenchReport report = score_run(verdicts, roster);
  report.judge_model = config.judge.model_id;
  report.seed = config.seed;
  if (config.both_orders) {
    const auto mirrored = judge_all(std::vector<PresentationOrder>(pairs.size(), PresentationOrder::ba));
    int agree = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (verdicts[i].verdict == mirrored[i].verdict) ++agree;
    }
    report.position_consistency_pct = pct(agree, static_cast<int>(pairs.size()));
  }
  return report;
}

std::string bench_run_id(const BenchConfig& config, const std::map<std::string, DialogueTranscript>& transcripts) {
  Json key{{"judge", config.judge.to_json()},
           {"seed", config.seed},
           {"forced_order", config.forced_order ? Json(to_string(*config.forced_order)) : Json(nullptr)},
           {"both_orders", config.both_orders}};
  std::string material = key.dump();
  for (const auto& [id, t] : transcripts) material += id + "\n" + transcript_to_jsonl(t);
  return "bench-" + sha256_hex(material).substr(0, 12);
}

Json to_json(const PairwiseVerdict& v) {
  return Json{{"pair_id", v.pair_id},
              {"persona_a", v.persona_a},
              {"persona_b", v.persona_b},
              {"presentation_order", to_string(v.presentation_order)},
              {"verdict", v.verdict ? Json(to_string(*v.verdict)) : Json(nullptr)},
              {"protocol_error", v.protocol_error()},
              {"correct", v.correct ? Json(*v.correct) : Json(nullptr)},
              {"level_relation", to_string(v.level_relation)},
              {"judge_model", v.judge_model},
              {"raw_reply", v.raw_reply}};
}

PairwiseVerdict pairwise_verdict_from_json(const Json& j) {
  PairwiseVerdict v;
  try {
    v.pair_id = j.at("pair_id").get<std::string>();
    v.persona_a = j.at("persona_a").get<std::string>();
    v.persona_b = j.at("persona_b").get<std::string>();
    const auto order = j.at("presentation_order").get<std::string>();
    if (order != "ab" && order != "ba") throw Error(ErrorCode::parse_error, "bad presentation_order " + order);
    v.presentation_order = order == "ab" ? PresentationOrder::ab : PresentationOrder::ba;
    if (!j.at("verdict").is_null()) v.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    if (!j.at("correct").is_null()) v.correct = j.at("correct").get<bool>();
    const auto rel = j.at("level_relation").get<std::string>();
    if (rel != "same" && rel != "different") throw Error(ErrorCode::parse_error, "bad level_relation " + rel);
    v.level_relation = rel == "same" ? LevelRelation::same : LevelRelation::different;
    v.judge_model = j.at("judge_model").get<std::string>();
    v.raw_reply = j.at("raw_reply").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad verdict record: ") + e.what());
  }
  return v;
}

Json to_json(const BenchReport& r) {
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
  return Json{{"judge_model", r.judge_model},
              {"total_pairs", r.total_pairs},
              {"decided", r.decided},
              {"correct", r.correct},
              {"err_same", r.err_same},
              {"err_diff", r.err_diff},
              {"neither_count", r.neither_count},
              {"protocol_error_count", r.protocol_error_count},
              {"same_level_pairs", r.same_level_pairs},
              {"accuracy_pct", r.accuracy_pct},
              {"err_same_pct", r.err_same_pct},
              {"err_diff_pct", r.err_diff_pct},
              {"position_consistency_pct",
               r.position_consistency_pct ? Json(*r.position_consistency_pct) : Json(nullptr)},
              {"seed", r.seed},
              {"verdicts", verdicts}};
}

BenchReport bench_report_from_json(const Json& j) {
  BenchReport r;
  try {
    r.judge_model = j.at("judge_model").get<std::string>();
    r.total_pairs = j.at("total_pairs").get<int>();
    r.decided = j.at("decided").get<int>();
    r.correct = j.at("correct").get<int>();
    r.err_same = j.at("err_same").get<int>();
    r.err_diff = j.at("err_diff").get<int>();
    r.neither_count = j.at("neither_count").get<int>();
    r.protocol_error_count = j.at("protocol_error_count").get<int>();
    r.same_level_pairs = j.at("same_level_pairs").get<int>();
    r.accuracy_pct = j.at("accuracy_pct").get<double>();
    r.err_same_pct = j.at("err_same_pct").get<double>();
    r.err_diff_pct = j.at("err_diff_pct").get<double>();
    if (!j.at("position_consistency_pct").is_null()) {
      r.position_consistency_pct = j.at("position_consistency_pct").get<double>();
    }
    r.seed = j.at("seed").get<std::int64_t>();
    for (const auto& v : j.at("verdicts")) r.verdicts.push_back(pairwise_verdict_from_json(v));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad bench report: ") + e.what());
  }
  return r;
}

std::string render_bench_table(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "Model" << std::setw(11) << "Accuracy" << std::setw(26)
      << "Error pairs (same / diff)" << "Neither\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(24) << r.judge_model << std::setw(11) << (format_fixed(r.accuracy_pct, 2) + "%")
        << std::setw(26)
        << (format_fixed(r.err_same_pct, 2) + "% / " + format_fixed(r.err_diff_pct, 2) + "%")
        << r.neither_count << " pairs";
    if (r.protocol_error_count) out << " (+" << r.protocol_error_count << " protocol errors)";
    out << '\n';
  }
  return out.str();
}

}  // namespace talkdep
