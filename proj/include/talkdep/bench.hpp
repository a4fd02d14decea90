#pragma once

#include "talkdep/assessment.hpp"
#include "talkdep/gateway.hpp"
#include "talkdep/persona.hpp"
#include "talkdep/prompt.hpp"
#include "talkdep/transcript.hpp"

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace talkdep {

enum class PresentationOrder { ab, ba };
enum class LevelRelation { same, different };

std::string_view to_string(PresentationOrder o);
std::string_view to_string(LevelRelation r);

// Unordered pair, stored with persona_a < persona_b.
struct PersonaPair {
  std::string persona_a;
  std::string persona_b;

  std::string pair_id() const { return persona_a + "~" + persona_b; }
  bool operator==(const PersonaPair&) const = default;
};

struct PairwiseVerdict {
  std::string pair_id;
  std::string persona_a;
  std::string persona_b;
  PresentationOrder presentation_order = PresentationOrder::ab;
  std::optional<Verdict> verdict;  // absent: protocol error (unparseable after one re-ask)
  std::optional<bool> correct;     // absent unless verdict is A or B
  LevelRelation level_relation = LevelRelation::different;
  std::string judge_model;
  std::string raw_reply;

  bool protocol_error() const { return !verdict.has_value(); }
  bool operator==(const PairwiseVerdict&) const = default;
};

struct BenchReport {
  std::string judge_model;
  int total_pairs = 0;
  int decided = 0;
  int correct = 0;
  int err_same = 0;
  int err_diff = 0;
  int neither_count = 0;
  int protocol_error_count = 0;
  int same_level_pairs = 0;
  double accuracy_pct = 0;
  double err_same_pct = 0;
  double err_diff_pct = 0;
  std::optional<double> position_consistency_pct;  // both-orders mode only
  std::int64_t seed = 0;
  std::vector<PairwiseVerdict> verdicts;
};

// All C(n,2) pairs in lexicographic order of persona_id. Throws
// Error(precondition) for fewer than two personas or duplicate ids.
std::vector<PersonaPair> enumerate_pairs(const std::vector<PersonaProfile>& roster);

// Strictly higher bdi_total wins; equal scores give Neither.
Verdict ground_truth(const PersonaProfile& a, const PersonaProfile& b);
Verdict ground_truth(const PersonaPair& pair, const std::vector<PersonaProfile>& roster);

LevelRelation level_relation(const PersonaProfile& a, const PersonaProfile& b);

int same_level_pair_count(const std::vector<PersonaProfile>& roster);

// Maps a verdict about the presented slots back to persona_a/persona_b.
Verdict unswap(Verdict presented, PresentationOrder order);

PresentationOrder draw_order(std::mt19937_64& rng);

// One judged comparison. Re-asks once when the reply has no VERDICT line.
PairwiseVerdict judge_pair(const PersonaPair& pair, const std::map<std::string, DialogueTranscript>& transcripts,
                           const std::vector<PersonaProfile>& roster, Gateway& gateway,
                           const PromptTemplate& judge_template, const CompletionParams& params,
                           PresentationOrder order, std::string_view run_id = {});
PairwiseVerdict judge_pair(const PersonaPair& pair, const std::map<std::string, DialogueTranscript>& transcripts,
                           const std::vector<PersonaProfile>& roster, Gateway& gateway,
                           const PromptTemplate& judge_template, const CompletionParams& params,
                           std::mt19937_64& rng, std::string_view run_id = {});

// Tallies one verdict per enumerated pair. Percentages are over decided pairs.
// Throws Error(precondition) when a pair is missing, duplicated or unknown.
BenchReport score_run(const std::vector<PairwiseVerdict>& verdicts, const std::vector<PersonaProfile>& roster);

struct BenchConfig {
  CompletionParams judge{"oracle", 0.0, 1024, std::nullopt};
  std::int64_t seed = 0;
  std::optional<PresentationOrder> forced_order;
  bool both_orders = false;
};

// Judges every pair concurrently (bounded by the gateway) and scores them.
BenchReport run_bench(const std::vector<PersonaProfile>& roster,
                      const std::map<std::string, DialogueTranscript>& transcripts, Gateway& gateway,
                      const PromptTemplate& judge_template, const BenchConfig& config,
                      std::string_view run_id = {});

std::string bench_run_id(const BenchConfig& config, const std::map<std::string, DialogueTranscript>& transcripts);

Json to_json(const PairwiseVerdict& v);
PairwiseVerdict pairwise_verdict_from_json(const Json& j);
Json to_json(const BenchReport& r);
BenchReport bench_report_from_json(const Json& j);

// Model | Accuracy | Error pairs (same / different) | Neither
std::string render_bench_table(const std::vector<BenchReport>& reports);

}  // namespace talkdep
