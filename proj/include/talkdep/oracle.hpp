#pragma once

#include "talkdep/assessment.hpp"
#include "talkdep/gateway.hpp"
#include "talkdep/transcript.hpp"

#include <optional>
#include <string>
#include <vector>

namespace talkdep {

// Deterministic stand-ins for the three LLM roles. The patient oracle plants
// cue tokens at a rate of bdi/10 per reply; the assessor and judge oracles
// read severity back from cue density.
struct OracleConfig {
  std::string cue_token = "[[CUE]]";
  int assessor_gain = 10;
  std::int64_t seed = 0;
  // Rigged assessor: always predict this score.
  std::optional<int> fixed_assessment;
};

// round-half-up(bdi / 10): the cue count of a persona's first reply.
int cues_per_reply(int bdi);

// Cues in the persona's 1-based reply_index-th reply. Cumulative rounding:
// R(t*bdi/10) - R((t-1)*bdi/10), so n replies carry R(n*bdi/10) cues.
int cues_in_reply(int bdi, int reply_index);

int count_cues(std::string_view text, std::string_view cue_token);

// The sentence the patient oracle uses to surface a symptom, which the
// assessor oracle looks for.
std::string symptom_mention(BdiItemId item);

// predicted_bdi = clamp(round(gain * mean cues per patient turn), 0, 63).
// Throws Error(precondition) when the transcripts contain no patient turns.
SeverityAssessment oracle_assess(const std::vector<DialogueTranscript>& transcripts,
                                 const OracleConfig& cfg = {},
                                 const BandTable& bands = BandTable::default_table());

// Higher mean cue density wins; an exact tie is Neither.
Verdict oracle_judge(const DialogueTranscript& a, const DialogueTranscript& b,
                     const OracleConfig& cfg = {});

// Backend that recognises the shipped prompts by their heading line and
// answers as patient, therapist, assessor or judge. Pure given (messages,
// seed).
class ScriptedOracle final : public Backend {
 public:
  explicit ScriptedOracle(OracleConfig cfg = {}) : cfg_(std::move(cfg)) {}

  ChatMessage complete(const std::vector<ChatMessage>& messages,
                       const CompletionParams& params) override;
  bool scripted() const override { return true; }

  const OracleConfig& config() const { return cfg_; }

 private:
  std::string patient_reply(const std::vector<ChatMessage>& messages) const;
  std::string therapist_reply(const std::vector<ChatMessage>& messages) const;
  std::string assessor_reply(const std::string& prompt, const CompletionParams& params) const;
  std::string judge_reply(const std::string& prompt) const;

  OracleConfig cfg_;
};

}  // namespace talkdep
