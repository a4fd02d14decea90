#pragma once

#include "talkdep/assessment.hpp"
#include "talkdep/context.hpp"
#include "talkdep/gateway.hpp"
#include "talkdep/persona.hpp"
#include "talkdep/prompt.hpp"
#include "talkdep/store.hpp"
#include "talkdep/transcript.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace talkdep {

struct SynthesisConfig {
  int max_attempts = 3;
  int dialogue_turns = 20;  // therapist + patient turns, therapist first
  CompletionParams therapist{"oracle", 0.7, 256, std::nullopt};
  CompletionParams patient{"oracle", 0.7, 256, std::nullopt};
  CompletionParams assessor{"oracle", 0.0, 1024, std::nullopt};
  std::int64_t seed = 0;
  BandTable bands = BandTable::default_table();

  Json to_json() const;
};

enum class AttemptDecision { accepted, rejected, failed };
enum class RunStatus { running, accepted, exhausted, failed };

std::string_view to_string(AttemptDecision d);
std::string_view to_string(RunStatus s);

struct AttemptRecord {
  int attempt = 1;
  std::string generation_prompt;
  std::vector<DialogueTranscript> transcripts;
  std::optional<SeverityAssessment> assessment;  // absent when the reply failed to parse
  AttemptDecision decision = AttemptDecision::rejected;
  std::string refinement_note;  // directive derived from this attempt, if rejected
  std::string error;

  bool operator==(const AttemptRecord&) const = default;
};

struct SynthesisRun {
  std::string run_id;
  std::string persona_id;
  PersonaProfile profile;
  Json config = Json::object();
  Json template_versions = Json::object();
  std::string created_at;
  std::vector<AttemptRecord> attempts;
  std::optional<PatientContext> final_context;
  RunStatus status = RunStatus::running;
  std::string error;
};

// The patient-side prompt for the first attempt.
std::string initial_generation_prompt(const PersonaProfile& profile, const TemplateSet& templates);

// One overall dialogue plus one per key symptom, each a turn-by-turn exchange
// between a therapist completion and a patient completion driven by
// generation_prompt. Throws on backend failure or a structurally invalid
// transcript.
std::vector<DialogueTranscript> generate_dialogues(const PersonaProfile& profile, Gateway& gateway,
                                                   const TemplateSet& templates, int attempt,
                                                   const std::string& generation_prompt,
                                                   const SynthesisConfig& config,
                                                   std::string_view run_id = {});

// Frames all transcripts as recorded sessions for the assessor and parses
// its reply. Throws Error(protocol_error) when the reply is non-compliant.
SeverityAssessment assess(const std::vector<DialogueTranscript>& transcripts, Gateway& gateway,
                          const TemplateSet& templates, const SynthesisConfig& config,
                          std::string_view run_id = {});

inline constexpr int kAcceptanceMargin = 5;

// |predicted - true| < 5
bool accept(int predicted_bdi, int true_bdi);
bool accept(const SeverityAssessment& assessment, const PersonaProfile& profile);

struct Refinement {
  std::string prompt;
  std::string note;
};

// Appends a correction directive: signed error direction and the key
// symptoms the assessor missed. Throws Error(precondition) if the assessment
// would have been accepted.
Refinement refine_prompt(const std::string& previous_prompt, const SeverityAssessment& assessment,
                         const PersonaProfile& profile);

// Substitute for the LLM assessor (e.g. a clinician's judgement).
using ManualAssessor = std::function<SeverityAssessment(const std::vector<DialogueTranscript>&)>;

class RunStore;

struct SynthesisOptions {
  RunStore* store = nullptr;  // persist after every attempt; resume if present
  ManualAssessor manual_assessor;
  Clock clock = system_clock();
};

std::string synthesis_run_id(const PersonaProfile& profile, const TemplateSet& templates,
                             const SynthesisConfig& config);

// generate -> assess -> accept loop, at most config.max_attempts times.
SynthesisRun run_synthesis(const PersonaProfile& profile, Gateway& gateway, const TemplateSet& templates,
                           const SynthesisConfig& config, const SynthesisOptions& options = {});

Json to_json(const SynthesisRun& run);

// One directory per run: manifest.json, transcripts.jsonl, assessments.json.
class RunStore {
 public:
  explicit RunStore(DataRoot root) : root_(std::move(root)) {}

  const DataRoot& root() const { return root_; }

  void save_synthesis(const SynthesisRun& run);
  std::optional<SynthesisRun> load_synthesis(std::string_view run_id) const;

  // Index of the accepted run per persona.
  void mark_accepted(const std::string& persona_id, const std::string& run_id);
  std::optional<std::string> accepted_run(const std::string& persona_id) const;
  std::optional<PatientContext> accepted_context(const std::string& persona_id) const;

  // Report-style runs (bench, forms-report): report.json + manifest.json.
  void save_report(const std::string& run_id, const Json& manifest, const Json& report);
  std::optional<Json> load_report(std::string_view run_id) const;

  std::vector<std::string> list_runs() const;

 private:
  DataRoot root_;
  mutable std::mutex index_mutex_;
};

}  // namespace talkdep
