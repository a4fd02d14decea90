#pragma once

#include "talkdep/persona.hpp"
#include "talkdep/prompt.hpp"
#include "talkdep/transcript.hpp"

#include <string>
#include <vector>

namespace talkdep {

// Everything LLM No. 3 needs to play the persona.
struct PatientContext {
  PersonaProfile profile;
  std::vector<DialogueTranscript> exemplar_dialogues;  // overall first, then key-symptom order
  std::string rendered_system_prompt;

  bool operator==(const PatientContext&) const = default;
};

// Placeholder values derived from a profile, shared by both patient templates.
Bindings profile_bindings(const PersonaProfile& profile);

// Puts the accepted dialogues in purpose order and renders the simulator
// prompt. Throws Error(precondition) when the set is empty or its purposes do
// not match one overall dialogue plus one per key symptom.
PatientContext build_patient_context(const PersonaProfile& profile,
                                     std::vector<DialogueTranscript> accepted,
                                     const PromptTemplate& simulator_template);

// Profile-only context (no exemplars) for sessions started with an override.
PatientContext build_profile_only_context(const PersonaProfile& profile,
                                          const PromptTemplate& simulator_template);

// Forced-choice prompt over two transcripts. Throws Error(precondition) if
// either transcript has no turns.
std::string build_judge_prompt(const DialogueTranscript& a, const DialogueTranscript& b,
                               const PromptTemplate& judge_template);

std::string purpose_caption(const Purpose& purpose);

}  // namespace talkdep
