#include "talkdep/context.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace talkdep {

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string format_exemplars(const std::vector<DialogueTranscript>& dialogues) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    if (i) out << '\n';
    out << "Session " << (i + 1) << " (" << purpose_caption(dialogues[i].purpose) << ")\n"
        << format_transcript(dialogues[i]);
  }
  return out.str();
}

}  // namespace

std::string purpose_caption(const Purpose& purpose) {
  switch (purpose.kind) {
    case PurposeKind::overall: return "overall severity";
    case PurposeKind::symptom:
      return "focus: " + std::string(purpose.symptom ? purpose.symptom->label() : "");
    case PurposeKind::interview: return "interview";
    case PurposeKind::eval: return "evaluation";
  }
  return "";
}

Bindings profile_bindings(const PersonaProfile& p) {
  std::vector<std::string> symptoms;
  for (const auto& s : p.key_symptoms) symptoms.emplace_back(s.label());

  std::string directives;
  if (p.communication_style.past_over_future) {
    directives += "- Dwell on the past: favour past-tense verbs and say little about the future.\n";
  }
  if (p.communication_style.absolutist_bias) {
    directives += "- Lean on all-or-nothing words such as always, never, nothing, completely.\n";
  }

  std::vector<std::string> expressions;
  for (const auto& e : p.example_expressions) expressions.push_back("- " + e);
  std::vector<std::string> extra;
  for (const auto& [k, v] : p.extra_attributes) extra.push_back("- " + k + ": " + v);
  if (extra.empty()) extra.emplace_back("- none");

  return Bindings{
      {"name", p.name},
      {"age", std::to_string(p.age)},
      {"gender", p.gender},
      {"bdi_total", std::to_string(p.bdi_total)},
      {"severity_band", std::string(to_string(p.severity_band))},
      {"key_symptoms", join(symptoms, "; ")},
      {"memory", p.memory},
      {"vocabulary_notes", p.communication_style.vocabulary_notes},
      {"sentence_style", p.communication_style.sentence_style},
      {"style_directives", directives},
      {"example_expressions", join(expressions, "\n")},
      {"extra_attributes", join(extra, "\n")},
  };
}

PatientContext build_patient_context(const PersonaProfile& profile,
                                     std::vector<DialogueTranscript> accepted,
                                     const PromptTemplate& simulator_template) {
  if (accepted.empty()) {
    throw Error(ErrorCode::precondition, "no accepted dialogues for " + profile.persona_id);
  }
  // Rank: overall = 0, then position within key_symptoms.
  auto rank = [&](const DialogueTranscript& t) -> int {
    if (t.purpose.kind == PurposeKind::overall) return 0;
    if (t.purpose.kind == PurposeKind::symptom && t.purpose.symptom) {
      const auto& ks = profile.key_symptoms;
      auto it = std::find(ks.begin(), ks.end(), *t.purpose.symptom);
      if (it != ks.end()) return 1 + static_cast<int>(it - ks.begin());
    }
    return -1;
  };
  std::set<int> seen;
  for (const auto& t : accepted) {
    if (!t.persona_id.empty() && t.persona_id != profile.persona_id) {
      throw Error(ErrorCode::precondition, "dialogue " + t.transcript_id + " belongs to " + t.persona_id);
    }
    const int r = rank(t);
    if (r < 0) {
      throw Error(ErrorCode::precondition, "dialogue " + t.transcript_id + " has purpose " +
                                               t.purpose.to_string() + " outside the profile's key symptoms");
    }
    if (!seen.insert(r).second) {
      throw Error(ErrorCode::precondition, "duplicate purpose " + t.purpose.to_string());
    }
  }
  if (seen.size() != profile.key_symptoms.size() + 1) {
    throw Error(ErrorCode::precondition,
                "accepted set must hold one overall dialogue and one per key symptom");
  }
  std::stable_sort(accepted.begin(), accepted.end(),
                   [&](const auto& a, const auto& b) { return rank(a) < rank(b); });

  Bindings bindings = profile_bindings(profile);
  bindings["exemplars"] = format_exemplars(accepted);
  PatientContext ctx{profile, std::move(accepted), ""};
  ctx.rendered_system_prompt = render(simulator_template, bindings);
  return ctx;
}

PatientContext build_profile_only_context(const PersonaProfile& profile,
                                          const PromptTemplate& simulator_template) {
  Bindings bindings = profile_bindings(profile);
  bindings["exemplars"] = "(no earlier sessions)";
  return PatientContext{profile, {}, render(simulator_template, bindings)};
}

std::string build_judge_prompt(const DialogueTranscript& a, const DialogueTranscript& b,
                               const PromptTemplate& judge_template) {
  if (a.turns.empty() || b.turns.empty()) {
    throw Error(ErrorCode::precondition, "judge prompt needs two non-empty transcripts");
  }
  return render(judge_template, {{"transcript_a", format_transcript(a)},
                                 {"transcript_b", format_transcript(b)}});
}

}  // namespace talkdep
