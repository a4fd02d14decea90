#pragma once

#include "talkdep/bdi.hpp"
#include "talkdep/common.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace talkdep {

struct PersonaProfile;

enum class Speaker { therapist, patient };

std::string_view to_string(Speaker s);
Speaker speaker_from_string(std::string_view s);

enum class PurposeKind { overall, symptom, interview, eval };

struct Purpose {
  PurposeKind kind = PurposeKind::overall;
  std::optional<BdiItemId> symptom;  // set iff kind == symptom

  static Purpose overall() { return {PurposeKind::overall, std::nullopt}; }
  static Purpose for_symptom(BdiItemId item) { return {PurposeKind::symptom, item}; }
  static Purpose interview() { return {PurposeKind::interview, std::nullopt}; }
  static Purpose eval() { return {PurposeKind::eval, std::nullopt}; }

  // "overall", "symptom:14", "interview", "eval"
  std::string to_string() const;
  static Purpose parse(std::string_view s);

  bool operator==(const Purpose&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::therapist;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct DialogueTranscript {
  std::string transcript_id;
  std::string persona_id;
  Purpose purpose;
  std::vector<Turn> turns;
  std::string created_by;
  int attempt = 1;

  std::vector<std::string_view> patient_turns() const;

  bool operator==(const DialogueTranscript&) const = default;
};

// Structural problems: empty, not alternating from the therapist, or a
// symptom purpose that is not one of the profile's key symptoms.
std::vector<std::string> transcript_issues(const DialogueTranscript& t,
                                           const PersonaProfile* profile = nullptr);

// Metadata only (no turns); turns live in the JSONL files.
Json transcript_meta_to_json(const DialogueTranscript& t);
DialogueTranscript transcript_meta_from_json(const Json& j);

// One line per turn: {"transcript_id","idx","speaker","text"}.
std::string transcript_to_jsonl(const DialogueTranscript& t);
std::string transcripts_to_jsonl(const std::vector<DialogueTranscript>& ts);
// Groups lines by transcript_id in first-appearance order; only ids and
// turns are populated. Throws parse_error on malformed lines or idx gaps.
std::vector<DialogueTranscript> transcripts_from_jsonl(std::string_view text);

// "Therapist: ...\nPatient: ...\n" rendering used inside prompts.
std::string format_transcript(const DialogueTranscript& t);

}  // namespace talkdep
