#pragma once

#include "talkdep/persona.hpp"
#include "talkdep/store.hpp"
#include "talkdep/transcript.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace talkdep {

enum class FlagCategory { self_harm_cue, out_of_persona, style_drift, other };
enum class FlagSeverity { info, review, block };

std::string_view to_string(FlagCategory c);
FlagCategory flag_category_from_string(std::string_view s);
std::string_view to_string(FlagSeverity s);
FlagSeverity flag_severity_from_string(std::string_view s);

struct FlagSource {
  std::string transcript_id;
  std::optional<int> turn_index;

  bool operator==(const FlagSource&) const = default;
};

struct Resolution {
  std::string reviewer;
  std::string decision;
  std::string note;
  std::string resolved_at;

  bool operator==(const Resolution&) const = default;
};

struct SafetyFlag {
  std::string flag_id;
  FlagSource source;
  FlagCategory category = FlagCategory::other;
  FlagSeverity severity = FlagSeverity::info;
  std::string detail;
  std::string evidence;  // the matched phrase or offending fragment
  std::optional<Resolution> resolution;

  bool operator==(const SafetyFlag&) const = default;
};

Json to_json(const SafetyFlag& f);
SafetyFlag safety_flag_from_json(const Json& j);

// Lowercased word tokens. Letters, digits and inner apostrophes form words;
// the contractions 'll 'm 're 've 'd 's become tokens of their own.
std::vector<std::string> tokenize(std::string_view text);

// A versioned phrase list. Header lines: "# lexicon: <name>", "# version: <v>",
// optional "# severity: <info|review|block>".
struct Lexicon {
  std::string name;
  std::string version;
  FlagSeverity severity = FlagSeverity::review;
  std::vector<std::string> phrases;
  std::vector<std::vector<std::string>> phrase_tokens;

  bool contains_word(std::string_view token) const;
};

Lexicon parse_lexicon(std::string_view text);

struct LexiconSet {
  Lexicon self_harm;
  Lexicon absolutist;
  Lexicon future;
  Lexicon present;
  Lexicon past;
  Lexicon ed_exceptions;
  Lexicon marital_status;

  static const LexiconSet& shipped();
  static LexiconSet load_dir(const std::filesystem::path& dir);
  Json versions() const;
};

// Every self-harm phrase present as a token sequence yields one flag
// (first occurrence), in phrase order.
std::vector<SafetyFlag> screen_text(std::string_view text, const LexiconSet& lexicons,
                                    const FlagSource& source = {});

struct StyleReport {
  int token_count = 0;
  int past_markers = 0;
  int present_markers = 0;
  int future_markers = 0;
  int absolutist_words = 0;
  double past_tense_ratio = 0;  // past / (past + present + future)
  double future_word_rate = 0;  // per 100 tokens
  double absolutist_rate = 0;   // per 100 tokens

  bool operator==(const StyleReport&) const = default;
};

struct StyleThresholds {
  double min_past_tense_ratio = 0.4;
};

struct StyleAudit {
  StyleReport report;
  std::optional<SafetyFlag> drift;
};

StyleReport measure_style(const std::vector<std::string_view>& texts, const LexiconSet& lexicons);

// Patient turns only. Throws Error(precondition) when there are none or they
// hold no tokens.
StyleAudit style_audit(const DialogueTranscript& transcript, const StyleSpec& style,
                       const LexiconSet& lexicons, const StyleThresholds& thresholds = {});

Json to_json(const StyleReport& r);

// Patient statements of name, age or marital status that disagree with the
// profile ("my name is", "I'm 30", "30 years old", "I'm divorced").
std::vector<SafetyFlag> consistency_check(const DialogueTranscript& transcript, const PersonaProfile& profile,
                                          const LexiconSet& lexicons);

// Serialized JSONL store of raised flags and their resolutions.
class FlagQueue {
 public:
  explicit FlagQueue(DataRoot root, Clock clock = system_clock());

  // Already-known flag ids are ignored.
  void raise(const std::vector<SafetyFlag>& flags);

  // Throws not_found for an unknown id and conflict when already resolved.
  SafetyFlag resolve(const std::string& flag_id, Resolution resolution);

  std::vector<SafetyFlag> list(bool unresolved_only = false) const;
  std::optional<SafetyFlag> get(const std::string& flag_id) const;
  bool has_unresolved_block(std::string_view transcript_id) const;

 private:
  fs::path log_path() const { return root_.flags() / "flags.jsonl"; }

  DataRoot root_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::vector<std::string> order_;
  std::map<std::string, SafetyFlag> flags_;
};

}  // namespace talkdep
