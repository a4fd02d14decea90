#pragma once

#include "talkdep/persona.hpp"
#include "talkdep/store.hpp"

#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace talkdep {

enum class Attribute {
  humanness,
  naturalness,
  fluency,
  emotional_consistency,
  symptom_realism,
  engagement_responsiveness,
  cognitive_load,
};

enum class Dimension { general, depression_oriented };

inline constexpr std::array<Attribute, 7> kAttributes{
    Attribute::humanness,          Attribute::naturalness,     Attribute::fluency,
    Attribute::emotional_consistency, Attribute::symptom_realism, Attribute::engagement_responsiveness,
    Attribute::cognitive_load,
};

std::string_view to_string(Attribute a);
Attribute attribute_from_string(std::string_view s);
std::string_view to_string(Dimension d);
Dimension dimension_of(Attribute a);
// Short column header: Hum, Nat, Flu, Emo, Sym, Eng, Cog.
std::string_view short_name(Attribute a);

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

struct RatingForm {
  std::string rater_id;
  std::string persona_id;
  std::map<Attribute, int> scores;
  std::optional<std::string> session_ref;
  std::string submitted_at;

  std::string form_id() const { return persona_id + "/" + rater_id; }
  bool operator==(const RatingForm&) const = default;
};

// Empty when the form is well formed.
std::vector<std::string> form_problems(const RatingForm& form);

Json to_json(const RatingForm& form);
// Structural errors raise parse_error; bad score keys or values raise
// validation_error so callers can report them per field.
RatingForm form_from_json(const Json& j);

std::string forms_to_jsonl(const std::vector<RatingForm>& forms);
std::vector<RatingForm> forms_from_jsonl(std::string_view text);

using AttributeMeans = std::map<Attribute, double>;

// Arithmetic mean per attribute. Throws precondition when empty or when the
// forms belong to more than one persona.
AttributeMeans persona_means(const std::vector<RatingForm>& forms);

struct AggregateStats {
  int persona_count = 0;
  double overall_mean = 0;
  double general_mean = 0;
  double depression_mean = 0;
  std::map<Band, double> general_by_band;
  std::map<Band, double> depression_by_band;
};

// Unweighted mean over persona x attribute cells. Personas are banded by
// their roster severity_band. Throws not_found for a persona missing from the
// roster and precondition when no persona is given.
AggregateStats aggregate_means(const std::map<std::string, AttributeMeans>& persona_cells,
                               const std::vector<PersonaProfile>& roster);

// persona_means per persona, then aggregate_means.
AggregateStats aggregate_report(const std::vector<RatingForm>& forms,
                                const std::vector<PersonaProfile>& roster);

std::map<std::string, AttributeMeans> cells_by_persona(const std::vector<RatingForm>& forms);

Json to_json(const AggregateStats& stats);

// Persona rows in roster order, one decimal.
std::string render_persona_table(const std::map<std::string, AttributeMeans>& persona_cells,
                                 const std::vector<PersonaProfile>& roster);
// Two decimals, half-up.
std::string render_aggregates(const AggregateStats& stats);

struct RecordResult {
  std::string form_id;
  bool replaced = false;
};

// forms/log.jsonl holds every submission, forms/snapshot.json the current
// form per (rater, persona). Writes are serialized.
class FormStore {
 public:
  FormStore(DataRoot root, std::set<std::string> known_personas, Clock clock = system_clock());

  // Throws validation_error for a bad form and not_found for an unknown persona.
  RecordResult record(RatingForm form);

  std::vector<RatingForm> forms() const;
  // Superseded versions, oldest first.
  std::vector<RatingForm> history(std::string_view form_id) const;

 private:
  void persist_snapshot() const;

  DataRoot root_;
  std::set<std::string> known_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, RatingForm> current_;
};

}  // namespace talkdep
