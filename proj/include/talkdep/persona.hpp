#pragma once

#include "talkdep/bdi.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace talkdep {

struct StyleSpec {
  std::string vocabulary_notes;
  std::string sentence_style;
  bool past_over_future = false;
  bool absolutist_bias = false;

  bool operator==(const StyleSpec&) const = default;
};

struct PersonaProfile {
  std::string persona_id;
  std::string name;
  int age = 0;
  std::string gender;
  int bdi_total = 0;
  Band severity_band = Band::minimal;
  // Accept a stored band that disagrees with the band table.
  bool band_override = false;
  std::vector<BdiItemId> key_symptoms;
  std::string memory;
  StyleSpec communication_style;
  std::vector<std::string> example_expressions;
  // Remaining template attribute groups, carried as labelled text only.
  std::map<std::string, std::string> extra_attributes;

  bool operator==(const PersonaProfile&) const = default;
};

enum class ViolationSeverity { error, warning };

struct Violation {
  std::string code;
  std::string message;
  ViolationSeverity severity = ViolationSeverity::error;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
  bool has_errors() const;
  bool has(std::string_view code) const;
};

inline constexpr std::size_t kMaxKeySymptoms = 4;

ValidationReport validate_profile(const PersonaProfile& profile,
                                  const BandTable& bands = BandTable::default_table());

Json to_json(const PersonaProfile& profile);
// Strict: unknown keys are rejected outside extra_attributes.
PersonaProfile profile_from_json(const Json& j);

// Parse and validate a roster document (top-level array of profiles).
// Throws parse_error, duplicate_id or validation_error.
std::vector<PersonaProfile> parse_roster(std::string_view text,
                                         const BandTable& bands = BandTable::default_table());
std::vector<PersonaProfile> load_roster(const std::filesystem::path& path,
                                        const BandTable& bands = BandTable::default_table());
std::string dump_roster(const std::vector<PersonaProfile>& roster);
void save_roster(const std::filesystem::path& path, const std::vector<PersonaProfile>& roster);

// The twelve shipped personas.
const std::vector<PersonaProfile>& default_roster();

const PersonaProfile* find_persona(const std::vector<PersonaProfile>& roster,
                                   std::string_view persona_id);

}  // namespace talkdep
