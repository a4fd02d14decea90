#pragma once

#include "talkdep/bdi.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace talkdep {

struct SeverityAssessment {
  int predicted_bdi = 0;
  Band predicted_band = Band::minimal;
  std::map<BdiItemId, bool> symptom_presence;
  std::string assessor_model;
  std::string rationale;

  bool operator==(const SeverityAssessment&) const = default;
};

Json to_json(const SeverityAssessment& a);
SeverityAssessment assessment_from_json(const Json& j, const BandTable& bands = BandTable::default_table());

// "- sadness: <yes|no>" for every item, used to fill the assessor template.
std::string assessor_symptom_lines();

// Parses the mandated reply format: a "BDI: <int>" line and one
// "<label>: yes|no" line per BDI-II item. Anything after the symptom block is
// kept as rationale. Throws Error(protocol_error) on non-compliance.
SeverityAssessment parse_assessment_reply(std::string_view reply, std::string assessor_model,
                                          const BandTable& bands = BandTable::default_table());

// Canonical reply text for an assessment (inverse of the parser).
std::string format_assessment_reply(const SeverityAssessment& a);

enum class Verdict { A, B, Neither };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

// Reads the last "VERDICT: A|B|NEITHER" line (case-insensitive).
std::optional<Verdict> parse_verdict(std::string_view reply);

}  // namespace talkdep
