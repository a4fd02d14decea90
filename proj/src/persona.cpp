#include "talkdep/persona.hpp"

#include "talkdep/embedded.hpp"
#include "talkdep/store.hpp"

#include <algorithm>
#include <set>

namespace talkdep {

namespace {

void add(ValidationReport& report, std::string code, std::string message,
         ViolationSeverity severity = ViolationSeverity::error) {
  report.violations.push_back({std::move(code), std::move(message), severity});
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::parse_error,
                  "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
T required(const Json& j, const char* key, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorCode::parse_error,
                "missing key '" + std::string(key) + "' in " + std::string(where));
  }
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::parse_error,
                "wrong type for '" + std::string(key) + "' in " + std::string(where));
  }
}

}  // namespace

bool ValidationReport::has_errors() const {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == ViolationSeverity::error; });
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_profile(const PersonaProfile& p, const BandTable& bands) {
  ValidationReport report;
  if (p.persona_id.empty()) add(report, "empty_persona_id", "persona_id must not be empty");
  if (p.name.empty()) add(report, "empty_name", "name must not be empty");
  if (p.age < 0 || p.age > 120) {
    add(report, "age_out_of_range", "age " + std::to_string(p.age) + " outside [0,120]");
  }

  const bool score_ok = p.bdi_total >= kBdiMin && p.bdi_total <= kBdiMax;
  if (!score_ok) {
    add(report, "bdi_out_of_range",
        "bdi_total " + std::to_string(p.bdi_total) + " outside [0,63]");
  } else if (!p.band_override) {
    const Band expected = bands.band_of(p.bdi_total);
    if (expected != p.severity_band) {
      add(report, "band_mismatch",
          "severity_band " + std::string(to_string(p.severity_band)) + " but score " +
              std::to_string(p.bdi_total) + " maps to " + std::string(to_string(expected)),
          ViolationSeverity::warning);
    }
  }

  if (p.key_symptoms.empty()) add(report, "no_symptoms", "at least one key symptom is required");
  if (p.key_symptoms.size() > kMaxKeySymptoms) {
    add(report, "too_many_symptoms",
        std::to_string(p.key_symptoms.size()) + " key symptoms, at most 4 allowed");
  }
  std::set<BdiItemId> seen;
  for (const auto& s : p.key_symptoms) {
    if (!s.valid()) {
      add(report, "invalid_symptom", "key symptom index " + std::to_string(s.index) + " not in [1,21]");
    } else if (!seen.insert(s).second) {
      add(report, "duplicate_symptom", "key symptom '" + std::string(s.label()) + "' listed twice");
    }
  }
  return report;
}

Json to_json(const PersonaProfile& p) {
  Json symptoms = Json::array();
  for (const auto& s : p.key_symptoms) symptoms.push_back(s.label());
  Json extra = Json::object();
  for (const auto& [k, v] : p.extra_attributes) extra[k] = v;
  return Json{
      {"persona_id", p.persona_id},
      {"name", p.name},
      {"age", p.age},
      {"gender", p.gender},
      {"bdi_total", p.bdi_total},
      {"severity_band", to_string(p.severity_band)},
      {"band_override", p.band_override},
      {"key_symptoms", symptoms},
      {"memory", p.memory},
      {"communication_style",
       {{"vocabulary_notes", p.communication_style.vocabulary_notes},
        {"sentence_style", p.communication_style.sentence_style},
        {"past_over_future", p.communication_style.past_over_future},
        {"absolutist_bias", p.communication_style.absolutist_bias}}},
      {"example_expressions", p.example_expressions},
      {"extra_attributes", extra},
  };
}

PersonaProfile profile_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "profile must be a JSON object");
  reject_unknown_keys(j,
                      {"persona_id", "name", "age", "gender", "bdi_total", "severity_band",
                       "band_override", "key_symptoms", "memory", "communication_style",
                       "example_expressions", "extra_attributes"},
                      "profile");
  PersonaProfile p;
  p.persona_id = required<std::string>(j, "persona_id", "profile");
  const std::string where = "profile '" + p.persona_id + "'";
  p.name = required<std::string>(j, "name", where);
  p.age = required<int>(j, "age", where);
  p.gender = required<std::string>(j, "gender", where);
  p.bdi_total = required<int>(j, "bdi_total", where);
  p.severity_band = band_from_string(required<std::string>(j, "severity_band", where));
  if (j.contains("band_override")) p.band_override = required<bool>(j, "band_override", where);
  for (const auto& label : required<std::vector<std::string>>(j, "key_symptoms", where)) {
    p.key_symptoms.push_back(bdi_item(label));
  }
  p.memory = required<std::string>(j, "memory", where);

  const auto style = required<Json>(j, "communication_style", where);
  if (!style.is_object()) throw Error(ErrorCode::parse_error, "communication_style must be an object");
  reject_unknown_keys(style, {"vocabulary_notes", "sentence_style", "past_over_future", "absolutist_bias"},
                      "communication_style");
  p.communication_style.vocabulary_notes = required<std::string>(style, "vocabulary_notes", where);
  p.communication_style.sentence_style = required<std::string>(style, "sentence_style", where);
  p.communication_style.past_over_future = required<bool>(style, "past_over_future", where);
  p.communication_style.absolutist_bias = required<bool>(style, "absolutist_bias", where);

  p.example_expressions = required<std::vector<std::string>>(j, "example_expressions", where);
  if (j.contains("extra_attributes")) {
    p.extra_attributes = required<std::map<std::string, std::string>>(j, "extra_attributes", where);
  }
  return p;
}

std::vector<PersonaProfile> parse_roster(std::string_view text, const BandTable& bands) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse_error, std::string("roster is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::parse_error, "roster must be a top-level array");

  std::vector<PersonaProfile> roster;
  std::set<std::string> ids;
  for (const auto& entry : doc) {
    PersonaProfile p = profile_from_json(entry);
    if (!ids.insert(p.persona_id).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate persona_id '" + p.persona_id + "'");
    }
    const auto report = validate_profile(p, bands);
    if (report.has_errors()) {
      std::string msg = "profile '" + p.persona_id + "' is invalid:";
      for (const auto& v : report.violations) {
        if (v.severity == ViolationSeverity::error) msg += " " + v.code;
      }
      throw Error(ErrorCode::validation_error, msg);
    }
    roster.push_back(std::move(p));
  }
  return roster;
}

std::vector<PersonaProfile> load_roster(const std::filesystem::path& path, const BandTable& bands) {
  return parse_roster(read_file(path), bands);
}

std::string dump_roster(const std::vector<PersonaProfile>& roster) {
  Json arr = Json::array();
  for (const auto& p : roster) arr.push_back(to_json(p));
  return arr.dump(2) + "\n";
}

void save_roster(const std::filesystem::path& path, const std::vector<PersonaProfile>& roster) {
  write_file_atomic(path, dump_roster(roster));
}

const std::vector<PersonaProfile>& default_roster() {
  static const std::vector<PersonaProfile> roster = [] {
    auto text = embedded::find("roster.json");
    if (!text) throw Error(ErrorCode::not_found, "shipped roster missing from build");
    return parse_roster(*text);
  }();
  return roster;
}

const PersonaProfile* find_persona(const std::vector<PersonaProfile>& roster,
                                   std::string_view persona_id) {
  for (const auto& p : roster) {
    if (p.persona_id == persona_id) return &p;
  }
  return nullptr;
}

}  // namespace talkdep
