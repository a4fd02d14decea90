#include "talkdep/forms.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace talkdep {

namespace {

constexpr std::array<std::string_view, 7> kNames{
    "humanness",       "naturalness",    "fluency", "emotional_consistency",
    "symptom_realism", "engagement_responsiveness", "cognitive_load",
};
constexpr std::array<std::string_view, 7> kShort{"Hum", "Nat", "Flu", "Emo", "Sym", "Eng", "Cog"};

double mean_of(const std::vector<double>& xs) {
  double sum = 0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(Attribute a) { return kNames[static_cast<std::size_t>(a)]; }
std::string_view short_name(Attribute a) { return kShort[static_cast<std::size_t>(a)]; }

Attribute attribute_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == s) return static_cast<Attribute>(i);
  }
  throw Error(ErrorCode::validation_error, "unknown attribute '" + std::string(s) + "'");
}

std::string_view to_string(Dimension d) { return d == Dimension::general ? "general" : "depression_oriented"; }

Dimension dimension_of(Attribute a) {
  switch (a) {
    case Attribute::humanness:
    case Attribute::naturalness:
    case Attribute::fluency: return Dimension::general;
    default: return Dimension::depression_oriented;
  }
}

std::vector<std::string> form_problems(const RatingForm& form) {
  std::vector<std::string> out;
  if (trim(form.rater_id).empty()) out.push_back("rater_id: required");
  if (trim(form.persona_id).empty()) out.push_back("persona_id: required");
  for (Attribute a : kAttributes) {
    auto it = form.scores.find(a);
    if (it == form.scores.end()) {
      out.push_back(std::string(to_string(a)) + ": missing");
    } else if (it->second < kMinScore || it->second > kMaxScore) {
      out.push_back(std::string(to_string(a)) + ": " + std::to_string(it->second) + " outside [1,5]");
    }
  }
  return out;
}

Json to_json(const RatingForm& form) {
  Json scores = Json::object();
  for (const auto& [a, v] : form.scores) scores[std::string(to_string(a))] = v;
  return Json{{"rater_id", form.rater_id},
              {"persona_id", form.persona_id},
              {"scores", scores},
              {"session_ref", form.session_ref ? Json(*form.session_ref) : Json(nullptr)},
              {"submitted_at", form.submitted_at}};
}

RatingForm form_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::parse_error, "form must be a JSON object");
  RatingForm f;
  try {
    f.rater_id = j.at("rater_id").get<std::string>();
    f.persona_id = j.at("persona_id").get<std::string>();
    if (j.contains("session_ref") && !j.at("session_ref").is_null()) {
      f.session_ref = j.at("session_ref").get<std::string>();
    }
    if (j.contains("submitted_at")) f.submitted_at = j.at("submitted_at").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad form: ") + e.what());
  }
  const Json* scores = j.contains("scores") ? &j.at("scores") : nullptr;
  if (!scores || !scores->is_object()) throw Error(ErrorCode::validation_error, "scores: required object");
  for (const auto& [key, value] : scores->items()) {
    const Attribute a = attribute_from_string(key);
    if (!value.is_number_integer()) {
      throw Error(ErrorCode::validation_error, key + ": score must be an integer");
    }
    f.scores[a] = value.get<int>();
  }
  return f;
}

std::string forms_to_jsonl(const std::vector<RatingForm>& forms) {
  std::string out;
  for (const auto& f : forms) out += to_json(f).dump() + "\n";
  return out;
}

std::vector<RatingForm> forms_from_jsonl(std::string_view text) {
  std::vector<RatingForm> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, std::string("bad form line: ") + e.what());
    }
    out.push_back(form_from_json(j));
  }
  return out;
}

AttributeMeans persona_means(const std::vector<RatingForm>& forms) {
  if (forms.empty()) throw Error(ErrorCode::precondition, "persona_means needs at least one form");
  for (const auto& f : forms) {
    if (f.persona_id != forms.front().persona_id) {
      throw Error(ErrorCode::precondition, "persona_means given forms for several personas");
    }
    if (auto p = form_problems(f); !p.empty()) throw Error(ErrorCode::validation_error, p.front());
  }
  AttributeMeans means;
  for (Attribute a : kAttributes) {
    // Integer sums keep the result independent of form order.
    long sum = 0;
    for (const auto& f : forms) sum += f.scores.at(a);
    means[a] = static_cast<double>(sum) / static_cast<double>(forms.size());
  }
  return means;
}

std::map<std::string, AttributeMeans> cells_by_persona(const std::vector<RatingForm>& forms) {
  std::map<std::string, std::vector<RatingForm>> grouped;
  for (const auto& f : forms) grouped[f.persona_id].push_back(f);
  std::map<std::string, AttributeMeans> cells;
  for (const auto& [id, group] : grouped) cells[id] = persona_means(group);
  return cells;
}

AggregateStats aggregate_means(const std::map<std::string, AttributeMeans>& persona_cells,
                               const std::vector<PersonaProfile>& roster) {
  if (persona_cells.empty()) throw Error(ErrorCode::precondition, "no persona ratings to aggregate");
  std::vector<double> all, general, depression;
  std::map<Band, std::vector<double>> general_band, depression_band;
  for (const auto& [id, means] : persona_cells) {
    const auto* p = find_persona(roster, id);
    if (!p) throw Error(ErrorCode::not_found, "persona '" + id + "' not in roster");
    for (Attribute a : kAttributes) {
      auto it = means.find(a);
      if (it == means.end()) {
        throw Error(ErrorCode::validation_error, id + ": missing mean for " + std::string(to_string(a)));
      }
      all.push_back(it->second);
      if (dimension_of(a) == Dimension::general) {
        general.push_back(it->second);
        general_band[p->severity_band].push_back(it->second);
      } else {
        depression.push_back(it->second);
        depression_band[p->severity_band].push_back(it->second);
      }
    }
  }
  AggregateStats s;
  s.persona_count = static_cast<int>(persona_cells.size());
  s.overall_mean = mean_of(all);
  s.general_mean = mean_of(general);
  s.depression_mean = mean_of(depression);
  for (const auto& [band, xs] : general_band) s.general_by_band[band] = mean_of(xs);
  for (const auto& [band, xs] : depression_band) s.depression_by_band[band] = mean_of(xs);
  return s;
}

AggregateStats aggregate_report(const std::vector<RatingForm>& forms, const std::vector<PersonaProfile>& roster) {
  return aggregate_means(cells_by_persona(forms), roster);
}

Json to_json(const AggregateStats& s) {
  Json general = Json::object(), depression = Json::object();
  for (const auto& [band, m] : s.general_by_band) general[std::string(to_string(band))] = m;
  for (const auto& [band, m] : s.depression_by_band) depression[std::string(to_string(band))] = m;
  return Json{{"persona_count", s.persona_count},
              {"overall_mean", s.overall_mean},
              {"general_mean", s.general_mean},
              {"depression_mean", s.depression_mean},
              {"general_by_band", general},
              {"depression_by_band", depression}};
}

std::string render_persona_table(const std::map<std::string, AttributeMeans>& persona_cells,
                                 const std::vector<PersonaProfile>& roster) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Persona" << std::setw(10) << "Band";
  for (Attribute a : kAttributes) out << std::setw(6) << short_name(a);
  out << '\n';
  for (const auto& p : roster) {
    auto it = persona_cells.find(p.persona_id);
    if (it == persona_cells.end()) continue;
    out << std::left << std::setw(12) << p.name << std::setw(10) << to_string(p.severity_band);
    for (Attribute a : kAttributes) out << std::setw(6) << format_fixed(it->second.at(a), 1);
    out << '\n';
  }
  return out.str();
}

std::string render_aggregates(const AggregateStats& s) {
  std::ostringstream out;
  out << "personas           " << s.persona_count << '\n'
      << "overall            " << format_fixed(s.overall_mean, 2) << '\n'
      << "general            " << format_fixed(s.general_mean, 2) << '\n'
      << "depression         " << format_fixed(s.depression_mean, 2) << '\n';
  for (const auto& [band, m] : s.general_by_band) {
    out << "general/" << std::left << std::setw(11) << to_string(band) << format_fixed(m, 2) << '\n';
  }
  for (const auto& [band, m] : s.depression_by_band) {
    out << "depression/" << std::left << std::setw(8) << to_string(band) << format_fixed(m, 2) << '\n';
  }
  return out.str();
}

FormStore::FormStore(DataRoot root, std::set<std::string> known_personas, Clock clock)
    : root_(std::move(root)), known_(std::move(known_personas)), clock_(std::move(clock)) {
  // The log is authoritative; the snapshot is a compacted view of it.
  for (const auto& line : read_lines(root_.forms() / "log.jsonl")) {
    const Json event = Json::parse(line);
    RatingForm f = form_from_json(event.at("form"));
    current_[f.form_id()] = std::move(f);
  }
}

RecordResult FormStore::record(RatingForm form) {
  if (auto problems = form_problems(form); !problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(ErrorCode::validation_error, msg);
  }
  if (!known_.count(form.persona_id)) {
    throw Error(ErrorCode::not_found, "unknown persona '" + form.persona_id + "'");
  }
  if (form.submitted_at.empty()) form.submitted_at = clock_();

  std::lock_guard lock(mutex_);
  RecordResult result{form.form_id(), current_.count(form.form_id()) > 0};
  Json event{{"event", result.replaced ? "replace" : "submit"}, {"form_id", result.form_id}, {"form", to_json(form)}};
  if (result.replaced) event["previous"] = to_json(current_.at(result.form_id));
  append_line(root_.forms() / "log.jsonl", event.dump());
  current_[result.form_id] = std::move(form);
  persist_snapshot();
  return result;
}

std::vector<RatingForm> FormStore::forms() const {
  std::lock_guard lock(mutex_);
  std::vector<RatingForm> out;
  for (const auto& [id, f] : current_) out.push_back(f);
  return out;
}

std::vector<RatingForm> FormStore::history(std::string_view form_id) const {
  std::lock_guard lock(mutex_);
  std::vector<RatingForm> out;
  for (const auto& line : read_lines(root_.forms() / "log.jsonl")) {
    const Json event = Json::parse(line);
    if (event.at("form_id") == form_id && event.contains("previous")) {
      out.push_back(form_from_json(event.at("previous")));
    }
  }
  return out;
}

void FormStore::persist_snapshot() const {
  Json arr = Json::array();
  for (const auto& [id, f] : current_) arr.push_back(to_json(f));
  write_file_atomic(root_.forms() / "snapshot.json", arr.dump(2) + "\n");
}

}  // namespace talkdep
