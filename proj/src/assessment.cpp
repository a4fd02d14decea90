#include "talkdep/assessment.hpp"

#include <charconv>
#include <sstream>
#include <vector>

namespace talkdep {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = eol + 1;
  }
  return lines;
}

std::string strip_bullet(std::string_view line) {
  std::string s = trim(line);
  while (!s.empty() && (s.front() == '-' || s.front() == '*')) s = trim(std::string_view(s).substr(1));
  return s;
}

}  // namespace

Json to_json(const SeverityAssessment& a) {
  Json presence = Json::object();
  for (const auto& [item, present] : a.symptom_presence) presence[std::string(item.label())] = present;
  return Json{{"predicted_bdi", a.predicted_bdi},
              {"predicted_band", to_string(a.predicted_band)},
              {"symptom_presence", presence},
              {"assessor_model", a.assessor_model},
              {"rationale", a.rationale}};
}

SeverityAssessment assessment_from_json(const Json& j, const BandTable& bands) {
  SeverityAssessment a;
  try {
    a.predicted_bdi = j.at("predicted_bdi").get<int>();
    a.predicted_band = bands.band_of(a.predicted_bdi);
    if (j.contains("predicted_band") &&
        band_from_string(j.at("predicted_band").get<std::string>()) != a.predicted_band) {
      throw Error(ErrorCode::validation_error, "predicted_band disagrees with predicted_bdi");
    }
    if (j.contains("symptom_presence")) {
      for (const auto& [label, present] : j.at("symptom_presence").items()) {
        a.symptom_presence[bdi_item(label)] = present.get<bool>();
      }
    }
    a.assessor_model = j.value("assessor_model", std::string("manual"));
    a.rationale = j.value("rationale", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad assessment: ") + e.what());
  }
  return a;
}

std::string assessor_symptom_lines() {
  std::string out;
  for (const auto& item : all_bdi_items()) {
    out += "- ";
    out += item.label();
    out += ": <yes|no>\n";
  }
  return out;
}

SeverityAssessment parse_assessment_reply(std::string_view reply, std::string assessor_model,
                                          const BandTable& bands) {
  SeverityAssessment a;
  a.assessor_model = std::move(assessor_model);
  std::optional<int> score;
  std::ostringstream rationale;
  bool in_rationale = false;

  for (std::string_view raw : split_lines(reply)) {
    const std::string line = strip_bullet(raw);
    if (line.empty()) continue;
    const std::string lower = to_lower(line);
    if (!score && lower.rfind("bdi:", 0) == 0) {
      const std::string value = trim(std::string_view(line).substr(4));
      int v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::protocol_error, "assessor BDI line is not an integer: '" + line + "'");
      }
      if (v < kBdiMin || v > kBdiMax) {
        throw Error(ErrorCode::protocol_error, "assessor BDI " + std::to_string(v) + " outside [0,63]");
      }
      score = v;
      continue;
    }
    const auto colon = lower.rfind(':');
    if (colon != std::string::npos && !in_rationale) {
      if (auto item = find_bdi_item(std::string_view(lower).substr(0, colon))) {
        const std::string answer = trim(std::string_view(lower).substr(colon + 1));
        if (answer != "yes" && answer != "no") {
          throw Error(ErrorCode::protocol_error,
                      "symptom '" + std::string(item->label()) + "' answered '" + answer + "'");
        }
        a.symptom_presence[*item] = answer == "yes";
        continue;
      }
    }
    if (lower == "symptoms:") continue;
    if (a.symptom_presence.size() == all_bdi_items().size()) in_rationale = true;
    if (in_rationale) {
      if (rationale.tellp() > 0) rationale << '\n';
      rationale << line;
    }
  }
  if (!score) throw Error(ErrorCode::protocol_error, "assessor reply has no 'BDI: <int>' line");
  for (const auto& item : all_bdi_items()) {
    if (a.symptom_presence.find(item) == a.symptom_presence.end()) {
      throw Error(ErrorCode::protocol_error,
                  "assessor reply has no yes/no answer for '" + std::string(item.label()) + "'");
    }
  }
  a.predicted_bdi = *score;
  a.predicted_band = bands.band_of(*score);
  a.rationale = rationale.str();
  return a;
}

std::string format_assessment_reply(const SeverityAssessment& a) {
  std::ostringstream out;
  out << "BDI: " << a.predicted_bdi << "\nSymptoms:\n";
  for (const auto& item : all_bdi_items()) {
    auto it = a.symptom_presence.find(item);
    const bool present = it != a.symptom_presence.end() && it->second;
    out << "- " << item.label() << ": " << (present ? "yes" : "no") << '\n';
  }
  if (!a.rationale.empty()) out << a.rationale << '\n';
  return out.str();
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::A: return "A";
    case Verdict::B: return "B";
    case Verdict::Neither: return "Neither";
  }
  return "Neither";
}

Verdict verdict_from_string(std::string_view s) {
  const std::string lower = to_lower(trim(s));
  if (lower == "a") return Verdict::A;
  if (lower == "b") return Verdict::B;
  if (lower == "neither") return Verdict::Neither;
  throw Error(ErrorCode::parse_error, "unknown verdict '" + std::string(s) + "'");
}

std::optional<Verdict> parse_verdict(std::string_view reply) {
  const auto lines = split_lines(reply);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const std::string line = to_lower(strip_bullet(*it));
    if (line.rfind("verdict:", 0) != 0) continue;
    std::string value = trim(std::string_view(line).substr(8));
    while (!value.empty() && (value.back() == '.' || value.back() == '*')) value.pop_back();
    if (value == "a") return Verdict::A;
    if (value == "b") return Verdict::B;
    if (value == "neither") return Verdict::Neither;
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace talkdep
