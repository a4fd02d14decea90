#include "talkdep/transcript.hpp"

#include "talkdep/persona.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace talkdep {

std::string_view to_string(Speaker s) { return s == Speaker::therapist ? "therapist" : "patient"; }

Speaker speaker_from_string(std::string_view s) {
  if (s == "therapist") return Speaker::therapist;
  if (s == "patient") return Speaker::patient;
  throw Error(ErrorCode::parse_error, "unknown speaker '" + std::string(s) + "'");
}

std::string Purpose::to_string() const {
  switch (kind) {
    case PurposeKind::overall: return "overall";
    case PurposeKind::symptom: return "symptom:" + std::to_string(symptom ? symptom->index : 0);
    case PurposeKind::interview: return "interview";
    case PurposeKind::eval: return "eval";
  }
  return "overall";
}

Purpose Purpose::parse(std::string_view s) {
  if (s == "overall") return overall();
  if (s == "interview") return interview();
  if (s == "eval") return eval();
  if (s.rfind("symptom:", 0) == 0) {
    const std::string digits(s.substr(8));
    int idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoi(digits, &used);
      if (used != digits.size()) throw std::invalid_argument(digits);
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse_error, "bad purpose '" + std::string(s) + "'");
    }
    BdiItemId item{idx};
    if (!item.valid()) throw Error(ErrorCode::parse_error, "purpose symptom out of range: " + digits);
    return for_symptom(item);
  }
  throw Error(ErrorCode::parse_error, "unknown purpose '" + std::string(s) + "'");
}

std::vector<std::string_view> DialogueTranscript::patient_turns() const {
  std::vector<std::string_view> out;
  for (const auto& t : turns) {
    if (t.speaker == Speaker::patient) out.emplace_back(t.text);
  }
  return out;
}

std::vector<std::string> transcript_issues(const DialogueTranscript& t, const PersonaProfile* profile) {
  std::vector<std::string> issues;
  if (t.turns.empty()) issues.emplace_back("transcript has no turns");
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const Speaker expected = (i % 2 == 0) ? Speaker::therapist : Speaker::patient;
    if (t.turns[i].speaker != expected) {
      issues.push_back("turn " + std::to_string(i) + " should be spoken by the " +
                       std::string(to_string(expected)));
      break;
    }
  }
  if (t.attempt < 1) issues.emplace_back("attempt must be >= 1");
  if (t.purpose.kind == PurposeKind::symptom) {
    if (!t.purpose.symptom || !t.purpose.symptom->valid()) {
      issues.emplace_back("symptom purpose without a valid item");
    } else if (profile) {
      const auto& ks = profile->key_symptoms;
      if (std::find(ks.begin(), ks.end(), *t.purpose.symptom) == ks.end()) {
        issues.push_back("symptom '" + std::string(t.purpose.symptom->label()) +
                         "' is not a key symptom of " + profile->persona_id);
      }
    }
  }
  return issues;
}

Json transcript_meta_to_json(const DialogueTranscript& t) {
  return Json{{"transcript_id", t.transcript_id}, {"persona_id", t.persona_id},
              {"purpose", t.purpose.to_string()}, {"created_by", t.created_by},
              {"attempt", t.attempt},             {"turn_count", t.turns.size()}};
}

DialogueTranscript transcript_meta_from_json(const Json& j) {
  DialogueTranscript t;
  try {
    t.transcript_id = j.at("transcript_id").get<std::string>();
    t.persona_id = j.at("persona_id").get<std::string>();
    t.purpose = Purpose::parse(j.at("purpose").get<std::string>());
    t.created_by = j.at("created_by").get<std::string>();
    t.attempt = j.at("attempt").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad transcript metadata: ") + e.what());
  }
  return t;
}

std::string transcript_to_jsonl(const DialogueTranscript& t) {
  std::string out;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    Json line{{"transcript_id", t.transcript_id},
              {"idx", i},
              {"speaker", to_string(t.turns[i].speaker)},
              {"text", t.turns[i].text}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::string transcripts_to_jsonl(const std::vector<DialogueTranscript>& ts) {
  std::string out;
  for (const auto& t : ts) out += transcript_to_jsonl(t);
  return out;
}

std::vector<DialogueTranscript> transcripts_from_jsonl(std::string_view text) {
  std::vector<DialogueTranscript> out;
  std::map<std::string, std::size_t> index;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
      const auto id = j.at("transcript_id").get<std::string>();
      const auto idx = j.at("idx").get<std::size_t>();
      Turn turn{speaker_from_string(j.at("speaker").get<std::string>()), j.at("text").get<std::string>()};
      auto [it, inserted] = index.try_emplace(id, out.size());
      if (inserted) {
        out.emplace_back();
        out.back().transcript_id = id;
      }
      auto& t = out[it->second];
      if (idx != t.turns.size()) {
        throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": turn index " +
                                                std::to_string(idx) + " out of sequence for " + id);
      }
      t.turns.push_back(std::move(turn));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_transcript(const DialogueTranscript& t) {
  std::ostringstream out;
  for (const auto& turn : t.turns) {
    out << (turn.speaker == Speaker::therapist ? "Therapist: " : "Patient: ");
    for (char c : turn.text) out << (c == '\n' ? ' ' : c);
    out << '\n';
  }
  return out.str();
}

}  // namespace talkdep
