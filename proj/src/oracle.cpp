#include "talkdep/oracle.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <sstream>

namespace talkdep {

namespace {

constexpr std::array<std::string_view, 10> kTherapistQuestions = {
    "How have you been feeling over the last couple of weeks?",
    "Can you tell me a bit more about that?",
    "What has a typical day looked like for you lately?",
    "How has that been affecting the people around you?",
    "When did you first notice things changing?",
    "What do you usually do when it gets difficult?",
    "How have you been sleeping and eating?",
    "What used to bring you some enjoyment?",
    "How do you see yourself these days?",
    "What would you like to get out of talking today?",
};

constexpr std::array<std::string_view, 8> kPatientOpeners = {
    "I suppose it has been like this for a while",
    "I used to handle things better than I did this month",
    "It was a hard week, like the one before it",
    "I went through the motions at work and came home",
    "I kept thinking about how things were before",
    "Honestly I did not say much to anyone about it",
    "I tried to get on with it like I always did",
    "Last weekend I stayed in and let the day pass",
};

std::uint64_t stable_hash(std::string_view s) {
  const std::string hex = sha256_hex(s).substr(0, 16);
  return std::stoull(hex, nullptr, 16);
}

std::string first_line(std::string_view text) {
  const auto eol = text.find('\n');
  return trim(text.substr(0, eol));
}

// Value after "<key>" on the first line that starts with it.
std::optional<std::string> line_value(std::string_view text, std::string_view key) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line = trim(text.substr(pos, eol - pos));
    if (line.rfind(key, 0) == 0) return trim(std::string_view(line).substr(key.size()));
    pos = eol + 1;
  }
  return std::nullopt;
}

struct CueStats {
  long long cues = 0;
  long long turns = 0;
};

CueStats patient_line_stats(std::string_view text, std::string_view cue) {
  CueStats stats;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line = trim(text.substr(pos, eol - pos));
    if (line.rfind("Patient:", 0) == 0) {
      ++stats.turns;
      stats.cues += count_cues(line, cue);
    }
    pos = eol + 1;
  }
  return stats;
}

int predict_from(const CueStats& s, const OracleConfig& cfg) {
  // gain * cues / turns, rounded half-up, in integer arithmetic.
  const auto v = round_half_up_div(static_cast<std::int64_t>(cfg.assessor_gain) * s.cues, s.turns);
  return static_cast<int>(std::clamp<std::int64_t>(v, kBdiMin, kBdiMax));
}

std::map<BdiItemId, bool> detect_symptoms(std::string_view patient_text) {
  std::map<BdiItemId, bool> presence;
  for (const auto& item : all_bdi_items()) {
    presence[item] = patient_text.find(symptom_mention(item)) != std::string_view::npos;
  }
  return presence;
}

// Compares a.cues/a.turns against b.cues/b.turns exactly.
Verdict compare_density(const CueStats& a, const CueStats& b) {
  if (a.turns == 0 || b.turns == 0) {
    throw Error(ErrorCode::precondition, "oracle judge needs patient turns on both sides");
  }
  const long long lhs = a.cues * b.turns;
  const long long rhs = b.cues * a.turns;
  if (lhs > rhs) return Verdict::A;
  if (rhs > lhs) return Verdict::B;
  return Verdict::Neither;
}

CueStats transcript_stats(const DialogueTranscript& t, std::string_view cue) {
  CueStats s;
  for (auto text : t.patient_turns()) {
    ++s.turns;
    s.cues += count_cues(text, cue);
  }
  return s;
}

}  // namespace

int cues_per_reply(int bdi) { return cues_in_reply(bdi, 1); }

int cues_in_reply(int bdi, int reply_index) {
  if (bdi < 0 || reply_index < 1) throw Error(ErrorCode::invalid_argument, "cues_in_reply domain");
  const auto upto = [&](std::int64_t t) { return round_half_up_div(t * bdi, 10); };
  return static_cast<int>(upto(reply_index) - upto(reply_index - 1));
}

int count_cues(std::string_view text, std::string_view cue_token) {
  if (cue_token.empty()) return 0;
  int n = 0;
  for (std::size_t pos = text.find(cue_token); pos != std::string_view::npos;
       pos = text.find(cue_token, pos + cue_token.size())) {
    ++n;
  }
  return n;
}

std::string symptom_mention(BdiItemId item) { return "It's mostly the " + std::string(item.label()) + "."; }

SeverityAssessment oracle_assess(const std::vector<DialogueTranscript>& transcripts, const OracleConfig& cfg,
                                 const BandTable& bands) {
  if (transcripts.empty()) throw Error(ErrorCode::precondition, "oracle_assess needs transcripts");
  CueStats total;
  std::string patient_text;
  for (const auto& t : transcripts) {
    const auto s = transcript_stats(t, cfg.cue_token);
    total.cues += s.cues;
    total.turns += s.turns;
    for (auto text : t.patient_turns()) {
      patient_text.append(text);
      patient_text.push_back('\n');
    }
  }
  if (total.turns == 0) throw Error(ErrorCode::precondition, "no patient turns to assess");
  SeverityAssessment a;
  a.predicted_bdi = cfg.fixed_assessment ? *cfg.fixed_assessment : predict_from(total, cfg);
  a.predicted_band = bands.band_of(a.predicted_bdi);
  a.symptom_presence = detect_symptoms(patient_text);
  a.assessor_model = "oracle";
  a.rationale = "Scripted oracle: " + std::to_string(total.cues) + " cues over " +
                std::to_string(total.turns) + " patient turns.";
  return a;
}

Verdict oracle_judge(const DialogueTranscript& a, const DialogueTranscript& b, const OracleConfig& cfg) {
  if (a.turns.empty() || b.turns.empty()) {
    throw Error(ErrorCode::precondition, "oracle judge needs two non-empty transcripts");
  }
  return compare_density(transcript_stats(a, cfg.cue_token), transcript_stats(b, cfg.cue_token));
}

ChatMessage ScriptedOracle::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  if (messages.empty()) throw Error(ErrorCode::precondition, "oracle needs at least one message");
  const std::string& lead = messages.front().content;
  const std::string heading = first_line(lead);
  std::string reply;
  if (heading == "# Patient") {
    reply = patient_reply(messages);
  } else if (heading == "# Therapist") {
    reply = therapist_reply(messages);
  } else if (heading == "# Severity assessment") {
    reply = assessor_reply(lead, params);
  } else if (heading == "# Pairwise comparison") {
    reply = judge_reply(lead);
  } else {
    throw Error(ErrorCode::backend_rejected, "scripted oracle does not recognise prompt '" + heading + "'");
  }
  return {ChatRole::assistant, reply};
}

std::string ScriptedOracle::patient_reply(const std::vector<ChatMessage>& messages) const {
  const std::string& system = messages.front().content;
  const auto score_text = line_value(system, "BDI-II score:");
  if (!score_text) throw Error(ErrorCode::backend_rejected, "patient prompt has no BDI-II score line");
  int bdi = 0;
  try {
    bdi = std::stoi(*score_text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::backend_rejected, "unreadable BDI-II score '" + *score_text + "'");
  }
  const int reply_index =
      1 + static_cast<int>(std::count_if(messages.begin(), messages.end(),
                                         [](const ChatMessage& m) { return m.role == ChatRole::assistant; }));

  // Symptom to surface: the session focus when it names one, otherwise cycle
  // through the key symptoms.
  std::optional<BdiItemId> symptom;
  if (auto focus = line_value(system, "Session focus: the symptom")) {
    std::string label = *focus;
    label.erase(std::remove(label.begin(), label.end(), '"'), label.end());
    symptom = find_bdi_item(label);
  }
  if (!symptom) {
    if (auto list = line_value(system, "Key symptoms:")) {
      std::vector<BdiItemId> items;
      std::stringstream ss(*list);
      std::string part;
      while (std::getline(ss, part, ';')) {
        if (auto id = find_bdi_item(part)) items.push_back(*id);
      }
      if (!items.empty()) symptom = items[static_cast<std::size_t>(reply_index - 1) % items.size()];
    }
  }

  const std::uint64_t h = stable_hash(system) ^ static_cast<std::uint64_t>(cfg_.seed) ^
                          (static_cast<std::uint64_t>(reply_index) * 0x9E3779B97F4A7C15ULL);
  std::string out(kPatientOpeners[h % kPatientOpeners.size()]);
  out += '.';
  if (symptom) out += " " + symptom_mention(*symptom);
  for (int i = 0; i < cues_in_reply(bdi, reply_index); ++i) out += " " + cfg_.cue_token;
  return out;
}

std::string ScriptedOracle::therapist_reply(const std::vector<ChatMessage>& messages) const {
  const auto turn = static_cast<std::uint64_t>(std::count_if(
      messages.begin(), messages.end(), [](const ChatMessage& m) { return m.role == ChatRole::assistant; }));
  if (turn == 0) return std::string(kTherapistQuestions[0]);
  const std::uint64_t h = stable_hash(messages.front().content) ^ static_cast<std::uint64_t>(cfg_.seed) ^
                          (turn * 0xBF58476D1CE4E5B9ULL);
  return std::string(kTherapistQuestions[1 + h % (kTherapistQuestions.size() - 1)]);
}

std::string ScriptedOracle::assessor_reply(const std::string& prompt, const CompletionParams& params) const {
  const CueStats stats = patient_line_stats(prompt, cfg_.cue_token);
  if (stats.turns == 0) throw Error(ErrorCode::backend_rejected, "assessor prompt holds no patient turns");
  std::string patient_text;
  std::stringstream ss(prompt);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind("Patient:", 0) == 0) patient_text += line + "\n";
  }
  SeverityAssessment a;
  a.predicted_bdi = cfg_.fixed_assessment ? *cfg_.fixed_assessment : predict_from(stats, cfg_);
  a.symptom_presence = detect_symptoms(patient_text);
  a.assessor_model = params.model_id;
  a.rationale = "Scripted oracle: " + std::to_string(stats.cues) + " cues over " +
                std::to_string(stats.turns) + " patient turns.";
  return format_assessment_reply(a);
}

std::string ScriptedOracle::judge_reply(const std::string& prompt) const {
  const auto a_pos = prompt.find("Person A transcript:");
  const auto b_pos = prompt.find("Person B transcript:");
  if (a_pos == std::string::npos || b_pos == std::string::npos || b_pos < a_pos) {
    throw Error(ErrorCode::backend_rejected, "judge prompt lacks the Person A/B sections");
  }
  const auto a_stats = patient_line_stats(std::string_view(prompt).substr(a_pos, b_pos - a_pos), cfg_.cue_token);
  const auto b_stats = patient_line_stats(std::string_view(prompt).substr(b_pos), cfg_.cue_token);
  const Verdict v = compare_density(a_stats, b_stats);
  std::string reply = "Comparing how often distress shows up in each transcript.\nVERDICT: ";
  reply += v == Verdict::A ? "A" : v == Verdict::B ? "B" : "NEITHER";
  return reply;
}

}  // namespace talkdep
