#include "talkdep/guardrails.hpp"

#include "talkdep/embedded.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <sstream>

namespace talkdep {

namespace {

constexpr std::array<std::string_view, 6> kContractions{"ll", "m", "re", "ve", "d", "s"};

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string flag_id_for(const FlagSource& src, FlagCategory cat, std::string_view evidence, std::size_t pos) {
  std::ostringstream key;
  key << src.transcript_id << '|' << (src.turn_index ? std::to_string(*src.turn_index) : "-") << '|'
      << to_string(cat) << '|' << evidence << '|' << pos;
  return "flag-" + sha256_hex(key.str()).substr(0, 16);
}

SafetyFlag make_flag(const FlagSource& src, FlagCategory cat, FlagSeverity sev, std::string detail,
                     std::string evidence, std::size_t pos) {
  SafetyFlag f;
  f.flag_id = flag_id_for(src, cat, evidence, pos);
  f.source = src;
  f.category = cat;
  f.severity = sev;
  f.detail = std::move(detail);
  f.evidence = std::move(evidence);
  return f;
}

// First token index at which needle occurs in hay, or npos.
std::size_t find_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return std::string::npos;
  auto it = std::search(hay.begin(), hay.end(), needle.begin(), needle.end());
  return it == hay.end() ? std::string::npos : static_cast<std::size_t>(it - hay.begin());
}

bool is_number(std::string_view t) {
  return !t.empty() && t.size() <= 3 && std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

const std::set<std::string, std::less<>> kNonAgeUnits{
    "minutes", "minute", "hours", "hour", "days", "day", "weeks", "week", "months", "month",
    "percent", "times", "kilos", "pounds", "miles", "km", "dollars", "euros", "pm", "am", "o",
};

Lexicon shipped_lexicon(std::string_view file) {
  auto text = embedded::find("lexicons/" + std::string(file));
  if (!text) throw Error(ErrorCode::not_found, "shipped lexicon missing: " + std::string(file));
  return parse_lexicon(*text);
}

}  // namespace

std::string_view to_string(FlagCategory c) {
  switch (c) {
    case FlagCategory::self_harm_cue: return "self_harm_cue";
    case FlagCategory::out_of_persona: return "out_of_persona";
    case FlagCategory::style_drift: return "style_drift";
    case FlagCategory::other: return "other";
  }
  return "other";
}

FlagCategory flag_category_from_string(std::string_view s) {
  if (s == "self_harm_cue") return FlagCategory::self_harm_cue;
  if (s == "out_of_persona") return FlagCategory::out_of_persona;
  if (s == "style_drift") return FlagCategory::style_drift;
  if (s == "other") return FlagCategory::other;
  throw Error(ErrorCode::parse_error, "unknown flag category '" + std::string(s) + "'");
}

std::string_view to_string(FlagSeverity s) {
  switch (s) {
    case FlagSeverity::info: return "info";
    case FlagSeverity::review: return "review";
    case FlagSeverity::block: return "block";
  }
  return "info";
}

FlagSeverity flag_severity_from_string(std::string_view s) {
  if (s == "info") return FlagSeverity::info;
  if (s == "review") return FlagSeverity::review;
  if (s == "block") return FlagSeverity::block;
  throw Error(ErrorCode::parse_error, "unknown flag severity '" + std::string(s) + "'");
}

Json to_json(const SafetyFlag& f) {
  Json res = nullptr;
  if (f.resolution) {
    res = Json{{"reviewer", f.resolution->reviewer},
               {"decision", f.resolution->decision},
               {"note", f.resolution->note},
               {"resolved_at", f.resolution->resolved_at}};
  }
  return Json{{"flag_id", f.flag_id},
              {"source", {{"transcript_id", f.source.transcript_id},
                          {"turn_index", f.source.turn_index ? Json(*f.source.turn_index) : Json(nullptr)}}},
              {"category", to_string(f.category)},
              {"severity", to_string(f.severity)},
              {"detail", f.detail},
              {"evidence", f.evidence},
              {"resolution", res}};
}

SafetyFlag safety_flag_from_json(const Json& j) {
  SafetyFlag f;
  try {
    f.flag_id = j.at("flag_id").get<std::string>();
    const Json& src = j.at("source");
    f.source.transcript_id = src.at("transcript_id").get<std::string>();
    if (!src.at("turn_index").is_null()) f.source.turn_index = src.at("turn_index").get<int>();
    f.category = flag_category_from_string(j.at("category").get<std::string>());
    f.severity = flag_severity_from_string(j.at("severity").get<std::string>());
    f.detail = j.at("detail").get<std::string>();
    f.evidence = j.at("evidence").get<std::string>();
    if (!j.at("resolution").is_null()) {
      const Json& r = j.at("resolution");
      f.resolution = Resolution{r.at("reviewer").get<std::string>(), r.at("decision").get<std::string>(),
                                r.at("note").get<std::string>(), r.at("resolved_at").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad flag record: ") + e.what());
  }
  return f;
}

std::vector<std::string> tokenize(std::string_view text) {
  // Normalize the typographic apostrophe (U+2019) to ASCII first.
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "\xE2\x80\x99") == 0) {
      s.push_back('\'');
      i += 2;
    } else {
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    }
  }
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    const auto apos = word.rfind('\'');
    if (apos != std::string::npos) {
      const std::string_view suffix = std::string_view(word).substr(apos + 1);
      if (std::find(kContractions.begin(), kContractions.end(), suffix) != kContractions.end()) {
        tokens.push_back(word.substr(0, apos));
        tokens.push_back(word.substr(apos));
        word.clear();
        return;
      }
    }
    tokens.push_back(word);
    word.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (word_byte(c)) {
      word.push_back(s[i]);
    } else if (c == '\'' && !word.empty() && i + 1 < s.size() && word_byte(static_cast<unsigned char>(s[i + 1]))) {
      word.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

bool Lexicon::contains_word(std::string_view token) const {
  for (const auto& p : phrase_tokens) {
    if (p.size() == 1 && p[0] == token) return true;
  }
  return false;
}

Lexicon parse_lexicon(std::string_view text) {
  Lexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto colon = t.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(std::string_view(t).substr(1, colon - 1));
      const std::string value = trim(std::string_view(t).substr(colon + 1));
      if (key == "lexicon") lex.name = value;
      else if (key == "version") lex.version = value;
      else if (key == "severity") lex.severity = flag_severity_from_string(value);
      continue;
    }
    const std::string phrase = to_lower(t);
    std::vector<std::string> toks;
    if (phrase[0] == '\'' && phrase.find(' ') == std::string::npos) {
      toks.push_back(phrase);  // bare contraction such as 'll
    } else {
      toks = tokenize(phrase);
    }
    if (toks.empty()) continue;
    lex.phrases.push_back(phrase);
    lex.phrase_tokens.push_back(std::move(toks));
  }
  if (lex.name.empty() || lex.version.empty()) {
    throw Error(ErrorCode::parse_error, "lexicon needs '# lexicon:' and '# version:' headers");
  }
  return lex;
}

const LexiconSet& LexiconSet::shipped() {
  static const LexiconSet set{
      shipped_lexicon("self_harm.txt"),      shipped_lexicon("absolutist.txt"),
      shipped_lexicon("future.txt"),         shipped_lexicon("present_markers.txt"),
      shipped_lexicon("past_irregular.txt"), shipped_lexicon("regular_ed_exceptions.txt"),
      shipped_lexicon("marital_status.txt"),
  };
  return set;
}

LexiconSet LexiconSet::load_dir(const std::filesystem::path& dir) {
  auto load = [&](const char* file) { return parse_lexicon(read_file(dir / file)); };
  return LexiconSet{load("self_harm.txt"),      load("absolutist.txt"),
                    load("future.txt"),         load("present_markers.txt"),
                    load("past_irregular.txt"), load("regular_ed_exceptions.txt"),
                    load("marital_status.txt")};
}

Json LexiconSet::versions() const {
  Json j = Json::object();
  for (const Lexicon* l : {&self_harm, &absolutist, &future, &present, &past, &ed_exceptions, &marital_status}) {
    j[l->name] = l->version;
  }
  return j;
}

std::vector<SafetyFlag> screen_text(std::string_view text, const LexiconSet& lexicons, const FlagSource& source) {
  std::vector<SafetyFlag> flags;
  const auto tokens = tokenize(text);
  if (tokens.empty()) return flags;
  const Lexicon& lex = lexicons.self_harm;
  for (std::size_t i = 0; i < lex.phrases.size(); ++i) {
    const auto pos = find_sequence(tokens, lex.phrase_tokens[i]);
    if (pos == std::string::npos) continue;
    flags.push_back(make_flag(source, FlagCategory::self_harm_cue, lex.severity,
                              "self-harm cue '" + lex.phrases[i] + "' (" + lex.name + " v" + lex.version + ")",
                              lex.phrases[i], pos));
  }
  return flags;
}

StyleReport measure_style(const std::vector<std::string_view>& texts, const LexiconSet& lex) {
  StyleReport r;
  for (auto text : texts) {
    for (const auto& tok : tokenize(text)) {
      ++r.token_count;
      if (lex.absolutist.contains_word(tok)) ++r.absolutist_words;
      if (lex.past.contains_word(tok)) {
        ++r.past_markers;
      } else if (lex.future.contains_word(tok)) {
        ++r.future_markers;
      } else if (lex.present.contains_word(tok)) {
        ++r.present_markers;
      } else if (tok.size() > 3 && tok.compare(tok.size() - 2, 2, "ed") == 0 && !lex.ed_exceptions.contains_word(tok)) {
        ++r.past_markers;
      }
    }
  }
  const int markers = r.past_markers + r.present_markers + r.future_markers;
  r.past_tense_ratio = markers == 0 ? 0.0 : static_cast<double>(r.past_markers) / markers;
  if (r.token_count > 0) {
    r.future_word_rate = 100.0 * r.future_markers / r.token_count;
    r.absolutist_rate = 100.0 * r.absolutist_words / r.token_count;
  }
  return r;
}

StyleAudit style_audit(const DialogueTranscript& transcript, const StyleSpec& style, const LexiconSet& lexicons,
                       const StyleThresholds& thresholds) {
  const auto patient = transcript.patient_turns();
  if (patient.empty()) throw Error(ErrorCode::precondition, "style audit needs at least one patient turn");
  StyleAudit audit;
  audit.report = measure_style(patient, lexicons);
  if (audit.report.token_count == 0) throw Error(ErrorCode::precondition, "patient turns contain no words");
  const auto& r = audit.report;
  const bool has_markers = r.past_markers + r.present_markers + r.future_markers > 0;
  if (style.past_over_future && has_markers && r.past_tense_ratio < thresholds.min_past_tense_ratio) {
    audit.drift = make_flag({transcript.transcript_id, std::nullopt}, FlagCategory::style_drift, FlagSeverity::info,
                            "past-tense ratio " + format_fixed(r.past_tense_ratio, 2) + " below " +
                                format_fixed(thresholds.min_past_tense_ratio, 2),
                            format_fixed(r.past_tense_ratio, 4), 0);
  }
  return audit;
}

Json to_json(const StyleReport& r) {
  return Json{{"token_count", r.token_count},
              {"past_markers", r.past_markers},
              {"present_markers", r.present_markers},
              {"future_markers", r.future_markers},
              {"absolutist_words", r.absolutist_words},
              {"past_tense_ratio", r.past_tense_ratio},
              {"future_word_rate", r.future_word_rate},
              {"absolutist_rate", r.absolutist_rate}};
}

std::vector<SafetyFlag> consistency_check(const DialogueTranscript& transcript, const PersonaProfile& profile,
                                          const LexiconSet& lexicons) {
  std::vector<SafetyFlag> flags;
  const auto name_tokens = tokenize(profile.name);
  const std::string first_name = name_tokens.empty() ? "" : name_tokens.front();
  std::optional<std::string> marital;
  if (auto it = profile.extra_attributes.find("marital_status"); it != profile.extra_attributes.end()) {
    marital = to_lower(trim(it->second));
  }

  for (std::size_t idx = 0; idx < transcript.turns.size(); ++idx) {
    const Turn& turn = transcript.turns[idx];
    if (turn.speaker != Speaker::patient) continue;
    const FlagSource src{transcript.transcript_id, static_cast<int>(idx)};
    const auto t = tokenize(turn.text);
    auto at = [&](std::size_t i) -> std::string_view { return i < t.size() ? std::string_view(t[i]) : ""; };

    for (std::size_t i = 0; i < t.size(); ++i) {
      // "my name is X" / "call me X"
      std::optional<std::size_t> name_at;
      if (at(i) == "my" && at(i + 1) == "name" && at(i + 2) == "is") name_at = i + 3;
      if (at(i) == "call" && at(i + 1) == "me") name_at = i + 2;
      if (name_at && *name_at < t.size() && !first_name.empty() && t[*name_at] != first_name) {
        flags.push_back(make_flag(src, FlagCategory::out_of_persona, FlagSeverity::review,
                                  "patient gives name '" + t[*name_at] + "', profile says '" + profile.name + "'",
                                  t[*name_at], i));
      }

      // "<n> years old", "aged <n>", "i am <n>" / "i'm <n>"
      std::optional<std::size_t> age_at;
      if (is_number(at(i)) && (at(i + 1) == "years" || at(i + 1) == "year") && at(i + 2) == "old") age_at = i;
      if ((at(i) == "aged" || at(i) == "age") && is_number(at(i + 1))) age_at = i + 1;
      if (at(i) == "i" && (at(i + 1) == "am" || at(i + 1) == "'m") && is_number(at(i + 2)) &&
          !kNonAgeUnits.count(at(i + 3))) {
        age_at = i + 2;
      }
      if (age_at && std::stoi(t[*age_at]) != profile.age) {
        flags.push_back(make_flag(src, FlagCategory::out_of_persona, FlagSeverity::review,
                                  "patient states age " + t[*age_at] + ", profile says " + std::to_string(profile.age),
                                  t[*age_at], *age_at));
      }

      // "i am <status>" / "i'm <status>", optionally with "now" in between
      if (marital && at(i) == "i" && (at(i + 1) == "am" || at(i + 1) == "'m")) {
        const std::size_t w = at(i + 2) == "now" ? i + 3 : i + 2;
        if (w < t.size() && lexicons.marital_status.contains_word(t[w]) && t[w] != *marital) {
          flags.push_back(make_flag(src, FlagCategory::out_of_persona, FlagSeverity::review,
                                    "patient says '" + t[w] + "', profile says '" + *marital + "'", t[w], w));
        }
      }
    }
  }
  return flags;
}

FlagQueue::FlagQueue(DataRoot root, Clock clock) : root_(std::move(root)), clock_(std::move(clock)) {
  for (const auto& line : read_lines(log_path())) {
    const Json event = Json::parse(line);
    if (event.at("event") == "raise") {
      SafetyFlag f = safety_flag_from_json(event.at("flag"));
      if (flags_.emplace(f.flag_id, f).second) order_.push_back(f.flag_id);
    } else if (event.at("event") == "resolve") {
      const Json& r = event.at("resolution");
      auto it = flags_.find(event.at("flag_id").get<std::string>());
      if (it != flags_.end()) {
        it->second.resolution = Resolution{r.at("reviewer").get<std::string>(), r.at("decision").get<std::string>(),
                                           r.at("note").get<std::string>(), r.at("resolved_at").get<std::string>()};
      }
    }
  }
}

void FlagQueue::raise(const std::vector<SafetyFlag>& flags) {
  std::lock_guard lock(mutex_);
  for (const auto& f : flags) {
    if (flags_.count(f.flag_id)) continue;
    append_line(log_path(), Json{{"event", "raise"}, {"flag", to_json(f)}}.dump());
    flags_.emplace(f.flag_id, f);
    order_.push_back(f.flag_id);
  }
}

SafetyFlag FlagQueue::resolve(const std::string& flag_id, Resolution resolution) {
  if (trim(resolution.reviewer).empty() || trim(resolution.decision).empty()) {
    throw Error(ErrorCode::validation_error, "resolution needs reviewer and decision");
  }
  std::lock_guard lock(mutex_);
  auto it = flags_.find(flag_id);
  if (it == flags_.end()) throw Error(ErrorCode::not_found, "unknown flag '" + flag_id + "'");
  if (it->second.resolution) throw Error(ErrorCode::conflict, "flag '" + flag_id + "' is already resolved");
  if (resolution.resolved_at.empty()) resolution.resolved_at = clock_();
  const Json r{{"reviewer", resolution.reviewer},
               {"decision", resolution.decision},
               {"note", resolution.note},
               {"resolved_at", resolution.resolved_at}};
  append_line(log_path(), Json{{"event", "resolve"}, {"flag_id", flag_id}, {"resolution", r}}.dump());
  it->second.resolution = std::move(resolution);
  return it->second;
}

std::vector<SafetyFlag> FlagQueue::list(bool unresolved_only) const {
  std::lock_guard lock(mutex_);
  std::vector<SafetyFlag> out;
  for (const auto& id : order_) {
    const auto& f = flags_.at(id);
    if (!unresolved_only || !f.resolution) out.push_back(f);
  }
  return out;
}

std::optional<SafetyFlag> FlagQueue::get(const std::string& flag_id) const {
  std::lock_guard lock(mutex_);
  auto it = flags_.find(flag_id);
  if (it == flags_.end()) return std::nullopt;
  return it->second;
}

bool FlagQueue::has_unresolved_block(std::string_view transcript_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& [id, f] : flags_) {
    if (f.severity == FlagSeverity::block && !f.resolution && f.source.transcript_id == transcript_id) return true;
  }
  return false;
}

}  // namespace talkdep
