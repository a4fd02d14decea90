#pragma once

#include "talkdep/common.hpp"
#include "talkdep/persona.hpp"
#include "talkdep/store.hpp"
#include "talkdep/transcript.hpp"

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <string>

namespace testing {

namespace fs = std::filesystem;

// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("talkdep-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// Relative path -> bytes for every regular file under root.
inline std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = talkdep::read_file(e.path());
  }
  return out;
}

// Published roster scores: persona id -> (score, band name).
inline const std::map<std::string, std::pair<int, std::string>>& published_scores() {
  static const std::map<std::string, std::pair<int, std::string>> t{
      {"maria", {40, "severe"}},   {"marco", {38, "severe"}},   {"elena", {35, "severe"}},
      {"linda", {28, "moderate"}}, {"laura", {23, "moderate"}}, {"james", {22, "moderate"}},
      {"alex", {15, "mild"}},      {"gabriel", {13, "mild"}},   {"ethan", {12, "mild"}},
      {"priya", {7, "minimal"}},   {"maya", {6, "minimal"}},    {"noah", {5, "minimal"}},
  };
  return t;
}

inline const talkdep::PersonaProfile& persona(const std::string& id) {
  const auto* p = talkdep::find_persona(talkdep::default_roster(), id);
  if (!p) throw std::runtime_error("no persona " + id);
  return *p;
}

// Published per-persona rating means, columns Hum Nat Flu Emo Sym Eng Cog.
inline const std::map<std::string, std::array<double, 7>>& published_ratings() {
  static const std::map<std::string, std::array<double, 7>> t{
      {"maya", {3.5, 4, 4.5, 4, 4, 4, 3.5}},      {"noah", {3, 3, 4, 3.5, 4, 3.5, 4}},
      {"priya", {3.5, 4.5, 4.5, 4, 4.5, 4, 4.5}}, {"alex", {3, 4, 4.5, 4, 4, 4, 4}},
      {"ethan", {3.5, 4.5, 4.5, 3.5, 4, 4.5, 4.5}}, {"gabriel", {3, 3.5, 4, 4, 3.5, 3, 3.5}},
      {"james", {3.5, 4, 4.5, 3.5, 4.5, 4, 3.5}}, {"laura", {4, 4.5, 4.5, 4.5, 4.5, 3.5, 4.5}},
      {"linda", {3.5, 4, 4.5, 3.5, 3.5, 3.5, 3}}, {"elena", {4.5, 4.5, 4.5, 4.5, 4, 3.5, 3.5}},
      {"marco", {4, 4, 4.5, 4, 4.5, 3.5, 3.5}},   {"maria", {4, 4, 4.5, 3.5, 4, 3, 3}},
  };
  return t;
}

// A transcript whose patient turns carry the given cue counts.
inline talkdep::DialogueTranscript cue_transcript(const std::string& id, const std::vector<int>& cues,
                                                  const std::string& cue = "[[CUE]]") {
  talkdep::DialogueTranscript t;
  t.transcript_id = id;
  t.persona_id = id;
  t.purpose = talkdep::Purpose::eval();
  for (int n : cues) {
    t.turns.push_back({talkdep::Speaker::therapist, "How are you?"});
    std::string text = "Fine.";
    for (int i = 0; i < n; ++i) text += " " + cue;
    t.turns.push_back({talkdep::Speaker::patient, text});
  }
  return t;
}

// Independent count of non-overlapping occurrences.
inline int count_substr(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace testing
