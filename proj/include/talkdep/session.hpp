#pragma once

#include "talkdep/context.hpp"
#include "talkdep/gateway.hpp"
#include "talkdep/guardrails.hpp"
#include "talkdep/store.hpp"
#include "talkdep/synthesis.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace talkdep {

enum class SessionStatus { open, closed };

std::string_view to_string(SessionStatus s);

struct Session {
  std::string session_id;
  std::string persona_id;
  PatientContext context;
  std::vector<ChatMessage> turns;  // user/assistant, system prompt held in context
  SessionStatus status = SessionStatus::open;
  std::vector<std::string> flags;
  std::string accepted_run;  // empty for profile-only sessions
  std::string created_at;
};

Json to_json(const Session& s);
Session session_from_json(const Json& j);
// Public view: no system prompt or exemplars.
Json session_summary(const Session& s);

struct TurnResult {
  ChatMessage reply;
  std::vector<SafetyFlag> flags;
};

// Interview sessions against the final patient simulator. Sessions persist
// under sessions/<id>/session.json, rewritten atomically after each change.
// Posts to one session are serialized; different sessions run in parallel.
class SessionManager {
 public:
  struct Deps {
    DataRoot root;
    std::shared_ptr<Gateway> gateway;
    std::shared_ptr<RunStore> runs;
    std::shared_ptr<FlagQueue> flags;
    std::vector<PersonaProfile> roster;
    TemplateSet templates;
    const LexiconSet* lexicons = &LexiconSet::shipped();
    CompletionParams patient{"oracle", 0.7, 512, std::nullopt};
    Clock clock = system_clock();
  };

  explicit SessionManager(Deps deps);

  // not_found for an unknown persona; precondition when there is no accepted
  // context and allow_profile_only is false.
  Session create_session(const std::string& persona_id, bool allow_profile_only = false);

  // conflict for a closed session, precondition while an unresolved
  // block-severity flag exists or for empty text, backend errors propagate.
  TurnResult post_turn(const std::string& session_id, const std::string& user_text);

  void close(const std::string& session_id);
  Session get(const std::string& session_id) const;
  std::vector<Session> list() const;

  // purpose=interview; user turns map to therapist, assistant to patient.
  DialogueTranscript export_transcript(const std::string& session_id) const;

 private:
  struct Slot {
    std::mutex mutex;
    Session session;
  };
  std::shared_ptr<Slot> slot(const std::string& session_id) const;
  void persist(const Session& s) const;

  Deps deps_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

// A scripted interview: therapist completions against a patient simulator
// context, therapist first. Used to produce eval transcripts for the bench.
DialogueTranscript simulate_interview(const PatientContext& context, Gateway& gateway, const TemplateSet& templates,
                                      int turns, const CompletionParams& therapist,
                                      const CompletionParams& patient, std::string_view run_id = {});

}  // namespace talkdep
