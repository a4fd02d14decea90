#include "talkdep/session.hpp"

namespace talkdep {

namespace {

Speaker speaker_of(ChatRole role) { return role == ChatRole::user ? Speaker::therapist : Speaker::patient; }

Json context_to_json(const PatientContext& c) {
  Json exemplars = Json::array();
  for (const auto& t : c.exemplar_dialogues) {
    Json meta = transcript_meta_to_json(t);
    Json turns = Json::array();
    for (const auto& turn : t.turns) turns.push_back({{"speaker", to_string(turn.speaker)}, {"text", turn.text}});
    meta["turns"] = turns;
    exemplars.push_back(meta);
  }
  return Json{{"profile", to_json(c.profile)},
              {"exemplar_dialogues", exemplars},
              {"rendered_system_prompt", c.rendered_system_prompt}};
}

PatientContext context_from_json(const Json& j) {
  PatientContext c;
  c.profile = profile_from_json(j.at("profile"));
  for (const auto& e : j.at("exemplar_dialogues")) {
    DialogueTranscript t = transcript_meta_from_json(e);
    for (const auto& turn : e.at("turns")) {
      t.turns.push_back({speaker_from_string(turn.at("speaker").get<std::string>()), turn.at("text").get<std::string>()});
    }
    c.exemplar_dialogues.push_back(std::move(t));
  }
  c.rendered_system_prompt = j.at("rendered_system_prompt").get<std::string>();
  return c;
}

}  // namespace

std::string_view to_string(SessionStatus s) { return s == SessionStatus::open ? "open" : "closed"; }

Json to_json(const Session& s) {
  Json turns = Json::array();
  for (const auto& m : s.turns) turns.push_back(to_json(m));
  return Json{{"session_id", s.session_id},
              {"persona_id", s.persona_id},
              {"status", to_string(s.status)},
              {"accepted_run", s.accepted_run},
              {"created_at", s.created_at},
              {"flags", s.flags},
              {"turns", turns},
              {"context", context_to_json(s.context)}};
}

Session session_from_json(const Json& j) {
  Session s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    s.persona_id = j.at("persona_id").get<std::string>();
    s.status = j.at("status").get<std::string>() == "open" ? SessionStatus::open : SessionStatus::closed;
    s.accepted_run = j.at("accepted_run").get<std::string>();
    s.created_at = j.at("created_at").get<std::string>();
    s.flags = j.at("flags").get<std::vector<std::string>>();
    for (const auto& m : j.at("turns")) s.turns.push_back(chat_message_from_json(m));
    s.context = context_from_json(j.at("context"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad session record: ") + e.what());
  }
  return s;
}

Json session_summary(const Session& s) {
  return Json{{"session_id", s.session_id},
              {"persona_id", s.persona_id},
              {"persona_name", s.context.profile.name},
              {"status", to_string(s.status)},
              {"accepted_run", s.accepted_run.empty() ? Json(nullptr) : Json(s.accepted_run)},
              {"profile_only", s.accepted_run.empty()},
              {"created_at", s.created_at},
              {"turn_count", s.turns.size()},
              {"flags", s.flags}};
}

SessionManager::SessionManager(Deps deps) : deps_(std::move(deps)) {
  if (!deps_.gateway || !deps_.runs || !deps_.flags) {
    throw Error(ErrorCode::invalid_argument, "session manager needs gateway, run store and flag queue");
  }
  // Restart-safe: pick up every persisted session.
  const auto dir = deps_.root.sessions();
  if (fs::exists(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto file = entry.path() / "session.json";
      if (!fs::exists(file)) continue;
      auto slot = std::make_shared<Slot>();
      slot->session = session_from_json(Json::parse(read_file(file)));
      sessions_[slot->session.session_id] = slot;
    }
  }
}

Session SessionManager::create_session(const std::string& persona_id, bool allow_profile_only) {
  const auto* profile = find_persona(deps_.roster, persona_id);
  if (!profile) throw Error(ErrorCode::not_found, "unknown persona '" + persona_id + "'");

  Session s;
  s.persona_id = persona_id;
  if (auto run = deps_.runs->accepted_run(persona_id)) {
    auto ctx = deps_.runs->accepted_context(persona_id);
    if (ctx) {
      s.context = std::move(*ctx);
      s.accepted_run = *run;
    }
  }
  if (s.accepted_run.empty()) {
    if (!allow_profile_only) {
      throw Error(ErrorCode::precondition, "persona '" + persona_id + "' has no accepted simulator context");
    }
    s.context = build_profile_only_context(*profile, deps_.templates.patient_simulator);
  }
  s.created_at = deps_.clock();

  std::lock_guard lock(mutex_);
  const std::string seed = persona_id + "|" + s.created_at + "|" + std::to_string(sessions_.size());
  s.session_id = "sess-" + sha256_hex(seed).substr(0, 12);
  while (sessions_.count(s.session_id)) s.session_id = "sess-" + sha256_hex(s.session_id).substr(0, 12);
  persist(s);
  auto slot = std::make_shared<Slot>();
  slot->session = s;
  sessions_[s.session_id] = slot;
  return s;
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::not_found, "unknown session '" + session_id + "'");
  return it->second;
}

TurnResult SessionManager::post_turn(const std::string& session_id, const std::string& user_text) {
  auto sl = slot(session_id);
  std::lock_guard lock(sl->mutex);
  Session& s = sl->session;
  if (s.status == SessionStatus::closed) throw Error(ErrorCode::conflict, "session '" + session_id + "' is closed");
  if (trim(user_text).empty()) throw Error(ErrorCode::invalid_argument, "turn text must not be empty");
  if (deps_.flags->has_unresolved_block(session_id)) {
    throw Error(ErrorCode::precondition, "session '" + session_id + "' is blocked by an unresolved flag");
  }

  std::vector<ChatMessage> messages{{ChatRole::system, s.context.rendered_system_prompt}};
  messages.insert(messages.end(), s.turns.begin(), s.turns.end());
  messages.push_back({ChatRole::user, user_text});
  ChatMessage reply = deps_.gateway->complete(messages, deps_.patient, session_id);

  Session next = s;
  next.turns.push_back({ChatRole::user, user_text});
  next.turns.push_back(reply);

  const int reply_index = static_cast<int>(next.turns.size()) - 1;
  TurnResult result{reply, screen_text(reply.content, *deps_.lexicons, {session_id, reply_index})};
  DialogueTranscript single;
  single.transcript_id = session_id;
  for (const auto& m : next.turns) single.turns.push_back({speaker_of(m.role), m.content});
  for (auto& f : consistency_check(single, s.context.profile, *deps_.lexicons)) {
    if (f.source.turn_index == reply_index) result.flags.push_back(std::move(f));
  }
  for (const auto& f : result.flags) next.flags.push_back(f.flag_id);

  // Flags and the turn are on disk before the reply is returned.
  deps_.flags->raise(result.flags);
  persist(next);
  s = std::move(next);
  return result;
}

void SessionManager::close(const std::string& session_id) {
  auto sl = slot(session_id);
  std::lock_guard lock(sl->mutex);
  if (sl->session.status == SessionStatus::closed) return;
  Session next = sl->session;
  next.status = SessionStatus::closed;
  persist(next);
  sl->session = std::move(next);
}

Session SessionManager::get(const std::string& session_id) const {
  auto sl = slot(session_id);
  std::lock_guard lock(sl->mutex);
  return sl->session;
}

std::vector<Session> SessionManager::list() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, sl] : sessions_) slots.push_back(sl);
  }
  std::vector<Session> out;
  for (const auto& sl : slots) {
    std::lock_guard lock(sl->mutex);
    out.push_back(sl->session);
  }
  return out;
}

DialogueTranscript SessionManager::export_transcript(const std::string& session_id) const {
  const Session s = get(session_id);
  DialogueTranscript t;
  t.transcript_id = s.session_id;
  t.persona_id = s.persona_id;
  t.purpose = Purpose::interview();
  t.created_by = deps_.patient.model_id;
  for (const auto& m : s.turns) t.turns.push_back({speaker_of(m.role), m.content});
  return t;
}

void SessionManager::persist(const Session& s) const {
  write_file_atomic(deps_.root.sessions() / s.session_id / "session.json", to_json(s).dump(2) + "\n");
}

DialogueTranscript simulate_interview(const PatientContext& context, Gateway& gateway, const TemplateSet& templates,
                                      int turns, const CompletionParams& therapist, const CompletionParams& patient,
                                      std::string_view run_id) {
  if (turns < 2) throw Error(ErrorCode::invalid_argument, "an interview needs at least two turns");
  const std::string therapist_system = render(
      templates.therapist, {{"focus", "a first assessment interview: how the client has been feeling and coping."}});
  DialogueTranscript t;
  t.transcript_id = context.profile.persona_id + "-eval";
  t.persona_id = context.profile.persona_id;
  t.purpose = Purpose::eval();
  t.created_by = patient.model_id;
  for (int i = 0; i < turns; ++i) {
    const Speaker speaker = i % 2 == 0 ? Speaker::therapist : Speaker::patient;
    std::vector<ChatMessage> msgs{
        {ChatRole::system, speaker == Speaker::therapist ? therapist_system : context.rendered_system_prompt}};
    if (speaker == Speaker::therapist && t.turns.empty()) {
      msgs.push_back({ChatRole::user, "(The client has just sat down. Open the session.)"});
    }
    for (const auto& turn : t.turns) {
      msgs.push_back({turn.speaker == speaker ? ChatRole::assistant : ChatRole::user, turn.text});
    }
    const ChatMessage reply =
        gateway.complete(msgs, speaker == Speaker::therapist ? therapist : patient, run_id);
    const std::string text = trim(reply.content);
    if (text.empty()) throw Error(ErrorCode::malformed_payload, "blank interview turn");
    t.turns.push_back({speaker, text});
  }
  return t;
}

}  // namespace talkdep
