#include "support.hpp"

#include "talkdep/app.hpp"
#include "talkdep/oracle.hpp"

#include <doctest.h>

#include <thread>

using namespace talkdep;
using testing::TempDir;

namespace {

AppConfig config_for(const TempDir& dir) {
  AppConfig c;
  c.data_root = dir.path();
  return c;
}

// Oracle patient whose replies can be replaced.
struct Rig {
  std::shared_ptr<ScriptedOracle> oracle = std::make_shared<ScriptedOracle>(OracleConfig{});
  std::function<std::optional<std::string>()> override_reply;
  std::shared_ptr<Backend> backend = std::make_shared<FunctionBackend>(
      [this](const std::vector<ChatMessage>& m, const CompletionParams& p) -> ChatMessage {
        if (override_reply && m.back().role == ChatRole::user) {
          if (auto r = override_reply()) return {ChatRole::assistant, *r};
        }
        return oracle->complete(m, p);
      });
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error");
  return ErrorCode::io_error;
}

}  // namespace

TEST_CASE("creating sessions") {
  TempDir dir;
  App app(config_for(dir), nullptr, fixed_clock("2024-03-01T00:00:00Z"));
  REQUIRE(app.synthesize("laura").status == RunStatus::accepted);

  const auto s = app.sessions().create_session("laura");
  CHECK(s.status == SessionStatus::open);
  CHECK(s.session_id.rfind("sess-", 0) == 0);
  CHECK(s.accepted_run == *app.runs().accepted_run("laura"));
  CHECK(s.context.exemplar_dialogues.size() == 5);
  CHECK(s.context.rendered_system_prompt.rfind("# Patient", 0) == 0);
  CHECK(fs::exists(dir.path() / "sessions" / s.session_id / "session.json"));

  CHECK(code_of([&] { app.sessions().create_session("nobody"); }) == ErrorCode::not_found);
  CHECK(code_of([&] { app.sessions().create_session("noah"); }) == ErrorCode::precondition);
  const auto profile_only = app.sessions().create_session("noah", true);
  CHECK(profile_only.accepted_run.empty());
  CHECK(profile_only.context.exemplar_dialogues.empty());
  CHECK(profile_only.session_id != s.session_id);

  const Json summary = session_summary(s);
  CHECK_FALSE(summary.dump().find(s.context.rendered_system_prompt.substr(0, 40)) != std::string::npos);
  CHECK(summary["persona_id"] == "laura");
}

TEST_CASE("posting turns") {
  TempDir dir;
  App app(config_for(dir), nullptr, fixed_clock("2024-03-01T00:00:00Z"));
  app.synthesize("maria");
  const auto s = app.sessions().create_session("maria");
  const auto r = app.sessions().post_turn(s.session_id, "What brings you here today?");
  CHECK(r.reply.role == ChatRole::assistant);
  CHECK(testing::count_substr(r.reply.content, "[[CUE]]") == 4);
  CHECK(r.flags.empty());

  // Durable before return.
  const Json stored = Json::parse(read_file(dir.path() / "sessions" / s.session_id / "session.json"));
  CHECK(stored["turns"].size() == 2);
  CHECK(stored["turns"][1]["content"] == r.reply.content);

  CHECK(code_of([&] { app.sessions().post_turn(s.session_id, "   "); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { app.sessions().post_turn("sess-none", "hi"); }) == ErrorCode::not_found);
  app.sessions().close(s.session_id);
  CHECK(code_of([&] { app.sessions().post_turn(s.session_id, "Still there?"); }) == ErrorCode::conflict);
  CHECK(app.sessions().get(s.session_id).status == SessionStatus::closed);
}

TEST_CASE("guardrails run on every reply") {
  TempDir dir;
  Rig rig;
  App app(config_for(dir), rig.backend, fixed_clock("2024-03-01T00:00:00Z"));
  app.synthesize("laura");
  const auto s = app.sessions().create_session("laura");

  rig.override_reply = [] { return std::optional<std::string>("Some nights I want to die."); };
  const auto r = app.sessions().post_turn(s.session_id, "How are the nights?");
  CHECK(r.reply.content == "Some nights I want to die.");
  REQUIRE(r.flags.size() == 1);
  CHECK(r.flags[0].category == FlagCategory::self_harm_cue);
  CHECK(r.flags[0].severity == FlagSeverity::review);
  CHECK(r.flags[0].source.transcript_id == s.session_id);
  CHECK(r.flags[0].source.turn_index == 1);
  CHECK(app.flags().get(r.flags[0].flag_id).has_value());
  CHECK(app.sessions().get(s.session_id).flags == std::vector<std::string>{r.flags[0].flag_id});

  // Review flags do not block; a block flag does until it is resolved.
  rig.override_reply = nullptr;
  CHECK_NOTHROW(app.sessions().post_turn(s.session_id, "Tell me more."));
  SafetyFlag block = r.flags[0];
  block.flag_id = "flag-manual-block";
  block.severity = FlagSeverity::block;
  app.flags().raise({block});
  CHECK(code_of([&] { app.sessions().post_turn(s.session_id, "Are you safe?"); }) == ErrorCode::precondition);
  app.flags().resolve(block.flag_id, {"dr-k", "cleared", "", ""});
  CHECK_NOTHROW(app.sessions().post_turn(s.session_id, "Are you safe?"));

  rig.override_reply = [] { return std::optional<std::string>("My name is Zed."); };
  const auto oop = app.sessions().post_turn(s.session_id, "Who are you?");
  REQUIRE(oop.flags.size() == 1);
  CHECK(oop.flags[0].category == FlagCategory::out_of_persona);
  CHECK(oop.flags[0].source.turn_index == 7);
}

TEST_CASE("transcript export") {
  TempDir dir;
  App app(config_for(dir), nullptr, fixed_clock("2024-03-01T00:00:00Z"));
  app.synthesize("james");
  const auto s = app.sessions().create_session("james");
  const auto empty = app.sessions().export_transcript(s.session_id);
  CHECK(empty.turns.empty());
  CHECK(transcript_to_jsonl(empty).empty());

  for (const char* q : {"Hello.", "How was the week?", "And work?"}) app.sessions().post_turn(s.session_id, q);
  const auto t = app.sessions().export_transcript(s.session_id);
  CHECK(t.purpose == Purpose::interview());
  REQUIRE(t.turns.size() == 6);
  CHECK(t.turns[0].speaker == Speaker::therapist);
  CHECK(t.turns[0].text == "Hello.");
  CHECK(t.turns[1].speaker == Speaker::patient);
  const auto jsonl = transcript_to_jsonl(t);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 6);
  CHECK(transcript_to_jsonl(app.sessions().export_transcript(s.session_id)) == jsonl);
  const auto back = transcripts_from_jsonl(jsonl);
  REQUIRE(back.size() == 1);
  CHECK(back[0].transcript_id == t.transcript_id);
  CHECK(back[0].turns == t.turns);
  CHECK(code_of([&] { app.sessions().export_transcript("sess-x"); }) == ErrorCode::not_found);
}

TEST_CASE("sessions survive a restart") {
  TempDir dir;
  std::string id;
  std::vector<ChatMessage> turns;
  {
    App app(config_for(dir), nullptr, fixed_clock("2024-03-01T00:00:00Z"));
    app.synthesize("elena");
    id = app.sessions().create_session("elena").session_id;
    app.sessions().post_turn(id, "Hi.");
    turns = app.sessions().get(id).turns;
  }
  App again(config_for(dir), nullptr, fixed_clock("2024-03-02T00:00:00Z"));
  const auto s = again.sessions().get(id);
  CHECK(s.turns == turns);
  CHECK(s.persona_id == "elena");
  CHECK(s.created_at == "2024-03-01T00:00:00Z");
  CHECK(session_from_json(to_json(s)).turns == s.turns);
  again.sessions().post_turn(id, "Still with me?");
  CHECK(again.sessions().get(id).turns.size() == 4);
  // New ids do not collide with restored ones.
  CHECK(again.sessions().create_session("elena").session_id != id);
  CHECK(again.sessions().list().size() == 2);
}

TEST_CASE("concurrent posts are serialized per session") {
  TempDir dir;
  App app(config_for(dir), nullptr, fixed_clock("2024-03-01T00:00:00Z"));
  app.synthesize("linda");
  const auto a = app.sessions().create_session("linda").session_id;
  const auto b = app.sessions().create_session("linda").session_id;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        app.sessions().post_turn(t % 2 ? a : b, "q" + std::to_string(t) + "-" + std::to_string(i));
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& id : {a, b}) {
    const auto s = app.sessions().get(id);
    REQUIRE(s.turns.size() == 40);
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      CHECK(s.turns[i].role == (i % 2 == 0 ? ChatRole::user : ChatRole::assistant));
    }
    const Json stored = Json::parse(read_file(dir.path() / "sessions" / id / "session.json"));
    CHECK(stored["turns"].size() == 40);
  }
}

TEST_CASE("simulated interviews") {
  TempDir dir;
  App app(config_for(dir), nullptr, fixed_clock("2024-03-01T00:00:00Z"));
  app.synthesize("maria");
  const auto ctx = *app.runs().accepted_context("maria");
  const auto t = simulate_interview(ctx, app.gateway(), app.templates(), 20, {"oracle", 0.7, 256}, {"oracle", 0.7, 256});
  CHECK(t.transcript_id == "maria-eval");
  CHECK(t.purpose == Purpose::eval());
  CHECK(t.turns.size() == 20);
  CHECK(transcript_issues(t).empty());
  int cues = 0;
  for (auto p : t.patient_turns()) cues += testing::count_substr(std::string(p), "[[CUE]]");
  CHECK(cues == 40);
  CHECK(code_of([&] { simulate_interview(ctx, app.gateway(), app.templates(), 1, {}, {}); }) ==
        ErrorCode::invalid_argument);
}
