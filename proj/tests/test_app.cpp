#include "support.hpp"

#include "talkdep/app.hpp"

#include <doctest.h>

using namespace talkdep;
using testing::TempDir;

namespace {

AppConfig::Getenv env(std::map<std::string, std::string> vars) {
  auto store = std::make_shared<std::map<std::string, std::string>>(std::move(vars));
  return [store](const char* k) -> const char* {
    auto it = store->find(k);
    return it == store->end() ? nullptr : it->second.c_str();
  };
}

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

TEST_CASE("configuration from the environment") {
  const auto defaults = AppConfig::from_env(env({}));
  CHECK(defaults.port == 8080);
  CHECK(defaults.backend == "oracle");
  CHECK(defaults.max_parallel == 4);

  const auto c = AppConfig::from_env(env({{"TALKDEP_DATA_ROOT", "/tmp/x"},
                                          {"TALKDEP_PORT", "9000"},
                                          {"TALKDEP_BACKEND", "http"},
                                          {"TALKDEP_BACKEND_URL", "https://example.test/v1"},
                                          {"TALKDEP_API_TOKEN", "tok"},
                                          {"TALKDEP_MODEL_ID", "llama3.1:8b"},
                                          {"TALKDEP_SEED", "17"},
                                          {"TALKDEP_MAX_PARALLEL", "2"},
                                          {"TALKDEP_TIMEOUT_SECONDS", "30"},
                                          {"TALKDEP_SERVICE_TOKEN", "svc"}}));
  CHECK(c.data_root == "/tmp/x");
  CHECK(c.port == 9000);
  CHECK(c.backend == "http");
  CHECK(c.backend_url == "https://example.test/v1");
  CHECK(c.model_id == "llama3.1:8b");
  CHECK(c.seed == 17);
  CHECK(c.max_parallel == 2);
  CHECK(c.timeout_seconds == 30);
  const auto dumped = c.to_json().dump();
  CHECK(dumped.find("tok\"") == std::string::npos);
  CHECK(dumped.find("svc") == std::string::npos);

  CHECK(code_of([] { AppConfig::from_env(env({{"TALKDEP_PORT", "eighty"}})); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { AppConfig::from_env(env({{"TALKDEP_PORT", "70000"}})); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { AppConfig::from_env(env({{"TALKDEP_BACKEND", "magic"}})); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { AppConfig::from_env(env({{"TALKDEP_MAX_PARALLEL", "0"}})); }) == ErrorCode::invalid_argument);
}

TEST_CASE("end to end through the app") {
  TempDir dir;
  AppConfig cfg;
  cfg.data_root = dir.path();
  App app(cfg, nullptr, fixed_clock("2024-06-01T00:00:00Z"));
  for (const auto& p : app.roster()) REQUIRE(app.synthesize(p.persona_id).status == RunStatus::accepted);

  const auto ts = app.eval_transcripts(dir.path() / "eval");
  CHECK(ts.size() == 12);
  CHECK(fs::exists(dir.path() / "eval" / "maria.jsonl"));
  const auto loaded = load_transcript_dir(dir.path() / "eval");
  REQUIRE(loaded.size() == 12);
  CHECK(loaded.at("maria").turns == ts.at("maria").turns);

  const auto outcome = app.bench("oracle", loaded, 5);
  CHECK(outcome.run_id.rfind("bench-", 0) == 0);
  CHECK(outcome.report.total_pairs == 66);
  CHECK(outcome.report.accuracy_pct == 100.0);
  CHECK(outcome.report.neither_count == 0);
  const auto stored = app.runs().load_report(outcome.run_id);
  REQUIRE(stored.has_value());
  CHECK(bench_report_from_json(*stored).verdicts == outcome.report.verdicts);
  const Json manifest = Json::parse(read_file(dir.path() / "runs" / outcome.run_id / "manifest.json"));
  CHECK(manifest["kind"] == "bench");
  CHECK(manifest["created_at"] == "2024-06-01T00:00:00Z");

  CHECK(code_of([&] { app.forms_report(); }) == ErrorCode::precondition);
  CHECK(code_of([&] { app.synthesize("nobody"); }) == ErrorCode::not_found);

  const auto interviews = app.eval_transcripts(dir.path() / "interviews", App::EvalSource::interview, 12);
  CHECK(interviews.at("noah").turns.size() == 12);
  CHECK(code_of([&] { load_transcript_dir(dir.path() / "missing"); }) == ErrorCode::not_found);
}
