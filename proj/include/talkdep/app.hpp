#pragma once

#include "talkdep/bench.hpp"
#include "talkdep/forms.hpp"
#include "talkdep/guardrails.hpp"
#include "talkdep/session.hpp"
#include "talkdep/synthesis.hpp"

#include <functional>
#include <memory>
#include <string>

namespace talkdep {

// Environment:
//   TALKDEP_DATA_ROOT        data root directory (./talkdep-data)
//   TALKDEP_PORT             service port (8080)
//   TALKDEP_BACKEND          oracle | http (oracle)
//   TALKDEP_BACKEND_URL      chat-completions base URL
//   TALKDEP_API_TOKEN        bearer token sent to the backend
//   TALKDEP_MODEL_ID         model id for every role (oracle)
//   TALKDEP_SEED             base seed (0)
//   TALKDEP_MAX_PARALLEL     concurrent backend calls (4)
//   TALKDEP_TIMEOUT_SECONDS  per-request timeout (120)
//   TALKDEP_SERVICE_TOKEN    when set, the service requires this bearer token
//   TALKDEP_ROSTER           roster JSON (shipped roster when unset)
//   TALKDEP_TEMPLATES        template directory (shipped templates when unset)
struct AppConfig {
  std::filesystem::path data_root = "talkdep-data";
  int port = 8080;
  std::string backend = "oracle";
  std::string backend_url = "http://localhost:11434/v1";
  std::string api_token;
  std::string model_id = "oracle";
  std::int64_t seed = 0;
  int max_parallel = 4;
  int timeout_seconds = 120;
  std::string service_token;
  std::string roster_path;
  std::string templates_dir;

  using Getenv = std::function<const char*(const char*)>;
  // Throws Error(invalid_argument) for malformed numbers or an unknown backend.
  static AppConfig from_env(const Getenv& getenv = nullptr);
  Json to_json() const;  // token fields redacted
};

std::shared_ptr<Backend> make_backend(const AppConfig& config);

// Owns the stores and gateway behind both the CLI and the service.
class App {
 public:
  explicit App(AppConfig config, std::shared_ptr<Backend> backend = nullptr, Clock clock = clock_from_env());

  const AppConfig& config() const { return config_; }
  const std::vector<PersonaProfile>& roster() const { return roster_; }
  const TemplateSet& templates() const { return templates_; }
  const LexiconSet& lexicons() const { return *lexicons_; }
  Gateway& gateway() { return *gateway_; }
  RunStore& runs() { return *runs_; }
  FlagQueue& flags() { return *flags_; }
  FormStore& forms() { return *forms_; }
  SessionManager& sessions() { return *sessions_; }
  const Clock& clock() const { return clock_; }

  SynthesisConfig synthesis_config(int max_attempts = 3) const;
  SynthesisRun synthesize(const std::string& persona_id, int max_attempts = 3);

  enum class EvalSource { accepted_overall, interview };
  // One eval transcript per persona with an accepted run, written as
  // <dir>/<persona_id>.jsonl: by default the accepted overall-severity
  // dialogue, or a fresh simulated interview against the accepted context.
  std::map<std::string, DialogueTranscript> eval_transcripts(const std::filesystem::path& dir,
                                                             EvalSource source = EvalSource::accepted_overall,
                                                             int interview_turns = 20);

  struct BenchOutcome {
    std::string run_id;
    BenchReport report;
  };
  BenchOutcome bench(const std::string& judge_model, const std::map<std::string, DialogueTranscript>& transcripts,
                     std::int64_t seed, bool both_orders = false);

  // Persisted as a forms-report run. Throws precondition without forms.
  std::pair<std::string, Json> forms_report();

 private:
  AppConfig config_;
  Clock clock_;
  std::vector<PersonaProfile> roster_;
  TemplateSet templates_;
  const LexiconSet* lexicons_;
  std::shared_ptr<Gateway> gateway_;
  std::shared_ptr<RunStore> runs_;
  std::shared_ptr<FlagQueue> flags_;
  std::unique_ptr<FormStore> forms_;
  std::unique_ptr<SessionManager> sessions_;
};

// Manifest for report-style runs.
Json run_manifest(const std::string& run_id, std::string_view kind, const Json& config, const std::string& created_at,
                  const Json& outcome, const Json& artifacts);

// Eval transcripts from <dir>/<persona_id>.jsonl files.
std::map<std::string, DialogueTranscript> load_transcript_dir(const std::filesystem::path& dir);

std::string report_json(const Json& j);

}  // namespace talkdep
