#include "talkdep/app.hpp"

#include "talkdep/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

namespace talkdep {

namespace {

template <typename T>
T parse_number(const char* name, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::invalid_argument, std::string(name) + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::set<std::string> persona_ids(const std::vector<PersonaProfile>& roster) {
  std::set<std::string> ids;
  for (const auto& p : roster) ids.insert(p.persona_id);
  return ids;
}

}  // namespace

AppConfig AppConfig::from_env(const Getenv& getenv) {
  const Getenv get = getenv ? getenv : Getenv([](const char* k) { return std::getenv(k); });
  AppConfig c;
  auto str = [&](const char* key, std::string& out) {
    if (const char* v = get(key); v && *v) out = v;
  };
  std::string root;
  str("TALKDEP_DATA_ROOT", root);
  if (!root.empty()) c.data_root = root;
  if (const char* v = get("TALKDEP_PORT"); v && *v) c.port = parse_number<int>("TALKDEP_PORT", v);
  str("TALKDEP_BACKEND", c.backend);
  str("TALKDEP_BACKEND_URL", c.backend_url);
  str("TALKDEP_API_TOKEN", c.api_token);
  str("TALKDEP_MODEL_ID", c.model_id);
  if (const char* v = get("TALKDEP_SEED"); v && *v) c.seed = parse_number<std::int64_t>("TALKDEP_SEED", v);
  if (const char* v = get("TALKDEP_MAX_PARALLEL"); v && *v) {
    c.max_parallel = parse_number<int>("TALKDEP_MAX_PARALLEL", v);
  }
  if (const char* v = get("TALKDEP_TIMEOUT_SECONDS"); v && *v) {
    c.timeout_seconds = parse_number<int>("TALKDEP_TIMEOUT_SECONDS", v);
  }
  str("TALKDEP_SERVICE_TOKEN", c.service_token);
  str("TALKDEP_ROSTER", c.roster_path);
  str("TALKDEP_TEMPLATES", c.templates_dir);

  if (c.backend != "oracle" && c.backend != "http") {
    throw Error(ErrorCode::invalid_argument, "TALKDEP_BACKEND must be 'oracle' or 'http'");
  }
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::invalid_argument, "TALKDEP_PORT out of range");
  if (c.max_parallel < 1) throw Error(ErrorCode::invalid_argument, "TALKDEP_MAX_PARALLEL must be >= 1");
  if (c.timeout_seconds < 1) throw Error(ErrorCode::invalid_argument, "TALKDEP_TIMEOUT_SECONDS must be >= 1");
  return c;
}

Json AppConfig::to_json() const {
  return Json{{"data_root", data_root.string()},
              {"port", port},
              {"backend", backend},
              {"backend_url", backend_url},
              {"api_token", api_token.empty() ? "" : "<redacted>"},
              {"model_id", model_id},
              {"seed", seed},
              {"max_parallel", max_parallel},
              {"timeout_seconds", timeout_seconds},
              {"service_token", service_token.empty() ? "" : "<redacted>"},
              {"roster", roster_path},
              {"templates", templates_dir}};
}

std::shared_ptr<Backend> make_backend(const AppConfig& config) {
  if (config.backend == "http") {
    return std::make_shared<HttpBackend>(HttpBackendConfig{config.backend_url, config.api_token, config.timeout_seconds});
  }
  OracleConfig oc;
  oc.seed = config.seed;
  return std::make_shared<ScriptedOracle>(oc);
}

App::App(AppConfig config, std::shared_ptr<Backend> backend, Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)), lexicons_(&LexiconSet::shipped()) {
  roster_ = config_.roster_path.empty() ? default_roster() : load_roster(config_.roster_path);
  templates_ = config_.templates_dir.empty() ? TemplateSet::defaults() : TemplateSet::load_dir(config_.templates_dir);
  if (!backend) backend = make_backend(config_);

  const DataRoot root(config_.data_root);
  GatewayConfig gc;
  gc.max_parallel = config_.max_parallel;
  gateway_ = std::make_shared<Gateway>(std::move(backend), gc, std::make_shared<AuditLog>(root.audit_log()));
  runs_ = std::make_shared<RunStore>(root);
  flags_ = std::make_shared<FlagQueue>(root, clock_);
  forms_ = std::make_unique<FormStore>(root, persona_ids(roster_), clock_);

  SessionManager::Deps deps{root, gateway_, runs_, flags_, roster_, templates_};
  deps.lexicons = lexicons_;
  deps.patient = CompletionParams{config_.model_id, 0.7, 512, std::nullopt};
  deps.clock = clock_;
  sessions_ = std::make_unique<SessionManager>(std::move(deps));
}

SynthesisConfig App::synthesis_config(int max_attempts) const {
  SynthesisConfig sc;
  sc.max_attempts = max_attempts;
  sc.seed = config_.seed;
  sc.therapist.model_id = config_.model_id;
  sc.patient.model_id = config_.model_id;
  sc.assessor.model_id = config_.model_id;
  return sc;
}

SynthesisRun App::synthesize(const std::string& persona_id, int max_attempts) {
  const auto* profile = find_persona(roster_, persona_id);
  if (!profile) throw Error(ErrorCode::not_found, "unknown persona '" + persona_id + "'");
  SynthesisOptions opts;
  opts.store = runs_.get();
  opts.clock = clock_;
  return run_synthesis(*profile, *gateway_, templates_, synthesis_config(max_attempts), opts);
}

std::map<std::string, DialogueTranscript> App::eval_transcripts(const std::filesystem::path& dir, EvalSource source,
                                                                int interview_turns) {
  std::map<std::string, DialogueTranscript> out;
  const CompletionParams therapist{config_.model_id, 0.7, 256, config_.seed};
  const CompletionParams patient{config_.model_id, 0.7, 512, config_.seed};
  for (const auto& p : roster_) {
    const std::optional<PatientContext> ctx = runs_->accepted_context(p.persona_id);
    if (!ctx) continue;
    DialogueTranscript t;
    if (source == EvalSource::interview) {
      t = simulate_interview(*ctx, *gateway_, templates_, interview_turns, therapist, patient, "eval");
    } else {
      const auto it = std::find_if(ctx->exemplar_dialogues.begin(), ctx->exemplar_dialogues.end(),
                                   [](const DialogueTranscript& d) { return d.purpose.kind == PurposeKind::overall; });
      if (it == ctx->exemplar_dialogues.end()) continue;
      t = *it;
    }
    write_file_atomic(dir / (p.persona_id + ".jsonl"), transcript_to_jsonl(t));
    out.emplace(p.persona_id, std::move(t));
  }
  return out;
}

App::BenchOutcome App::bench(const std::string& judge_model,
                             const std::map<std::string, DialogueTranscript>& transcripts, std::int64_t seed,
                             bool both_orders) {
  // Only personas with a transcript take part.
  std::vector<PersonaProfile> roster;
  for (const auto& p : roster_) {
    if (transcripts.count(p.persona_id)) roster.push_back(p);
  }
  for (const auto& [id, t] : transcripts) {
    if (!find_persona(roster_, id)) throw Error(ErrorCode::not_found, "transcript for unknown persona '" + id + "'");
  }
  BenchConfig bc;
  bc.judge.model_id = judge_model;
  bc.seed = seed;
  bc.both_orders = both_orders;
  const std::string run_id = bench_run_id(bc, transcripts);
  BenchReport report = run_bench(roster, transcripts, *gateway_, templates_.judge, bc, run_id);

  Json personas = Json::array();
  for (const auto& p : roster) personas.push_back(p.persona_id);
  const Json config{{"judge", bc.judge.to_json()},
                    {"seed", seed},
                    {"both_orders", both_orders},
                    {"templates", {{templates_.judge.template_id, templates_.judge.version}}},
                    {"band_table", BandTable::default_table().to_json()},
                    {"personas", personas}};
  const Json outcome{{"total_pairs", report.total_pairs},
                     {"accuracy_pct", report.accuracy_pct},
                     {"neither_count", report.neither_count},
                     {"protocol_error_count", report.protocol_error_count}};
  runs_->save_report(run_id, run_manifest(run_id, "bench", config, clock_(), outcome, {"manifest.json", "report.json"}),
                     to_json(report));
  return {run_id, std::move(report)};
}

std::pair<std::string, Json> App::forms_report() {
  const auto forms = forms_->forms();
  if (forms.empty()) throw Error(ErrorCode::precondition, "no rating forms recorded");
  const auto cells = cells_by_persona(forms);
  const AggregateStats stats = aggregate_means(cells, roster_);
  Json means = Json::object();
  for (const auto& [id, m] : cells) {
    Json row = Json::object();
    for (const auto& [a, v] : m) row[std::string(to_string(a))] = v;
    means[id] = row;
  }
  const Json report{{"forms_count", forms.size()}, {"persona_means", means}, {"aggregates", to_json(stats)}};
  const std::string run_id = "forms-" + sha256_hex(forms_to_jsonl(forms)).substr(0, 12);
  const Json config{{"forms_count", forms.size()}, {"band_table", BandTable::default_table().to_json()}};
  const Json outcome{{"overall_mean", stats.overall_mean}, {"persona_count", stats.persona_count}};
  runs_->save_report(run_id,
                     run_manifest(run_id, "forms-report", config, clock_(), outcome, {"manifest.json", "report.json"}),
                     report);
  return {run_id, report};
}

Json run_manifest(const std::string& run_id, std::string_view kind, const Json& config, const std::string& created_at,
                  const Json& outcome, const Json& artifacts) {
  return Json{{"run_id", run_id},
              {"kind", kind},
              {"created_at", created_at},
              {"config", config},
              {"outcome", outcome},
              {"artifacts", artifacts}};
}

std::map<std::string, DialogueTranscript> load_transcript_dir(const std::filesystem::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::not_found, "no transcript directory " + dir.string());
  std::map<std::string, DialogueTranscript> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    auto ts = transcripts_from_jsonl(read_file(entry.path()));
    if (ts.size() != 1) {
      throw Error(ErrorCode::parse_error, entry.path().string() + ": expected exactly one transcript");
    }
    DialogueTranscript t = std::move(ts.front());
    t.persona_id = entry.path().stem().string();
    t.purpose = Purpose::eval();
    out.emplace(t.persona_id, std::move(t));
  }
  return out;
}

std::string report_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace talkdep
