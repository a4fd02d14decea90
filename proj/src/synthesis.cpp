#include "talkdep/synthesis.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace talkdep {

namespace {

std::string transcript_id_for(const PersonaProfile& p, int attempt, const Purpose& purpose) {
  std::string id = p.persona_id + "-a" + std::to_string(attempt) + "-";
  if (purpose.kind == PurposeKind::symptom && purpose.symptom) {
    id += "s" + std::to_string(purpose.symptom->index);
  } else {
    id += purpose.to_string();
  }
  return id;
}

std::string therapist_focus(const Purpose& purpose) {
  if (purpose.kind == PurposeKind::symptom && purpose.symptom) {
    return "gently explore how \"" + std::string(purpose.symptom->label()) +
           "\" shows up in the client's daily life.";
  }
  return "the client's overall mood and how they have been coping over the last two weeks.";
}

std::string patient_focus(const Purpose& purpose) {
  if (purpose.kind == PurposeKind::symptom && purpose.symptom) {
    return "the symptom \"" + std::string(purpose.symptom->label()) + "\"";
  }
  return "your overall mood and how heavy things have felt lately";
}

std::vector<ChatMessage> view_for(Speaker speaker, const std::string& system, const std::vector<Turn>& turns) {
  std::vector<ChatMessage> msgs{{ChatRole::system, system}};
  if (speaker == Speaker::therapist && turns.empty()) {
    msgs.push_back({ChatRole::user, "(The client has just sat down. Open the session.)"});
  }
  for (const auto& t : turns) {
    msgs.push_back({t.speaker == speaker ? ChatRole::assistant : ChatRole::user, t.text});
  }
  return msgs;
}

CompletionParams seeded(CompletionParams params, const SynthesisConfig& config, int attempt, int slot) {
  if (!params.seed) params.seed = config.seed + static_cast<std::int64_t>(attempt) * 1000 + slot;
  return params;
}

Json attempt_to_json(const AttemptRecord& a) {
  Json ts = Json::array();
  for (const auto& t : a.transcripts) ts.push_back(transcript_meta_to_json(t));
  return Json{{"attempt", a.attempt},
              {"generation_prompt", a.generation_prompt},
              {"transcripts", ts},
              {"decision", to_string(a.decision)},
              {"refinement_note", a.refinement_note},
              {"error", a.error}};
}

AttemptDecision decision_from_string(std::string_view s) {
  if (s == "accepted") return AttemptDecision::accepted;
  if (s == "rejected") return AttemptDecision::rejected;
  if (s == "failed") return AttemptDecision::failed;
  throw Error(ErrorCode::parse_error, "unknown attempt decision '" + std::string(s) + "'");
}

RunStatus status_from_string(std::string_view s) {
  if (s == "running") return RunStatus::running;
  if (s == "accepted") return RunStatus::accepted;
  if (s == "exhausted") return RunStatus::exhausted;
  if (s == "failed") return RunStatus::failed;
  throw Error(ErrorCode::parse_error, "unknown run status '" + std::string(s) + "'");
}

std::string next_prompt(const SynthesisRun& run, const PersonaProfile& profile, const TemplateSet& templates) {
  if (run.attempts.empty()) return initial_generation_prompt(profile, templates);
  const AttemptRecord& last = run.attempts.back();
  if (last.decision == AttemptDecision::rejected && last.assessment) {
    return refine_prompt(last.generation_prompt, *last.assessment, profile).prompt;
  }
  return last.generation_prompt;
}

}  // namespace

Json SynthesisConfig::to_json() const {
  return Json{{"max_attempts", max_attempts},
              {"dialogue_turns", dialogue_turns},
              {"therapist", therapist.to_json()},
              {"patient", patient.to_json()},
              {"assessor", assessor.to_json()},
              {"seed", seed},
              {"band_table", bands.to_json()}};
}

std::string_view to_string(AttemptDecision d) {
  switch (d) {
    case AttemptDecision::accepted: return "accepted";
    case AttemptDecision::rejected: return "rejected";
    case AttemptDecision::failed: return "failed";
  }
  return "failed";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::accepted: return "accepted";
    case RunStatus::exhausted: return "exhausted";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

std::string initial_generation_prompt(const PersonaProfile& profile, const TemplateSet& templates) {
  return render(templates.patient_generation, profile_bindings(profile));
}

std::vector<DialogueTranscript> generate_dialogues(const PersonaProfile& profile, Gateway& gateway,
                                                   const TemplateSet& templates, int attempt,
                                                   const std::string& generation_prompt,
                                                   const SynthesisConfig& config, std::string_view run_id) {
  if (validate_profile(profile, config.bands).has_errors()) {
    throw Error(ErrorCode::precondition, "profile " + profile.persona_id + " is not valid");
  }
  if (config.dialogue_turns < 2) throw Error(ErrorCode::invalid_argument, "dialogue_turns must be >= 2");

  std::vector<Purpose> purposes{Purpose::overall()};
  for (const auto& s : profile.key_symptoms) purposes.push_back(Purpose::for_symptom(s));

  std::vector<DialogueTranscript> out;
  int slot = 0;
  for (const auto& purpose : purposes) {
    DialogueTranscript t;
    t.transcript_id = transcript_id_for(profile, attempt, purpose);
    t.persona_id = profile.persona_id;
    t.purpose = purpose;
    t.created_by = config.patient.model_id;
    t.attempt = attempt;

    const std::string therapist_system = render(templates.therapist, {{"focus", therapist_focus(purpose)}});
    const std::string patient_system = generation_prompt + "\nSession focus: " + patient_focus(purpose) + "\n";
    const auto therapist_params = seeded(config.therapist, config, attempt, slot);
    const auto patient_params = seeded(config.patient, config, attempt, slot);

    for (int i = 0; i < config.dialogue_turns; ++i) {
      const Speaker speaker = i % 2 == 0 ? Speaker::therapist : Speaker::patient;
      const auto& system = speaker == Speaker::therapist ? therapist_system : patient_system;
      const auto& params = speaker == Speaker::therapist ? therapist_params : patient_params;
      ChatMessage reply = gateway.complete(view_for(speaker, system, t.turns), params, run_id);
      t.turns.push_back({speaker, trim(reply.content)});
      if (t.turns.back().text.empty()) {
        throw Error(ErrorCode::malformed_payload, "blank " + std::string(to_string(speaker)) + " turn");
      }
    }
    if (auto issues = transcript_issues(t, &profile); !issues.empty()) {
      throw Error(ErrorCode::validation_error, t.transcript_id + ": " + issues.front());
    }
    out.push_back(std::move(t));
    ++slot;
  }
  return out;
}

SeverityAssessment assess(const std::vector<DialogueTranscript>& transcripts, Gateway& gateway,
                          const TemplateSet& templates, const SynthesisConfig& config, std::string_view run_id) {
  if (transcripts.empty()) throw Error(ErrorCode::precondition, "nothing to assess");
  const auto& first = transcripts.front();
  std::ostringstream sessions;
  for (std::size_t i = 0; i < transcripts.size(); ++i) {
    const auto& t = transcripts[i];
    if (t.persona_id != first.persona_id || t.attempt != first.attempt) {
      throw Error(ErrorCode::precondition, "assess expects transcripts from one persona and attempt");
    }
    if (i) sessions << '\n';
    sessions << "Recorded session " << (i + 1) << ":\n" << format_transcript(t);
  }
  const std::string prompt =
      render(templates.assessor, {{"sessions", sessions.str()}, {"symptom_lines", assessor_symptom_lines()}});
  const ChatMessage reply = gateway.complete({{ChatRole::user, prompt}}, config.assessor, run_id);
  return parse_assessment_reply(reply.content, config.assessor.model_id, config.bands);
}

bool accept(int predicted_bdi, int true_bdi) { return std::abs(predicted_bdi - true_bdi) < kAcceptanceMargin; }

bool accept(const SeverityAssessment& assessment, const PersonaProfile& profile) {
  return accept(assessment.predicted_bdi, profile.bdi_total);
}

Refinement refine_prompt(const std::string& previous_prompt, const SeverityAssessment& assessment,
                         const PersonaProfile& profile) {
  if (accept(assessment, profile)) {
    throw Error(ErrorCode::precondition, "refine_prompt called for an accepted assessment");
  }
  const int diff = assessment.predicted_bdi - profile.bdi_total;
  const int gap = std::abs(diff);
  std::string note = diff < 0 ? "intensify severity; assessor underestimated by " + std::to_string(gap)
                              : "soften severity; assessor overestimated by " + std::to_string(gap);

  std::vector<std::string> missed;
  for (const auto& s : profile.key_symptoms) {
    auto it = assessment.symptom_presence.find(s);
    if (it == assessment.symptom_presence.end() || !it->second) missed.emplace_back(s.label());
  }
  std::string missed_list;
  for (std::size_t i = 0; i < missed.size(); ++i) missed_list += (i ? ", " : "") + missed[i];
  if (!missed.empty()) note += "; missed symptoms: " + missed_list;

  std::ostringstream directive;
  directive << "\nRevision note: the previous sessions were rated at BDI-II " << assessment.predicted_bdi
            << " against a target of " << profile.bdi_total << ". ";
  if (diff < 0) {
    directive << "Let the depression come through more strongly (underestimated by " << gap << " points).";
  } else {
    directive << "Tone the depression down (overestimated by " << gap << " points).";
  }
  if (!missed.empty()) directive << " Make these symptoms recognisable: " << missed_list << '.';
  directive << '\n';
  return {previous_prompt + directive.str(), note};
}

std::string synthesis_run_id(const PersonaProfile& profile, const TemplateSet& templates,
                             const SynthesisConfig& config) {
  Json key{{"profile", to_json(profile)}, {"config", config.to_json()}, {"templates", Json::object()}};
  for (const PromptTemplate* t : {&templates.patient_generation, &templates.patient_simulator,
                                  &templates.therapist, &templates.assessor, &templates.judge}) {
    key["templates"][t->template_id] = sha256_hex(dump_template_file(*t));
  }
  return "synth-" + profile.persona_id + "-" + sha256_hex(key.dump()).substr(0, 12);
}

SynthesisRun run_synthesis(const PersonaProfile& profile, Gateway& gateway, const TemplateSet& templates,
                           const SynthesisConfig& config, const SynthesisOptions& options) {
  if (validate_profile(profile, config.bands).has_errors()) {
    throw Error(ErrorCode::precondition, "profile " + profile.persona_id + " is not valid");
  }
  if (config.max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");

  SynthesisConfig effective = config;
  std::string run_id = synthesis_run_id(profile, templates, effective);
  if (options.manual_assessor) run_id += "-manual";

  SynthesisRun run;
  if (options.store) {
    if (auto existing = options.store->load_synthesis(run_id)) {
      if (existing->status != RunStatus::running && existing->status != RunStatus::failed) return *existing;
      run = std::move(*existing);
      // A failed attempt left by a crash or backend outage is retried.
      if (!run.attempts.empty() && run.attempts.back().transcripts.empty()) run.attempts.pop_back();
      run.status = RunStatus::running;
      run.error.clear();
    }
  }
  if (run.run_id.empty()) {
    run.run_id = run_id;
    run.persona_id = profile.persona_id;
    run.profile = profile;
    run.config = effective.to_json();
    run.config["assessor_mode"] = options.manual_assessor ? "manual" : "llm";
    run.template_versions = templates.versions();
    run.created_at = options.clock ? options.clock() : std::string();
  }
  auto persist = [&] {
    if (options.store) options.store->save_synthesis(run);
  };

  for (int attempt = static_cast<int>(run.attempts.size()) + 1; attempt <= config.max_attempts; ++attempt) {
    AttemptRecord record;
    record.attempt = attempt;
    record.generation_prompt = next_prompt(run, profile, templates);

    try {
      record.transcripts =
          generate_dialogues(profile, gateway, templates, attempt, record.generation_prompt, config, run.run_id);
    } catch (const Error& e) {
      record.decision = AttemptDecision::failed;
      record.error = e.what();
      run.attempts.push_back(std::move(record));
      run.status = RunStatus::failed;
      run.error = e.what();
      persist();
      throw;
    }

    try {
      SeverityAssessment a = options.manual_assessor ? options.manual_assessor(record.transcripts)
                                                     : assess(record.transcripts, gateway, templates, config, run.run_id);
      a.predicted_band = config.bands.band_of(a.predicted_bdi);
      record.assessment = std::move(a);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::protocol_error && e.code() != ErrorCode::parse_error) {
        record.decision = AttemptDecision::failed;
        record.error = e.what();
        record.transcripts.clear();
        run.attempts.push_back(std::move(record));
        run.status = RunStatus::failed;
        run.error = e.what();
        persist();
        throw;
      }
      // Non-compliant assessor output consumes the attempt.
      record.decision = AttemptDecision::failed;
      record.error = e.what();
      run.attempts.push_back(std::move(record));
      persist();
      continue;
    }

    if (accept(*record.assessment, profile)) {
      record.decision = AttemptDecision::accepted;
      run.final_context = build_patient_context(profile, record.transcripts, templates.patient_simulator);
      run.attempts.push_back(std::move(record));
      run.status = RunStatus::accepted;
      persist();
      if (options.store) options.store->mark_accepted(profile.persona_id, run.run_id);
      return run;
    }
    record.decision = AttemptDecision::rejected;
    record.refinement_note = refine_prompt(record.generation_prompt, *record.assessment, profile).note;
    run.attempts.push_back(std::move(record));
    persist();
  }
  run.status = RunStatus::exhausted;
  persist();
  return run;
}

Json to_json(const SynthesisRun& run) {
  Json attempts = Json::array();
  for (const auto& a : run.attempts) attempts.push_back(attempt_to_json(a));
  Json ctx = nullptr;
  if (run.final_context) {
    Json ids = Json::array();
    for (const auto& t : run.final_context->exemplar_dialogues) ids.push_back(t.transcript_id);
    ctx = Json{{"exemplar_ids", ids}, {"rendered_system_prompt", run.final_context->rendered_system_prompt}};
  }
  Json outcome{{"status", to_string(run.status)}, {"attempts", run.attempts.size()}, {"true_bdi", run.profile.bdi_total}};
  if (!run.attempts.empty() && run.attempts.back().assessment) {
    outcome["predicted_bdi"] = run.attempts.back().assessment->predicted_bdi;
  }
  return Json{{"run_id", run.run_id},
              {"kind", "synthesis"},
              {"persona_id", run.persona_id},
              {"status", to_string(run.status)},
              {"created_at", run.created_at},
              {"config", run.config},
              {"templates", run.template_versions},
              {"profile", to_json(run.profile)},
              {"attempts", attempts},
              {"final_context", ctx},
              {"error", run.error},
              {"outcome", outcome},
              {"artifacts", Json::array({"manifest.json", "transcripts.jsonl", "assessments.json"})}};
}

void RunStore::save_synthesis(const SynthesisRun& run) {
  const fs::path dir = root_.run(run.run_id);
  fs::create_directories(dir);
  std::string turns;
  Json assessments = Json::array();
  for (const auto& a : run.attempts) {
    turns += transcripts_to_jsonl(a.transcripts);
    if (a.assessment) assessments.push_back({{"attempt", a.attempt}, {"assessment", to_json(*a.assessment)}});
  }
  write_file_atomic(dir / "transcripts.jsonl", turns);
  write_file_atomic(dir / "assessments.json", assessments.dump(2) + "\n");
  write_file_atomic(dir / "manifest.json", to_json(run).dump(2) + "\n");
}

std::optional<SynthesisRun> RunStore::load_synthesis(std::string_view run_id) const {
  const fs::path dir = root_.run(run_id);
  if (!fs::exists(dir / "manifest.json")) return std::nullopt;
  try {
    const Json m = Json::parse(read_file(dir / "manifest.json"));
    if (m.at("kind") != "synthesis") return std::nullopt;
    SynthesisRun run;
    run.run_id = m.at("run_id").get<std::string>();
    run.persona_id = m.at("persona_id").get<std::string>();
    run.status = status_from_string(m.at("status").get<std::string>());
    run.created_at = m.at("created_at").get<std::string>();
    run.config = m.at("config");
    run.template_versions = m.at("templates");
    run.profile = profile_from_json(m.at("profile"));
    run.error = m.value("error", std::string());
    const BandTable bands = BandTable::from_json(run.config.at("band_table"));

    std::map<std::string, DialogueTranscript> turns_by_id;
    for (auto& t : transcripts_from_jsonl(read_file(dir / "transcripts.jsonl"))) {
      turns_by_id.emplace(t.transcript_id, std::move(t));
    }
    std::map<int, SeverityAssessment> assessments;
    for (const auto& e : Json::parse(read_file(dir / "assessments.json"))) {
      assessments.emplace(e.at("attempt").get<int>(), assessment_from_json(e.at("assessment"), bands));
    }
    for (const auto& aj : m.at("attempts")) {
      AttemptRecord a;
      a.attempt = aj.at("attempt").get<int>();
      a.generation_prompt = aj.at("generation_prompt").get<std::string>();
      a.decision = decision_from_string(aj.at("decision").get<std::string>());
      a.refinement_note = aj.at("refinement_note").get<std::string>();
      a.error = aj.at("error").get<std::string>();
      for (const auto& tj : aj.at("transcripts")) {
        DialogueTranscript t = transcript_meta_from_json(tj);
        auto it = turns_by_id.find(t.transcript_id);
        if (it == turns_by_id.end()) {
          throw Error(ErrorCode::parse_error, "turns missing for transcript " + t.transcript_id);
        }
        t.turns = it->second.turns;
        a.transcripts.push_back(std::move(t));
      }
      if (auto it = assessments.find(a.attempt); it != assessments.end()) a.assessment = it->second;
      run.attempts.push_back(std::move(a));
    }
    if (!m.at("final_context").is_null() && !run.attempts.empty()) {
      const auto& cj = m.at("final_context");
      PatientContext ctx;
      ctx.profile = run.profile;
      ctx.rendered_system_prompt = cj.at("rendered_system_prompt").get<std::string>();
      const auto& last = run.attempts.back().transcripts;
      for (const auto& id : cj.at("exemplar_ids")) {
        auto it = std::find_if(last.begin(), last.end(),
                               [&](const DialogueTranscript& t) { return t.transcript_id == id.get<std::string>(); });
        if (it == last.end()) throw Error(ErrorCode::parse_error, "exemplar " + id.get<std::string>() + " missing");
        ctx.exemplar_dialogues.push_back(*it);
      }
      run.final_context = std::move(ctx);
    }
    return run;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, "corrupt run " + std::string(run_id) + ": " + e.what());
  }
}

void RunStore::mark_accepted(const std::string& persona_id, const std::string& run_id) {
  std::lock_guard lock(index_mutex_);
  Json index = Json::object();
  if (fs::exists(root_.accepted_index())) index = Json::parse(read_file(root_.accepted_index()));
  index[persona_id] = run_id;
  write_file_atomic(root_.accepted_index(), index.dump(2) + "\n");
}

std::optional<std::string> RunStore::accepted_run(const std::string& persona_id) const {
  std::lock_guard lock(index_mutex_);
  if (!fs::exists(root_.accepted_index())) return std::nullopt;
  const Json index = Json::parse(read_file(root_.accepted_index()));
  if (!index.contains(persona_id)) return std::nullopt;
  return index.at(persona_id).get<std::string>();
}

std::optional<PatientContext> RunStore::accepted_context(const std::string& persona_id) const {
  const auto run_id = accepted_run(persona_id);
  if (!run_id) return std::nullopt;
  auto run = load_synthesis(*run_id);
  if (!run || run->status != RunStatus::accepted) return std::nullopt;
  return run->final_context;
}

void RunStore::save_report(const std::string& run_id, const Json& manifest, const Json& report) {
  const fs::path dir = root_.run(run_id);
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::optional<Json> RunStore::load_report(std::string_view run_id) const {
  const fs::path path = root_.run(run_id) / "report.json";
  if (!fs::exists(path)) return std::nullopt;
  return Json::parse(read_file(path));
}

std::vector<std::string> RunStore::list_runs() const {
  std::vector<std::string> ids;
  if (!fs::exists(root_.runs())) return ids;
  for (const auto& entry : fs::directory_iterator(root_.runs())) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace talkdep
