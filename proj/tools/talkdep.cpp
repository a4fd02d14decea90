#include "talkdep/app.hpp"
#include "talkdep/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

using namespace talkdep;

namespace {

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int print_validation(const std::vector<PersonaProfile>& roster) {
  int errors = 0;
  for (const auto& p : roster) {
    const auto report = validate_profile(p);
    if (report.empty()) {
      std::cout << p.persona_id << ": ok\n";
      continue;
    }
    for (const auto& v : report.violations) {
      const bool err = v.severity == ViolationSeverity::error;
      errors += err;
      std::cout << p.persona_id << ": " << (err ? "error " : "warning ") << v.code << ": " << v.message << '\n';
    }
  }
  return errors ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"talkdep: depression patient persona engine"};
  cli.require_subcommand(1);
  std::string data_root;
  cli.add_option("--data-root", data_root, "Data root (overrides TALKDEP_DATA_ROOT)");

  auto* persona = cli.add_subcommand("persona", "Inspect the persona roster");
  persona->require_subcommand(1);
  std::string roster_file;
  auto* validate = persona->add_subcommand("validate", "Validate a roster file");
  validate->add_option("--roster", roster_file, "Roster JSON (shipped roster when omitted)");
  auto* plist = persona->add_subcommand("list", "List personas");
  bool plist_json = false;
  plist->add_flag("--json", plist_json, "Print JSON");

  auto* synth = cli.add_subcommand("synth", "Run the synthesis loop");
  std::string synth_persona;
  bool synth_all = false;
  int max_attempts = 3;
  auto* synth_persona_opt = synth->add_option("--persona", synth_persona, "Persona id");
  auto* synth_all_opt = synth->add_flag("--all", synth_all, "Every persona in the roster");
  synth_persona_opt->excludes(synth_all_opt);
  synth->add_option("--max-attempts", max_attempts, "Attempt budget per persona")->check(CLI::PositiveNumber);

  auto* evalc = cli.add_subcommand("eval-transcripts", "Write one eval transcript per accepted persona");
  std::string eval_out;
  int eval_turns = 20;
  bool eval_interview = false;
  evalc->add_option("--out", eval_out, "Output directory")->required();
  evalc->add_flag("--interview", eval_interview, "Simulate an interview instead of using the accepted overall dialogue");
  evalc->add_option("--turns", eval_turns, "Turns per simulated interview")->check(CLI::PositiveNumber);

  auto* bench = cli.add_subcommand("bench", "Pairwise judge benchmark");
  std::string judge, transcripts_dir, bench_out;
  std::int64_t bench_seed = 0;
  bool both_orders = false;
  bench->add_option("--judge", judge, "Judge model id")->required();
  bench->add_option("--transcripts", transcripts_dir, "Directory of <persona_id>.jsonl eval transcripts")->required();
  bench->add_option("--seed", bench_seed, "Presentation-order seed")->required();
  bench->add_option("--out", bench_out, "Report JSON path")->required();
  bench->add_flag("--both-orders", both_orders, "Judge each pair in both orders");

  auto* serve = cli.add_subcommand("serve", "Run the HTTP service");
  int port = -1;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "Port (overrides TALKDEP_PORT)");
  serve->add_option("--host", host, "Bind address");

  auto* forms = cli.add_subcommand("forms", "Clinician rating forms");
  forms->require_subcommand(1);
  auto* fexport = forms->add_subcommand("export", "Print current forms as JSONL");
  std::string forms_out;
  fexport->add_option("--out", forms_out, "Write to a file instead of stdout");
  auto* freport = forms->add_subcommand("report", "Per-persona means and aggregates");
  bool freport_json = false;
  freport->add_flag("--json", freport_json, "Print JSON");

  auto* flags = cli.add_subcommand("flags", "Safety flag queue");
  flags->require_subcommand(1);
  auto* flist = flags->add_subcommand("list", "List flags");
  bool unresolved_only = false;
  flist->add_flag("--unresolved", unresolved_only, "Only unresolved flags");
  auto* fresolve = flags->add_subcommand("resolve", "Resolve a flag");
  std::string flag_id;
  Resolution resolution;
  fresolve->add_option("flag_id", flag_id, "Flag id")->required();
  fresolve->add_option("--reviewer", resolution.reviewer, "Reviewer")->required();
  fresolve->add_option("--decision", resolution.decision, "Decision")->required();
  fresolve->add_option("--note", resolution.note, "Note");

  CLI11_PARSE(cli, argc, argv);

  try {
    AppConfig config = AppConfig::from_env();
    if (!data_root.empty()) config.data_root = data_root;

    if (validate->parsed()) {
      // Parse errors surface as exceptions; profile problems are listed.
      std::vector<PersonaProfile> roster;
      if (roster_file.empty()) {
        roster = default_roster();
      } else {
        const Json doc = Json::parse(read_file(roster_file));
        for (const auto& j : doc) roster.push_back(profile_from_json(j));
      }
      return print_validation(roster);
    }

    App app(config);

    if (plist->parsed()) {
      if (plist_json) {
        std::cout << dump_roster(app.roster());
        return 0;
      }
      for (const auto& p : app.roster()) {
        const auto accepted = app.runs().accepted_run(p.persona_id);
        std::cout << p.persona_id << '\t' << p.name << '\t' << p.bdi_total << '\t' << to_string(p.severity_band)
                  << '\t' << (accepted ? *accepted : "-") << '\n';
      }
      return 0;
    }

    if (synth->parsed()) {
      if (!synth_all && synth_persona.empty()) throw CLI::RequiredError("--persona or --all");
      std::vector<std::string> ids;
      if (synth_all) {
        for (const auto& p : app.roster()) ids.push_back(p.persona_id);
      } else {
        ids.push_back(synth_persona);
      }
      int failures = 0;
      for (const auto& id : ids) {
        const SynthesisRun run = app.synthesize(id, max_attempts);
        const auto& last = run.attempts.back();
        std::cout << id << '\t' << run.run_id << '\t' << to_string(run.status) << "\tattempts=" << run.attempts.size();
        if (last.assessment) {
          std::cout << "\tpredicted=" << last.assessment->predicted_bdi << "\ttrue=" << run.profile.bdi_total;
        }
        std::cout << '\n';
        failures += run.status != RunStatus::accepted;
      }
      return failures ? 1 : 0;
    }

    if (evalc->parsed()) {
      const auto ts = app.eval_transcripts(
          eval_out, eval_interview ? App::EvalSource::interview : App::EvalSource::accepted_overall, eval_turns);
      std::cout << "wrote " << ts.size() << " transcripts to " << eval_out << '\n';
      return ts.empty() ? 1 : 0;
    }

    if (bench->parsed()) {
      const auto outcome = app.bench(judge, load_transcript_dir(transcripts_dir), bench_seed, both_orders);
      Json report = to_json(outcome.report);
      report["run_id"] = outcome.run_id;
      write_file_atomic(bench_out, report_json(report));
      std::cout << "run " << outcome.run_id << '\n' << render_bench_table({outcome.report});
      return 0;
    }

    if (serve->parsed()) {
      Service service(app);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int p = port >= 0 ? port : config.port;
      std::cerr << "talkdep serving on " << host << ':' << p << '\n';
      service.listen(host, p);
      g_service = nullptr;
      return 0;
    }

    if (fexport->parsed()) {
      const std::string text = forms_to_jsonl(app.forms().forms());
      if (forms_out.empty()) {
        std::cout << text;
      } else {
        write_file_atomic(forms_out, text);
      }
      return 0;
    }

    if (freport->parsed()) {
      auto [run_id, report] = app.forms_report();
      if (freport_json) {
        report["run_id"] = run_id;
        std::cout << report_json(report);
        return 0;
      }
      const auto all = app.forms().forms();
      std::cout << "run " << run_id << "\n\n"
                << render_persona_table(cells_by_persona(all), app.roster()) << '\n'
                << render_aggregates(aggregate_report(all, app.roster()));
      return 0;
    }

    if (flist->parsed()) {
      for (const auto& f : app.flags().list(unresolved_only)) std::cout << to_json(f).dump() << '\n';
      return 0;
    }

    if (fresolve->parsed()) {
      std::cout << to_json(app.flags().resolve(flag_id, resolution)).dump() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
