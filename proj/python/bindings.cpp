#include "talkdep/app.hpp"
#include "talkdep/oracle.hpp"

#include <pybind11/pybind11.h>

namespace py = pybind11;
using namespace talkdep;

namespace {

std::vector<PersonaProfile> roster_or_default(const std::string& roster_json) {
  return roster_json.empty() ? default_roster() : parse_roster(roster_json);
}

AppConfig app_config(const std::string& data_root, std::int64_t seed) {
  AppConfig c;
  c.data_root = data_root;
  c.seed = seed;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "TalkDep engine bindings. Structured values cross as JSON strings.";

  py::register_exception<Error>(m, "TalkDepError", PyExc_RuntimeError);

  m.def("default_roster", [] { return dump_roster(default_roster()); });

  m.def("validate_roster", [](const std::string& text) {
    Json out = Json::array();
    for (const auto& p : parse_roster(text)) out.push_back(p.persona_id);
    return out.dump();
  });

  m.def("band_of", [](int score) { return std::string(to_string(BandTable::default_table().band_of(score))); });

  m.def("accept", [](int predicted, int truth) { return accept(predicted, truth); }, py::arg("predicted"),
        py::arg("truth"));

  m.def(
      "synthesize",
      [](const std::string& data_root, const std::string& persona_id, int max_attempts, std::int64_t seed) {
        py::gil_scoped_release release;
        App app(app_config(data_root, seed));
        return to_json(app.synthesize(persona_id, max_attempts)).dump();
      },
      py::arg("data_root"), py::arg("persona_id"), py::arg("max_attempts") = 3, py::arg("seed") = 0);

  m.def(
      "oracle_bench",
      [](const std::string& data_root, std::int64_t seed, bool both_orders) {
        py::gil_scoped_release release;
        App app(app_config(data_root, seed));
        for (const auto& p : app.roster()) app.synthesize(p.persona_id);
        const auto transcripts = app.eval_transcripts(std::filesystem::path(data_root) / "eval");
        const auto outcome = app.bench("oracle", transcripts, seed, both_orders);
        Json j = to_json(outcome.report);
        j["run_id"] = outcome.run_id;
        return j.dump();
      },
      py::arg("data_root"), py::arg("seed") = 0, py::arg("both_orders") = false);

  m.def(
      "score_verdicts",
      [](const std::string& verdicts_json, const std::string& roster_json) {
        std::vector<PairwiseVerdict> vs;
        for (const auto& v : Json::parse(verdicts_json)) vs.push_back(pairwise_verdict_from_json(v));
        return to_json(score_run(vs, roster_or_default(roster_json))).dump();
      },
      py::arg("verdicts_json"), py::arg("roster_json") = "");

  m.def(
      "aggregate_forms",
      [](const std::string& forms_jsonl, const std::string& roster_json) {
        return to_json(aggregate_report(forms_from_jsonl(forms_jsonl), roster_or_default(roster_json))).dump();
      },
      py::arg("forms_jsonl"), py::arg("roster_json") = "");

  m.def(
      "screen_text",
      [](const std::string& text) {
        Json out = Json::array();
        for (const auto& f : screen_text(text, LexiconSet::shipped())) out.push_back(to_json(f));
        return out.dump();
      },
      py::arg("text"));
}
