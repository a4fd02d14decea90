// One PASS/FAIL line per primary acceptance criterion.
#include "support.hpp"

#include "talkdep/app.hpp"
#include "talkdep/bench.hpp"
#include "talkdep/forms.hpp"
#include "talkdep/guardrails.hpp"
#include "talkdep/oracle.hpp"
#include "talkdep/synthesis.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace talkdep;
using testing::TempDir;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

using Clk = std::chrono::steady_clock;

double seconds_since(Clk::time_point t0) {
  return std::chrono::duration<double>(Clk::now() - t0).count();
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// ---- Benchmark arithmetic ------------------------------------------------

Verdict flip(Verdict v) { return v == Verdict::A ? Verdict::B : Verdict::A; }

std::vector<PairwiseVerdict> verdict_set(int err_same, int err_diff, int neither) {
  const auto& roster = default_roster();
  std::vector<PairwiseVerdict> out;
  for (const auto& pair : enumerate_pairs(roster)) {
    const auto* pa = find_persona(roster, pair.persona_a);
    const auto* pb = find_persona(roster, pair.persona_b);
    const bool same = pa->severity_band == pb->severity_band;
    PairwiseVerdict v;
    v.pair_id = pair.pair_id();
    v.persona_a = pair.persona_a;
    v.persona_b = pair.persona_b;
    v.level_relation = same ? LevelRelation::same : LevelRelation::different;
    const Verdict truth = pa->bdi_total > pb->bdi_total ? Verdict::A : Verdict::B;
    if (same && err_same-- > 0) {
      v.verdict = flip(truth);
    } else if (!same && err_diff-- > 0) {
      v.verdict = flip(truth);
    } else if (!same && neither-- > 0) {
      v.verdict = Verdict::Neither;
    } else {
      v.verdict = truth;
    }
    out.push_back(v);
  }
  return out;
}

Outcome benchmark_arithmetic() {
  struct Row {
    const char* model;
    int correct, err_same, err_diff, neither;
    double acc, same, diff;
  };
  // Printed rows; the 8B different-level cell is checked at its computed value.
  const Row rows[] = {
      {"Deepseek-r1:14B", 57, 4, 5, 0, 86.36, 6.06, 7.58},
      {"Llama3.1:8B", 47, 7, 8, 4, 75.81, 11.29, 12.90},
      {"Llama3.3:70B", 49, 5, 6, 6, 81.67, 8.33, 10.00},
      {"Qwen2.5:32B", 51, 8, 7, 0, 77.27, 12.12, 10.61},
  };
  Outcome o;
  std::string detail;
  for (const auto& row : rows) {
    const auto r = score_run(verdict_set(row.err_same, row.err_diff, row.neither), default_roster());
    const std::string tag = row.model;
    o.expect(r.total_pairs == 66, tag + ": total pairs");
    o.expect(r.correct == row.correct && r.err_same == row.err_same && r.err_diff == row.err_diff &&
                 r.neither_count == row.neither,
             tag + ": tallies");
    o.expect(std::abs(r.accuracy_pct - row.acc) <= 0.01, tag + ": accuracy " + fixed2(r.accuracy_pct));
    o.expect(std::abs(r.err_same_pct - row.same) <= 0.01, tag + ": same-level " + fixed2(r.err_same_pct));
    o.expect(std::abs(r.err_diff_pct - row.diff) <= 0.01, tag + ": different-level " + fixed2(r.err_diff_pct));
    detail += (detail.empty() ? "" : "; ") + fixed2(r.accuracy_pct) + "/" + fixed2(r.err_same_pct) + "/" +
              fixed2(r.err_diff_pct);
  }
  o.detail = detail;
  return o;
}

// ---- Rating aggregates ---------------------------------------------------

Outcome rating_aggregates() {
  Outcome o;
  std::vector<RatingForm> forms;
  for (const auto& [id, cells] : testing::published_ratings()) {
    RatingForm lo, hi;
    lo.persona_id = hi.persona_id = id;
    lo.rater_id = "r1";
    hi.rater_id = "r2";
    for (std::size_t i = 0; i < 7; ++i) {
      lo.scores[kAttributes[i]] = static_cast<int>(std::floor(cells[i]));
      hi.scores[kAttributes[i]] = static_cast<int>(std::ceil(cells[i]));
    }
    forms.push_back(lo);
    forms.push_back(hi);
  }
  const auto s = aggregate_report(forms, default_roster());
  const std::pair<const char*, std::pair<double, double>> checks[] = {
      {"overall", {s.overall_mean, 3.92}},
      {"general", {s.general_mean, 4.01}},
      {"depression", {s.depression_mean, 3.84}},
      {"general/minimal", {s.general_by_band.at(Band::minimal), 3.83}},
      {"general/severe", {s.general_by_band.at(Band::severe), 4.28}},
      {"depression/minimal", {s.depression_by_band.at(Band::minimal), 3.96}},
      {"depression/moderate", {s.depression_by_band.at(Band::moderate), 3.83}},
      {"depression/severe", {s.depression_by_band.at(Band::severe), 3.71}},
  };
  for (const auto& [name, vals] : checks) {
    o.expect(std::abs(vals.first - vals.second) <= 0.005, std::string(name) + " " + std::to_string(vals.first));
  }
  o.expect(s.persona_count == 12, "persona count");
  o.detail = "overall " + fixed2(s.overall_mean) + ", general " + fixed2(s.general_mean) + ", depression " +
             fixed2(s.depression_mean);
  return o;
}

// ---- Pipeline convergence --------------------------------------------------

Outcome pipeline() {
  Outcome o;
  const auto t0 = Clk::now();
  auto run_all = [&](const fs::path& root) {
    RunStore store{DataRoot(root)};
    auto gateway = std::make_shared<Gateway>(std::make_shared<ScriptedOracle>(OracleConfig{}));
    SynthesisOptions opts;
    opts.store = &store;
    opts.clock = fixed_clock("2024-01-01T00:00:00Z");
    SynthesisConfig cfg;
    cfg.seed = 1234;
    for (const auto& p : default_roster()) {
      const auto run = run_synthesis(p, *gateway, TemplateSet::defaults(), cfg, opts);
      const bool first = run.status == RunStatus::accepted && run.attempts.size() == 1;
      o.expect(first, p.persona_id + ": not accepted on attempt 1");
      if (first) {
        const int delta = run.attempts[0].assessment->predicted_bdi - p.bdi_total;
        o.expect(std::abs(delta) <= 5, p.persona_id + ": |delta| " + std::to_string(delta));
      }
    }
  };
  TempDir a, b;
  run_all(a.path());
  run_all(b.path());
  const auto ta = testing::snapshot_tree(a.path());
  const auto tb = testing::snapshot_tree(b.path());
  o.expect(ta == tb, "run directories differ");
  o.expect(ta.size() >= 12 * 3, "too few artifacts");
  const double secs = seconds_since(t0);
  o.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  o.detail = "12/12 accepted on attempt 1, " + std::to_string(ta.size()) + " files identical, " +
             fixed2(secs) + " s";
  return o;
}

// ---- Oracle benchmark ------------------------------------------------------

Outcome oracle_bench() {
  Outcome o;
  TempDir dir;
  AppConfig cfg;
  cfg.data_root = dir.path();
  App app(cfg, nullptr, fixed_clock("2024-01-01T00:00:00Z"));
  for (const auto& p : app.roster()) app.synthesize(p.persona_id);
  const auto transcripts = app.eval_transcripts(dir.path() / "eval");
  const auto t0 = Clk::now();
  const auto outcome = app.bench("oracle", transcripts, 42);
  const double secs = seconds_since(t0);
  const auto& r = outcome.report;
  o.expect(r.verdicts.size() == 66, "verdicts " + std::to_string(r.verdicts.size()));
  o.expect(r.accuracy_pct == 100.0, "accuracy " + fixed2(r.accuracy_pct));
  o.expect(r.neither_count == 0, "neither " + std::to_string(r.neither_count));
  o.expect(r.same_level_pairs == 12, "same-level pairs " + std::to_string(r.same_level_pairs));
  int same = 0;
  for (const auto& v : r.verdicts) same += v.level_relation == LevelRelation::same;
  o.expect(same == 12, "same-level verdicts " + std::to_string(same));
  o.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  o.detail = std::to_string(r.verdicts.size()) + " verdicts, " + fixed2(r.accuracy_pct) + "% accuracy, " +
             std::to_string(r.neither_count) + " Neither, " + std::to_string(same) + " same-level, " + fixed2(secs) +
             " s";
  return o;
}

// ---- Acceptance rule -------------------------------------------------------

Outcome acceptance_rule() {
  Outcome o;
  int cases = 0, accepted = 0;
  for (int truth = 0; truth <= 63; ++truth) {
    for (int pred = 0; pred <= 63; ++pred) {
      const int d = truth > pred ? truth - pred : pred - truth;
      const bool brute = d <= 4;
      o.expect(accept(pred, truth) == brute, std::to_string(truth) + "/" + std::to_string(pred));
      ++cases;
      accepted += brute;
    }
  }
  o.detail = std::to_string(cases) + " cases, " + std::to_string(accepted) + " accepted";
  return o;
}

// ---- BDI properties --------------------------------------------------------

Outcome bdi_properties() {
  Outcome o;
  const auto& table = BandTable::default_table();
  const std::pair<Band, std::pair<int, int>> bounds[] = {
      {Band::minimal, {0, 11}}, {Band::mild, {12, 19}}, {Band::moderate, {20, 28}}, {Band::severe, {29, 63}}};
  for (int s = 0; s <= 63; ++s) {
    int hits = 0;
    Band want = Band::minimal;
    for (const auto& [band, lh] : bounds) {
      if (s >= lh.first && s <= lh.second) {
        ++hits;
        want = band;
      }
    }
    o.expect(hits == 1 && table.band_of(s) == want, "band of " + std::to_string(s));
  }
  for (int s : {-1, 64}) {
    bool threw = false;
    try {
      table.band_of(s);
    } catch (const Error& e) {
      threw = e.code() == ErrorCode::out_of_range;
    }
    o.expect(threw, "score " + std::to_string(s) + " accepted");
  }

  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> item_score(0, 3), which(0, 20);
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<BdiItemId, int> items;
    int sum = 0;
    for (const auto& id : all_bdi_items()) sum += items[id] = item_score(rng);
    const int base = bdi_total_from_items(items);
    o.expect(base == sum, "sum");
    const auto id = all_bdi_items()[static_cast<std::size_t>(which(rng))];
    auto up = items;
    const int room = 3 - up[id];
    const int bump = room == 0 ? 0 : std::uniform_int_distribution<int>(1, room)(rng);
    up[id] += bump;
    const int raised = bdi_total_from_items(up);
    o.expect(raised == base + bump && raised >= base, "monotonicity");
    o.expect(table.band_of(raised) >= table.band_of(base), "band monotonicity");
  }

  int matched = 0;
  for (const auto& [id, sb] : testing::published_scores()) {
    const auto& p = testing::persona(id);
    const bool ok = p.bdi_total == sb.first && to_string(table.band_of(sb.first)) == sb.second &&
                    p.severity_band == band_from_string(sb.second);
    o.expect(ok, id);
    matched += ok;
  }
  o.detail = "64 scores banded, 1000 perturbations, " + std::to_string(matched) + "/12 published roster pairs";
  return o;
}

// ---- Persistence -----------------------------------------------------------

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{
      "a", "b", "z", " ", "  ", "\"", "\\", "\n", "\t", "/", "{", "}", ",", ":", "caf\xC3\xA9",
      "\xE2\x80\x99", "\xF0\x9F\x99\x82", "\xE4\xBD\xA0\xE5\xA5\xBD", "0", "9", "null", "[[CUE]]"};
  std::string s;
  const int n = 1 + static_cast<int>(rng() % 24);
  for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
  return s;
}

std::string random_word(std::mt19937_64& rng) {
  std::string s;
  const int n = 1 + static_cast<int>(rng() % 10);
  for (int i = 0; i < n; ++i) s += static_cast<char>('a' + rng() % 26);
  return s;
}

PersonaProfile random_profile(std::mt19937_64& rng, const std::string& id) {
  PersonaProfile p;
  p.persona_id = id;
  p.name = random_word(rng) + " " + random_text(rng);
  p.age = static_cast<int>(rng() % 121);
  p.gender = random_word(rng);
  p.bdi_total = static_cast<int>(rng() % 64);
  p.severity_band = BandTable::default_table().band_of(p.bdi_total);
  std::set<int> picked;
  const std::size_t k = 1 + rng() % 4;
  while (picked.size() < k) picked.insert(1 + static_cast<int>(rng() % 21));
  for (int i : picked) p.key_symptoms.push_back(BdiItemId{i});
  std::shuffle(p.key_symptoms.begin(), p.key_symptoms.end(), rng);
  p.memory = random_text(rng);
  p.communication_style.vocabulary_notes = random_text(rng);
  p.communication_style.sentence_style = random_text(rng);
  p.communication_style.past_over_future = rng() & 1;
  p.communication_style.absolutist_bias = rng() & 1;
  for (std::size_t i = 0, n = rng() % 4; i < n; ++i) p.example_expressions.push_back(random_text(rng));
  for (std::size_t i = 0, n = rng() % 4; i < n; ++i) p.extra_attributes[random_word(rng)] = random_text(rng);
  return p;
}

DialogueTranscript random_transcript(std::mt19937_64& rng, const std::string& id) {
  DialogueTranscript t;
  t.transcript_id = id;
  const std::size_t n = rng() % 12;
  for (std::size_t i = 0; i < n; ++i) {
    t.turns.push_back({i % 2 == 0 ? Speaker::therapist : Speaker::patient, random_text(rng)});
  }
  return t;
}

RatingForm random_form(std::mt19937_64& rng, const std::string& persona) {
  RatingForm f;
  f.persona_id = persona;
  f.rater_id = random_word(rng);
  for (auto a : kAttributes) f.scores[a] = 1 + static_cast<int>(rng() % 5);
  if (rng() & 1) f.session_ref = "sess-" + random_word(rng);
  f.submitted_at = "2024-01-0" + std::to_string(1 + rng() % 9) + "T00:00:00Z";
  return f;
}

BenchReport random_report(std::mt19937_64& rng, const std::vector<PersonaProfile>& roster) {
  std::vector<PairwiseVerdict> vs;
  for (const auto& pair : enumerate_pairs(roster)) {
    PairwiseVerdict v;
    v.pair_id = pair.pair_id();
    v.persona_a = pair.persona_a;
    v.persona_b = pair.persona_b;
    v.presentation_order = (rng() & 1) ? PresentationOrder::ba : PresentationOrder::ab;
    const auto* pa = find_persona(roster, pair.persona_a);
    const auto* pb = find_persona(roster, pair.persona_b);
    v.level_relation = level_relation(*pa, *pb);
    switch (rng() % 4) {
      case 0: v.verdict = Verdict::A; break;
      case 1: v.verdict = Verdict::B; break;
      case 2: v.verdict = Verdict::Neither; break;
      default: break;
    }
    if (v.verdict && *v.verdict != Verdict::Neither) v.correct = *v.verdict == ground_truth(*pa, *pb);
    v.judge_model = random_word(rng);
    v.raw_reply = random_text(rng);
    vs.push_back(v);
  }
  BenchReport r = score_run(vs, roster);
  r.seed = static_cast<std::int64_t>(rng() % 1000000);
  if (rng() & 1) r.position_consistency_pct = static_cast<double>(rng() % 10001) / 100.0;
  return r;
}

Outcome persistence() {
  Outcome o;
  std::mt19937_64 rng(2024);
  TempDir dir;
  for (int inst = 0; inst < 100; ++inst) {
    const std::string tag = "#" + std::to_string(inst);
    std::vector<PersonaProfile> roster;
    const int n = 2 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) roster.push_back(random_profile(rng, "p" + std::to_string(i)));

    // roster
    const fs::path roster_file = dir.path() / "roster.json";
    save_roster(roster_file, roster);
    const auto roster_back = load_roster(roster_file);
    o.expect(roster_back == roster, tag + " roster value");
    o.expect(dump_roster(roster_back) == read_file(roster_file), tag + " roster bytes");

    // transcripts
    std::vector<DialogueTranscript> ts;
    for (int i = 0; i < n; ++i) {
      auto t = random_transcript(rng, "t" + std::to_string(i));
      if (!t.turns.empty()) ts.push_back(std::move(t));
    }
    const std::string tj = transcripts_to_jsonl(ts);
    write_file_atomic(dir.path() / "t.jsonl", tj);
    const auto ts_back = transcripts_from_jsonl(read_file(dir.path() / "t.jsonl"));
    bool same = ts_back.size() == ts.size();
    for (std::size_t i = 0; same && i < ts.size(); ++i) {
      same = ts_back[i].transcript_id == ts[i].transcript_id && ts_back[i].turns == ts[i].turns;
    }
    o.expect(same, tag + " transcripts value");
    o.expect(transcripts_to_jsonl(ts_back) == tj, tag + " transcripts bytes");

    // forms
    std::vector<RatingForm> forms;
    for (int i = 0, m = 1 + static_cast<int>(rng() % 6); i < m; ++i) {
      forms.push_back(random_form(rng, roster[rng() % roster.size()].persona_id));
    }
    const std::string fj = forms_to_jsonl(forms);
    write_file_atomic(dir.path() / "f.jsonl", fj);
    const auto forms_back = forms_from_jsonl(read_file(dir.path() / "f.jsonl"));
    o.expect(forms_back == forms, tag + " forms value");
    o.expect(forms_to_jsonl(forms_back) == fj, tag + " forms bytes");

    // bench report
    const auto report = random_report(rng, roster);
    const std::string rj = to_json(report).dump(2);
    write_file_atomic(dir.path() / "r.json", rj);
    const auto report_back = bench_report_from_json(Json::parse(read_file(dir.path() / "r.json")));
    o.expect(report_back.verdicts == report.verdicts, tag + " report verdicts");
    o.expect(to_json(report_back).dump(2) == rj, tag + " report bytes");
  }
  o.detail = "100 instances of roster, transcripts, forms, bench report";
  return o;
}

// ---- Guardrails determinism ------------------------------------------------

Outcome guardrails() {
  Outcome o;
  const auto& lex = LexiconSet::shipped();
  const auto& phrases = lex.self_harm.phrases;
  const std::vector<std::string> filler{"the", "morning", "was", "grey", "and", "we", "talked", "about", "work",
                                        "tea", "cold", "slowly", "window", "\xE2\x80\x94", "today", "Okay"};
  std::mt19937_64 rng(77);
  int planted_total = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> planted;
    std::string text;
    const int words = 10 + static_cast<int>(rng() % 40);
    for (int w = 0; w < words; ++w) {
      if (rng() % 7 == 0) {
        std::string p = phrases[rng() % phrases.size()];
        planted.push_back(p);
        if (rng() & 1) std::transform(p.begin(), p.end(), p.begin(), [](unsigned char c) { return std::toupper(c); });
        text += " " + p;
      } else {
        text += " " + filler[rng() % filler.size()];
      }
      if (rng() % 6 == 0) text += (rng() & 1) ? "." : ",";
    }
    if (planted.empty()) {
      planted.push_back(phrases[static_cast<std::size_t>(i) % phrases.size()]);
      text += " " + planted.back() + ".";
    }
    planted_total += static_cast<int>(planted.size());

    const FlagSource src{"text-" + std::to_string(i), i};
    const auto first = screen_text(text, lex, src);
    for (int run = 0; run < 2; ++run) o.expect(screen_text(text, lex, src) == first, "run differs on text " + std::to_string(i));
    std::set<std::string> flagged;
    for (const auto& f : first) flagged.insert(f.evidence);
    for (const auto& p : planted) o.expect(flagged.count(p) == 1, "missed '" + p + "' in text " + std::to_string(i));
  }
  o.detail = "200 texts, " + std::to_string(planted_total) + " planted phrases, 3 runs each";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"benchmark-arithmetic", benchmark_arithmetic},
      {"rating-aggregates", rating_aggregates},
      {"pipeline-convergence", pipeline},
      {"oracle-benchmark", oracle_bench},
      {"acceptance-rule", acceptance_rule},
      {"bdi-properties", bdi_properties},
      {"persistence-roundtrip", persistence},
      {"guardrails-determinism", guardrails},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name;
    if (!o.detail.empty()) std::cout << " - " << o.detail;
    std::cout << '\n';
    for (const auto& f : o.failures) std::cout << "    " << f << '\n';
    failed += !o.pass;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
