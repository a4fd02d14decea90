#include "support.hpp"

#include "talkdep/persona.hpp"

#include <doctest.h>

#include <fstream>

using namespace talkdep;
using testing::TempDir;

namespace {

PersonaProfile maria() { return testing::persona("maria"); }

template <typename Fn>
ErrorCode error_code_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::io_error;
}

}  // namespace

TEST_CASE("shipped Maria is valid") {
  const auto p = maria();
  CHECK(p.bdi_total == 40);
  CHECK(p.severity_band == Band::severe);
  CHECK(p.key_symptoms.size() == 4);
  CHECK(validate_profile(p).empty());
}

TEST_CASE("validate_profile reports each violated invariant") {
  auto p = maria();
  p.bdi_total = 64;
  CHECK(validate_profile(p).has("bdi_out_of_range"));

  p = maria();
  p.key_symptoms.push_back(bdi_item("crying"));
  REQUIRE(p.key_symptoms.size() == 5);
  CHECK(validate_profile(p).has("too_many_symptoms"));

  p = maria();
  p.key_symptoms.clear();
  CHECK(validate_profile(p).has("no_symptoms"));

  p = maria();
  p.key_symptoms.push_back(p.key_symptoms.front());
  CHECK(validate_profile(p).has("duplicate_symptom"));

  p = maria();
  p.key_symptoms[0] = BdiItemId{0};
  CHECK(validate_profile(p).has("invalid_symptom"));

  p = maria();
  p.persona_id.clear();
  p.name.clear();
  const auto r = validate_profile(p);
  CHECK(r.has("empty_persona_id"));
  CHECK(r.has("empty_name"));
  CHECK(r.violations.size() == 2);
}

TEST_CASE("band mismatch is a warning unless overridden") {
  auto p = maria();
  p.severity_band = Band::mild;
  auto r = validate_profile(p);
  REQUIRE(r.has("band_mismatch"));
  CHECK_FALSE(r.has_errors());
  p.band_override = true;
  CHECK(validate_profile(p).empty());
}

TEST_CASE("shipped roster: 12 profiles, 3 per band, published scores") {
  const auto& roster = default_roster();
  REQUIRE(roster.size() == 12);
  std::map<Band, int> per_band;
  for (const auto& p : roster) {
    ++per_band[p.severity_band];
    CHECK(validate_profile(p).empty());
    const auto& row = testing::published_scores().at(p.persona_id);
    CHECK(p.bdi_total == row.first);
    CHECK(to_string(p.severity_band) == row.second);
  }
  for (auto b : {Band::minimal, Band::mild, Band::moderate, Band::severe}) CHECK(per_band[b] == 3);
}

TEST_CASE("load_roster errors") {
  TempDir dir;
  const auto empty = dir / "empty.json";
  std::ofstream(empty).close();
  CHECK(error_code_of([&] { load_roster(empty); }) == ErrorCode::parse_error);

  auto roster = default_roster();
  roster.push_back(roster.front());
  const auto dup = dir / "dup.json";
  write_file_atomic(dup, dump_roster(roster));
  CHECK(error_code_of([&] { load_roster(dup); }) == ErrorCode::duplicate_id);

  roster = default_roster();
  roster[0].bdi_total = 70;
  const auto bad = dir / "bad.json";
  write_file_atomic(bad, dump_roster(roster));
  CHECK(error_code_of([&] { load_roster(bad); }) == ErrorCode::validation_error);

  CHECK(error_code_of([&] { load_roster(dir / "missing.json"); }) == ErrorCode::io_error);
  CHECK(error_code_of([&] { parse_roster("{}"); }) == ErrorCode::parse_error);
}

TEST_CASE("unknown keys are rejected outside extra_attributes") {
  Json j = to_json(maria());
  j["favourite_colour"] = "blue";
  CHECK_THROWS_AS(profile_from_json(j), Error);
  Json k = to_json(maria());
  k["extra_attributes"]["favourite_colour"] = "blue";
  CHECK(profile_from_json(k).extra_attributes.at("favourite_colour") == "blue");
}

TEST_CASE("valid profiles round-trip bit-identically") {
  TempDir dir;
  const auto path = dir / "roster.json";
  save_roster(path, default_roster());
  const auto text = read_file(path);
  const auto loaded = load_roster(path);
  CHECK(loaded == default_roster());
  CHECK(dump_roster(loaded) == text);
  for (const auto& p : default_roster()) CHECK(profile_from_json(to_json(p)) == p);
}

TEST_CASE("find_persona") {
  CHECK(find_persona(default_roster(), "laura")->bdi_total == 23);
  CHECK(find_persona(default_roster(), "nobody") == nullptr);
}
