#include "support.hpp"

#include "talkdep/bdi.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace talkdep;

namespace {

std::map<BdiItemId, int> uniform_items(int score) {
  std::map<BdiItemId, int> m;
  for (auto item : all_bdi_items()) m[item] = score;
  return m;
}

// Independent restatement of the default cutoffs.
Band expected_band(int s) {
  if (s <= 11) return Band::minimal;
  if (s <= 19) return Band::mild;
  if (s <= 28) return Band::moderate;
  return Band::severe;
}

}  // namespace

TEST_CASE("band_of examples") {
  const auto& t = BandTable::default_table();
  CHECK(band_of(40, t) == Band::severe);
  CHECK(band_of(0, t) == Band::minimal);
  CHECK(band_of(12, t) == Band::mild);
  CHECK(band_of(13, t) == Band::mild);
  CHECK(band_of(63, t) == Band::severe);
}

TEST_CASE("band_of rejects out-of-range scores") {
  const auto& t = BandTable::default_table();
  for (int s : {-1, 64, 1000}) {
    try {
      band_of(s, t);
      FAIL("expected out_of_range for " << s);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::out_of_range);
    }
  }
}

TEST_CASE("band_of is total and matches exactly one range") {
  const auto& t = BandTable::default_table();
  for (int s = kBdiMin; s <= kBdiMax; ++s) {
    int matches = 0;
    for (const auto& r : t.ranges()) matches += (s >= r.lo && s <= r.hi);
    CHECK(matches == 1);
    CHECK(t.band_of(s) == expected_band(s));
    CHECK(t.band_of(s) == t.band_of(s));
  }
}

TEST_CASE("default table matches the published roster grouping") {
  for (const auto& [id, row] : testing::published_scores()) {
    CAPTURE(id);
    CHECK(to_string(band_of(row.first, BandTable::default_table())) == row.second);
  }
}

TEST_CASE("band table must partition [0,63] in severity order") {
  auto expect_invalid = [](std::vector<BandRange> ranges) {
    try {
      BandTable t(std::move(ranges));
      FAIL("table accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::validation_error);
    }
  };
  expect_invalid({});
  expect_invalid({{Band::minimal, 0, 11}, {Band::mild, 13, 19}, {Band::moderate, 20, 28}, {Band::severe, 29, 63}});
  expect_invalid({{Band::minimal, 0, 12}, {Band::mild, 12, 19}, {Band::moderate, 20, 28}, {Band::severe, 29, 63}});
  expect_invalid({{Band::minimal, 0, 11}, {Band::mild, 12, 19}, {Band::moderate, 20, 28}, {Band::severe, 29, 62}});
  expect_invalid({{Band::mild, 0, 11}, {Band::minimal, 12, 19}, {Band::moderate, 20, 28}, {Band::severe, 29, 63}});
  expect_invalid({{Band::minimal, 1, 11}, {Band::mild, 12, 19}, {Band::moderate, 20, 28}, {Band::severe, 29, 63}});

  // Canonical cutoffs form a valid alternative table.
  BandTable canonical({{Band::minimal, 0, 13}, {Band::mild, 14, 19}, {Band::moderate, 20, 28}, {Band::severe, 29, 63}});
  CHECK(canonical.band_of(12) == Band::minimal);
  CHECK(BandTable::from_json(canonical.to_json()) == canonical);
  CHECK(BandTable::from_json(BandTable::default_table().to_json()) == BandTable::default_table());
}

TEST_CASE("21 canonical items with unique indices and labels") {
  const auto& items = all_bdi_items();
  REQUIRE(items.size() == 21);
  std::set<int> idx;
  std::set<std::string> labels;
  for (auto item : items) {
    CHECK(item.valid());
    idx.insert(item.index);
    labels.insert(std::string(item.label()));
    CHECK(bdi_item(item.label()) == item);
  }
  CHECK(idx.size() == 21);
  CHECK(labels.size() == 21);
  CHECK(*idx.begin() == 1);
  CHECK(*idx.rbegin() == 21);
  CHECK(bdi_item("sadness").index == 1);
  CHECK(bdi_item("loss of energy").label() == "loss of energy");
  CHECK_FALSE(find_bdi_item("happiness").has_value());
  CHECK_THROWS_AS(bdi_item("happiness"), Error);
}

TEST_CASE("bdi_total_from_items examples") {
  CHECK(bdi_total_from_items(uniform_items(0)) == 0);
  CHECK(bdi_total_from_items(uniform_items(3)) == 63);
  auto m = uniform_items(0);
  int set = 0;
  for (auto& [item, v] : m) {
    if (set++ < 10) v = 2;
  }
  CHECK(bdi_total_from_items(m) == 20);
}

TEST_CASE("bdi_total_from_items validation") {
  auto expect_validation = [](const std::map<BdiItemId, int>& m) {
    try {
      bdi_total_from_items(m);
      FAIL("accepted invalid items");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::validation_error);
    }
  };
  auto missing = uniform_items(1);
  missing.erase(missing.begin());
  expect_validation(missing);
  auto high = uniform_items(1);
  high.begin()->second = 4;
  expect_validation(high);
  auto low = uniform_items(1);
  low.rbegin()->second = -1;
  expect_validation(low);
  auto unknown = uniform_items(1);
  unknown[BdiItemId{22}] = 1;
  expect_validation(unknown);
}

TEST_CASE("bdi_total_from_items is monotone and matches a direct sum") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> score(0, 3), pick(0, 20);
  for (int trial = 0; trial < 500; ++trial) {
    auto m = uniform_items(0);
    int direct = 0;
    for (auto& [item, v] : m) {
      v = score(rng);
      direct += v;
    }
    const int total = bdi_total_from_items(m);
    CHECK(total == direct);
    CHECK(total >= 0);
    CHECK(total <= 63);
    auto it = std::next(m.begin(), pick(rng));
    if (it->second < 3) {
      ++it->second;
      CHECK(bdi_total_from_items(m) == total + 1);
    }
  }
}
