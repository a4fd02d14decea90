#include "talkdep/bdi.hpp"

#include <string>

namespace talkdep {

namespace {

constexpr std::array<std::string_view, kBdiItemCount> kItemLabels = {
    "sadness",
    "pessimism",
    "past failure",
    "loss of pleasure",
    "guilty feelings",
    "punishment feelings",
    "self-dislike",
    "self-criticalness",
    "suicidal thoughts or wishes",
    "crying",
    "agitation",
    "loss of interest",
    "indecisiveness",
    "worthlessness",
    "loss of energy",
    "changes in sleeping pattern",
    "irritability",
    "changes in appetite",
    "concentration difficulty",
    "tiredness or fatigue",
    "loss of interest in sex",
};

}  // namespace

std::string_view to_string(Band band) {
  switch (band) {
    case Band::minimal: return "minimal";
    case Band::mild: return "mild";
    case Band::moderate: return "moderate";
    case Band::severe: return "severe";
  }
  return "minimal";
}

Band band_from_string(std::string_view name) {
  if (name == "minimal") return Band::minimal;
  if (name == "mild") return Band::mild;
  if (name == "moderate") return Band::moderate;
  if (name == "severe") return Band::severe;
  throw Error(ErrorCode::parse_error, "unknown severity band '" + std::string(name) + "'");
}

std::string_view BdiItemId::label() const {
  if (!valid()) return "";
  return kItemLabels[static_cast<std::size_t>(index - 1)];
}

const std::array<BdiItemId, kBdiItemCount>& all_bdi_items() {
  static const auto items = [] {
    std::array<BdiItemId, kBdiItemCount> a{};
    for (int i = 0; i < kBdiItemCount; ++i) a[static_cast<std::size_t>(i)] = BdiItemId{i + 1};
    return a;
  }();
  return items;
}

std::optional<BdiItemId> find_bdi_item(std::string_view label) {
  const std::string wanted = to_lower(trim(label));
  for (int i = 0; i < kBdiItemCount; ++i) {
    if (kItemLabels[static_cast<std::size_t>(i)] == wanted) return BdiItemId{i + 1};
  }
  return std::nullopt;
}

BdiItemId bdi_item(std::string_view label) {
  if (auto id = find_bdi_item(label)) return *id;
  throw Error(ErrorCode::parse_error, "unknown BDI-II item '" + std::string(label) + "'");
}

BandTable::BandTable(std::vector<BandRange> ranges) : ranges_(std::move(ranges)) {
  if (ranges_.empty()) throw Error(ErrorCode::validation_error, "band table is empty");
  int expected_lo = kBdiMin;
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    const auto& r = ranges_[i];
    if (r.lo != expected_lo) {
      throw Error(ErrorCode::validation_error,
                  "band table has a gap or overlap at score " + std::to_string(expected_lo));
    }
    if (r.hi < r.lo) throw Error(ErrorCode::validation_error, "band range with hi < lo");
    if (i > 0 && static_cast<int>(r.band) <= static_cast<int>(ranges_[i - 1].band)) {
      throw Error(ErrorCode::validation_error, "bands must appear in severity order");
    }
    expected_lo = r.hi + 1;
  }
  if (expected_lo != kBdiMax + 1) {
    throw Error(ErrorCode::validation_error, "band table must end at 63");
  }
}

const BandTable& BandTable::default_table() {
  static const BandTable table({{Band::minimal, 0, 11},
                                {Band::mild, 12, 19},
                                {Band::moderate, 20, 28},
                                {Band::severe, 29, 63}});
  return table;
}

Band BandTable::band_of(int score) const {
  if (score < kBdiMin || score > kBdiMax) {
    throw Error(ErrorCode::out_of_range, "BDI-II score " + std::to_string(score) + " outside [0,63]");
  }
  for (const auto& r : ranges_) {
    if (score >= r.lo && score <= r.hi) return r.band;
  }
  throw Error(ErrorCode::out_of_range, "no band for score " + std::to_string(score));
}

Json BandTable::to_json() const {
  Json arr = Json::array();
  for (const auto& r : ranges_) {
    arr.push_back({{"band", to_string(r.band)}, {"lo", r.lo}, {"hi", r.hi}});
  }
  return arr;
}

BandTable BandTable::from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::parse_error, "band table must be an array");
  std::vector<BandRange> ranges;
  for (const auto& e : j) {
    ranges.push_back({band_from_string(e.at("band").get<std::string>()), e.at("lo").get<int>(),
                      e.at("hi").get<int>()});
  }
  return BandTable(std::move(ranges));
}

Band band_of(int score, const BandTable& bands) { return bands.band_of(score); }

int bdi_total_from_items(const std::map<BdiItemId, int>& item_scores) {
  int total = 0;
  for (const auto& item : all_bdi_items()) {
    auto it = item_scores.find(item);
    if (it == item_scores.end()) {
      throw Error(ErrorCode::validation_error,
                  "missing score for BDI-II item " + std::to_string(item.index));
    }
    if (it->second < 0 || it->second > 3) {
      throw Error(ErrorCode::validation_error, "item " + std::to_string(item.index) +
                                                   " scored " + std::to_string(it->second) +
                                                   ", expected 0..3");
    }
    total += it->second;
  }
  if (item_scores.size() != all_bdi_items().size()) {
    throw Error(ErrorCode::validation_error, "unknown BDI-II item in score map");
  }
  return total;
}

}  // namespace talkdep
