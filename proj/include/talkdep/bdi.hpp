#pragma once

#include "talkdep/common.hpp"

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

namespace talkdep {

enum class Band { minimal, mild, moderate, severe };

std::string_view to_string(Band band);
Band band_from_string(std::string_view name);

inline constexpr int kBdiMin = 0;
inline constexpr int kBdiMax = 63;
inline constexpr int kBdiItemCount = 21;

// One of the 21 BDI-II items, identified by its 1-based index.
struct BdiItemId {
  int index = 0;

  std::string_view label() const;
  bool valid() const { return index >= 1 && index <= kBdiItemCount; }
  auto operator<=>(const BdiItemId&) const = default;
};

const std::array<BdiItemId, kBdiItemCount>& all_bdi_items();
std::optional<BdiItemId> find_bdi_item(std::string_view label);
// Throws Error(parse_error) for an unknown label.
BdiItemId bdi_item(std::string_view label);

struct BandRange {
  Band band;
  int lo;  // inclusive
  int hi;  // inclusive

  bool operator==(const BandRange&) const = default;
};

// Ordered partition of [0,63] into severity bands.
class BandTable {
 public:
  // Throws Error(validation_error) unless the ranges partition [0,63] in
  // severity order without gaps or overlaps.
  explicit BandTable(std::vector<BandRange> ranges);

  // minimal [0,11], mild [12,19], moderate [20,28], severe [29,63]
  static const BandTable& default_table();

  Band band_of(int score) const;
  const std::vector<BandRange>& ranges() const { return ranges_; }

  Json to_json() const;
  static BandTable from_json(const Json& j);

  bool operator==(const BandTable&) const = default;

 private:
  std::vector<BandRange> ranges_;
};

// Throws Error(out_of_range) for scores outside [0,63].
Band band_of(int score, const BandTable& bands);

// Sum of the 21 item scores. Throws Error(validation_error) when an item is
// missing, unknown, or scored outside [0,3].
int bdi_total_from_items(const std::map<BdiItemId, int>& item_scores);

}  // namespace talkdep
