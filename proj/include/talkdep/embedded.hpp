#pragma once

#include <optional>
#include <string_view>

namespace talkdep::embedded {

// Shipped data files (roster, templates, lexicons) compiled into the binary.
// Paths are relative to the repository's data/ directory.
std::optional<std::string_view> find(std::string_view path);

}  // namespace talkdep::embedded
