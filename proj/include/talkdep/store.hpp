#pragma once

#include "talkdep/common.hpp"

#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace talkdep {

namespace fs = std::filesystem;

// Write-then-rename so readers never observe a partial file.
void write_file_atomic(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

// Append one line to a JSONL log and flush before returning.
void append_line(const fs::path& path, std::string_view line);
std::vector<std::string> read_lines(const fs::path& path);

// Source of timestamps written into artifacts. A fixed clock makes re-runs
// byte-identical.
using Clock = std::function<std::string()>;
Clock system_clock();
Clock fixed_clock(std::string timestamp);
// SOURCE_DATE_EPOCH when set, otherwise the system clock.
Clock clock_from_env();
std::string iso8601_utc(std::int64_t epoch_seconds);

// Layout of the single data root.
class DataRoot {
 public:
  explicit DataRoot(fs::path root);

  const fs::path& path() const { return root_; }
  fs::path runs() const { return root_ / "runs"; }
  fs::path run(std::string_view run_id) const { return runs() / std::string(run_id); }
  fs::path sessions() const { return root_ / "sessions"; }
  fs::path forms() const { return root_ / "forms"; }
  fs::path flags() const { return root_ / "flags"; }
  fs::path audit_log() const { return root_ / "audit.jsonl"; }
  fs::path accepted_index() const { return root_ / "accepted.json"; }

 private:
  fs::path root_;
};

}  // namespace talkdep
