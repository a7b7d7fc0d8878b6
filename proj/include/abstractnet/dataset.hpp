#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "abstractnet/approximator.hpp"

namespace abstractnet {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kManifestName = "prompt.jsonl";
inline constexpr const char* kSourceDir = "source";
inline constexpr const char* kTargetDir = "target";

/// One training triple. Paths are relative to the dataset root.
struct DatasetEntry {
  std::string source;
  std::string target;
  std::string prompt;

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct DiscoveredInput {
  std::filesystem::path image;
  std::optional<std::filesystem::path> caption;
};

enum class CaptionMode { kSidecar, kStub };

struct BuildConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;
  int resize = 512;  // 0 keeps the original size
  ApproxConfig approx;
  CaptionMode caption_mode = CaptionMode::kSidecar;
  int parallelism = 1;
  std::uint64_t seed = 0;
  bool emit_traces = false;

  void validate() const;
};

struct SkippedInput {
  std::string file;
  std::string reason;
};

struct BuildReport {
  std::size_t discovered = 0;
  std::size_t processed = 0;
  std::vector<SkippedInput> skipped;
  double total_runtime_s = 0.0;
  std::vector<std::pair<std::string, double>> per_image_scores;
};

/// Supported images (.png, .jpg, .jpeg, .ppm; case-insensitive) in bytewise
/// lexicographic order of file name, each paired with `<stem>.txt` if present.
std::vector<DiscoveredInput> discover_inputs(const std::filesystem::path& input_dir);

/// Manifest line without the trailing newline:
/// {"source": "...", "target": "...", "prompt": "..."}
std::string manifest_line(const DatasetEntry& entry);

/// Parses one manifest line. Throws DatasetError on malformed input.
DatasetEntry parse_manifest_line(const std::string& line);

/// Leading/trailing ASCII whitespace removed.
std::string trim(std::string_view text);

/// Processes every discovered input independently; per-file failures land in
/// `BuildReport::skipped`. Writes `<output>/prompt.jsonl` in discovery order.
BuildReport build(const BuildConfig& config);

struct EntryCheck {
  std::size_t line = 0;  // 1-based line in the manifest
  std::string source;
  std::string target;
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

struct ValidationReport {
  std::vector<EntryCheck> entries;
  // PNGs under source/ or target/ that no entry references.
  std::vector<std::string> orphans;

  std::size_t failed() const;
  bool ok() const { return failed() == 0 && orphans.empty(); }
};

/// Throws DatasetError if the manifest itself is missing or unreadable.
ValidationReport validate_manifest(const std::filesystem::path& root);

struct DatasetStats {
  std::size_t count = 0;
  std::map<std::pair<int, int>, std::size_t> dimensions;  // (width, height) of targets
  double mean_prompt_length = 0.0;
  std::size_t min_prompt_length = 0;
  std::size_t max_prompt_length = 0;
};

/// Prompt lengths count Unicode code points. Throws DatasetError on an invalid
/// manifest.
DatasetStats dataset_stats(const std::filesystem::path& root);

}  // namespace abstractnet
