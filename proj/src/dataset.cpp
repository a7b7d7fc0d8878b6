#include "abstractnet/dataset.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_map>

#include "abstractnet/image_io.hpp"
#include "json.hpp"

namespace abstractnet {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

bool is_supported_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm";
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DatasetError("write failed: " + path.string());
}

std::size_t utf8_length(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

// Relative, normalized, and not escaping the root.
bool is_safe_relative(const std::string& p) {
  const fs::path path(p);
  if (p.empty() || path.is_absolute() || path.has_root_name()) return false;
  for (const auto& part : path) {
    if (part == "..") return false;
  }
  return true;
}

struct FileOutcome {
  std::optional<DatasetEntry> entry;
  std::string skip_reason;
  double score = 0.0;
};

FileOutcome process_one(const BuildConfig& config, const DiscoveredInput& input) {
  FileOutcome outcome;
  const std::string stem = input.image.stem().string();

  std::string prompt;
  if (config.caption_mode == CaptionMode::kStub) {
    prompt = "an image of " + stem;
  } else {
    if (!input.caption) {
      outcome.skip_reason = "missing caption";
      return outcome;
    }
    prompt = trim(read_text(*input.caption));
    if (prompt.empty()) {
      outcome.skip_reason = "empty caption";
      return outcome;
    }
  }

  DatasetEntry entry{std::string(kSourceDir) + "/" + stem + ".png",
                     std::string(kTargetDir) + "/" + stem + ".png", prompt};
  try {
    (void)manifest_line(entry);
  } catch (const json::exception&) {
    outcome.skip_reason = "caption is not valid UTF-8";
    return outcome;
  }

  Raster target;
  try {
    target = load_image(input.image);
  } catch (const std::exception& e) {
    outcome.skip_reason = std::string("unreadable image: ") + e.what();
    return outcome;
  }
  if (config.resize > 0) target = resize_and_center_crop(target, config.resize);

  ApproxConfig approx = config.approx;
  approx.seed = derive_seed(config.seed, std::string_view(stem));
  const ApproxState state = approximate(target, approx);

  save_png(target, config.output_dir / entry.target);
  save_png(state.canvas(), config.output_dir / entry.source);
  if (config.emit_traces) {
    write_text(config.output_dir / kSourceDir / (stem + ".csv"), trace_csv(state.trace()));
  }
  outcome.score = state.score();
  outcome.entry = std::move(entry);
  return outcome;
}

void remove_stale_pngs(const fs::path& dir, const std::set<std::string>& keep) {
  for (const auto& item : fs::directory_iterator(dir)) {
    if (!item.is_regular_file() || item.path().extension() != ".png") continue;
    if (!keep.contains(item.path().filename().string())) fs::remove(item.path());
  }
}

std::vector<std::pair<std::size_t, std::string>> read_manifest_lines(const fs::path& root) {
  const fs::path manifest = root / kManifestName;
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw DatasetError("cannot open manifest " + manifest.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    lines.emplace_back(number, line);
  }
  return lines;
}

}  // namespace

void BuildConfig::validate() const {
  if (resize != 0 && resize < 64) throw std::invalid_argument("resize must be 0 or at least 64");
  if (parallelism < 1) throw std::invalid_argument("parallelism must be at least 1");
  approx.validate();
}

std::string trim(std::string_view text) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

std::vector<DiscoveredInput> discover_inputs(const fs::path& input_dir) {
  std::error_code ec;
  fs::directory_iterator it(input_dir, ec);
  if (ec) throw DatasetError("cannot read input directory " + input_dir.string() + ": " + ec.message());

  std::vector<fs::path> images;
  for (const auto& item : it) {
    if (item.is_regular_file() && is_supported_extension(item.path())) images.push_back(item.path());
  }
  std::sort(images.begin(), images.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });

  std::vector<DiscoveredInput> out;
  out.reserve(images.size());
  for (auto& image : images) {
    fs::path caption = image;
    caption.replace_extension(".txt");
    DiscoveredInput input{image, std::nullopt};
    if (fs::is_regular_file(caption)) input.caption = caption;
    out.push_back(std::move(input));
  }
  return out;
}

std::string manifest_line(const DatasetEntry& entry) {
  return "{\"source\": " + json(entry.source).dump() + ", \"target\": " + json(entry.target).dump() +
         ", \"prompt\": " + json(entry.prompt).dump() + "}";
}

DatasetEntry parse_manifest_line(const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw DatasetError("manifest line is not a JSON object");
  DatasetEntry entry;
  for (const char* key : {"source", "target", "prompt"}) {
    if (!obj.contains(key) || !obj[key].is_string()) {
      throw DatasetError(std::string("missing string field \"") + key + "\"");
    }
  }
  if (obj.size() != 3) throw DatasetError("unexpected fields in manifest line");
  entry.source = obj["source"].get<std::string>();
  entry.target = obj["target"].get<std::string>();
  entry.prompt = obj["prompt"].get<std::string>();
  return entry;
}

BuildReport build(const BuildConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  auto inputs = discover_inputs(config.input_dir);
  if (inputs.empty()) throw DatasetError("no supported images in " + config.input_dir.string());

  std::error_code ec;
  fs::create_directories(config.output_dir / kSourceDir, ec);
  if (!ec) fs::create_directories(config.output_dir / kTargetDir, ec);
  if (ec) throw DatasetError("output directory not writable: " + config.output_dir.string());
  {
    const fs::path probe = config.output_dir / ".write_probe";
    std::ofstream out(probe);
    if (!out) throw DatasetError("output directory not writable: " + config.output_dir.string());
    out.close();
    fs::remove(probe, ec);
  }

  BuildReport report;
  report.discovered = inputs.size();

  std::vector<FileOutcome> outcomes(inputs.size());
  std::set<std::string> seen_stems;
  std::vector<char> runnable(inputs.size(), 1);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!seen_stems.insert(inputs[i].image.stem().string()).second) {
      outcomes[i].skip_reason = "duplicate stem";
      runnable[i] = 0;
    }
  }

  const auto n = static_cast<std::int64_t>(inputs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(config.parallelism)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (!runnable[idx]) continue;
    try {
      outcomes[idx] = process_one(config, inputs[idx]);
    } catch (const std::exception& e) {
      outcomes[idx] = FileOutcome{std::nullopt, std::string("processing failed: ") + e.what(), 0.0};
    }
  }

  std::string manifest;
  std::set<std::string> keep;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string file = inputs[i].image.filename().string();
    if (!outcomes[i].entry) {
      report.skipped.push_back({file, outcomes[i].skip_reason});
      continue;
    }
    const DatasetEntry& entry = *outcomes[i].entry;
    manifest += manifest_line(entry);
    manifest += '\n';
    keep.insert(fs::path(entry.source).filename().string());
    ++report.processed;
    report.per_image_scores.emplace_back(file, outcomes[i].score);
  }
  remove_stale_pngs(config.output_dir / kSourceDir, keep);
  remove_stale_pngs(config.output_dir / kTargetDir, keep);
  write_text(config.output_dir / kManifestName, manifest);

  report.total_runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::size_t ValidationReport::failed() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const EntryCheck& e) { return !e.ok(); }));
}

ValidationReport validate_manifest(const fs::path& root) {
  ValidationReport report;
  const auto lines = read_manifest_lines(root);

  std::vector<std::optional<DatasetEntry>> parsed;
  for (const auto& [number, line] : lines) {
    EntryCheck check;
    check.line = number;
    try {
      DatasetEntry entry = parse_manifest_line(line);
      check.source = entry.source;
      check.target = entry.target;
      parsed.emplace_back(std::move(entry));
    } catch (const DatasetError& e) {
      check.problems.push_back("unparseable manifest line " + std::to_string(number) + ": " + e.what());
      parsed.emplace_back(std::nullopt);
    }
    report.entries.push_back(std::move(check));
  }

  std::unordered_map<std::string, std::vector<std::size_t>> users;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (!parsed[i]) continue;
    users[parsed[i]->source].push_back(i);
    users[parsed[i]->target].push_back(i);
  }

  std::set<std::string> referenced;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (!parsed[i]) continue;
    const DatasetEntry& entry = *parsed[i];
    auto& problems = report.entries[i].problems;

    if (trim(entry.prompt).empty()) problems.push_back("empty prompt");

    std::optional<Raster> images[2];
    const std::string* paths[2] = {&entry.source, &entry.target};
    for (int k = 0; k < 2; ++k) {
      const std::string& rel = *paths[k];
      if (users[rel].size() > 1) problems.push_back("duplicate path: " + rel);
      if (!is_safe_relative(rel)) {
        problems.push_back("path escapes dataset root: " + rel);
        continue;
      }
      referenced.insert(fs::path(rel).lexically_normal().generic_string());
      const fs::path full = root / rel;
      if (!fs::is_regular_file(full)) {
        problems.push_back("missing file: " + rel);
        continue;
      }
      try {
        images[k] = load_image(full);
      } catch (const std::exception& e) {
        problems.push_back("undecodable image: " + rel);
      }
    }
    if (images[0] && images[1] &&
        (images[0]->width() != images[1]->width() || images[0]->height() != images[1]->height())) {
      problems.push_back("dimension mismatch: " + std::to_string(images[0]->width()) + "x" +
                         std::to_string(images[0]->height()) + " vs " +
                         std::to_string(images[1]->width()) + "x" +
                         std::to_string(images[1]->height()));
    }
  }

  for (const char* sub : {kSourceDir, kTargetDir}) {
    const fs::path dir = root / sub;
    if (!fs::is_directory(dir)) continue;
    std::vector<std::string> found;
    for (const auto& item : fs::directory_iterator(dir)) {
      if (!item.is_regular_file() || item.path().extension() != ".png") continue;
      const std::string rel = std::string(sub) + "/" + item.path().filename().string();
      if (!referenced.contains(rel)) found.push_back(rel);
    }
    std::sort(found.begin(), found.end());
    report.orphans.insert(report.orphans.end(), found.begin(), found.end());
  }
  return report;
}

DatasetStats dataset_stats(const fs::path& root) {
  DatasetStats stats;
  std::size_t total_length = 0;
  for (const auto& [number, line] : read_manifest_lines(root)) {
    DatasetEntry entry;
    try {
      entry = parse_manifest_line(line);
    } catch (const DatasetError& e) {
      throw DatasetError("invalid manifest at line " + std::to_string(number) + ": " + e.what());
    }
    if (!is_safe_relative(entry.target)) {
      throw DatasetError("invalid manifest at line " + std::to_string(number) + ": unsafe path");
    }
    Raster target;
    try {
      target = load_image(root / entry.target);
    } catch (const std::exception& e) {
      throw DatasetError("invalid manifest at line " + std::to_string(number) + ": " + e.what());
    }
    ++stats.dimensions[{target.width(), target.height()}];

    const std::size_t len = utf8_length(entry.prompt);
    if (stats.count == 0) {
      stats.min_prompt_length = stats.max_prompt_length = len;
    } else {
      stats.min_prompt_length = std::min(stats.min_prompt_length, len);
      stats.max_prompt_length = std::max(stats.max_prompt_length, len);
    }
    total_length += len;
    ++stats.count;
  }
  if (stats.count > 0) {
    stats.mean_prompt_length = static_cast<double>(total_length) / static_cast<double>(stats.count);
  }
  return stats;
}

}  // namespace abstractnet
