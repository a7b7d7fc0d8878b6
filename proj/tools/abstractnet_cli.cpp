// abstractnet: triangle-abstract control images, paired datasets, and a toy
// zero-convolution ControlNet.
//
// Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "abstractnet/approximator.hpp"
#include "abstractnet/checkpoint.hpp"
#include "abstractnet/dataset.hpp"
#include "abstractnet/image_io.hpp"
#include "abstractnet/toy_task.hpp"
#include "abstractnet/verification.hpp"

namespace fs = std::filesystem;
using namespace abstractnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct ApproxFlags {
  int shapes = 50;
  int alpha = 128;
  int candidates = 200;
  int steps = 100;
  int max_stall = 30;
  int retries = 3;
  std::uint64_t seed = 0;
  int jobs = 1;

  ApproxConfig to_config() const {
    ApproxConfig c;
    c.shape_count = shapes;
    c.alpha = alpha;
    c.candidates = candidates;
    c.climb_steps = steps;
    c.max_stall = max_stall;
    c.max_retries = retries;
    c.seed = seed;
    c.jobs = jobs;
    return c;
  }
};

void add_approx_flags(CLI::App* cmd, ApproxFlags& f) {
  cmd->add_option("--shapes", f.shapes, "Triangles to place")->check(CLI::NonNegativeNumber);
  cmd->add_option("--alpha", f.alpha, "Shape alpha")->check(CLI::Range(1, 255));
  cmd->add_option("--candidates", f.candidates, "Random candidates per hill climb")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", f.steps, "Hill-climb mutation steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--max-stall", f.max_stall, "Stop climbing after this many non-improvements")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--retries", f.retries, "Fresh hill climbs before giving up on a shape")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

int run_approximate(const fs::path& input, const fs::path& output, const ApproxFlags& flags,
                    int resize, const std::string& svg, const std::string& trace) {
  Raster target;
  try {
    target = load_image(input);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (resize > 0) target = resize_and_center_crop(target, resize);
  const ApproxState state = approximate(target, flags.to_config());
  save_image(state.canvas(), output);
  if (!svg.empty()) {
    write_file(svg, export_svg(state.shapes(), target.width(), target.height(), average_color(target)));
  }
  if (!trace.empty()) write_file(trace, trace_csv(state.trace()));
  std::cout << "final_rmse=" << format_double(state.score()) << "\n";
  std::cout << "shapes=" << state.shapes().size() << "\n";
  return kExitOk;
}

int run_dataset_build(BuildConfig config) {
  const BuildReport report = build(config);
  for (const auto& s : report.skipped) std::cerr << "skipped " << s.file << ": " << s.reason << "\n";
  std::cout << "processed=" << report.processed << " skipped=" << report.skipped.size()
            << " runtime_s=" << format_double(report.total_runtime_s) << "\n";
  return kExitOk;
}

int run_dataset_validate(const fs::path& root) {
  const ValidationReport report = validate_manifest(root);
  for (const EntryCheck& e : report.entries) {
    for (const std::string& p : e.problems) {
      std::cout << "FAIL line " << e.line << " (" << e.source << ", " << e.target << "): " << p << "\n";
    }
  }
  for (const std::string& o : report.orphans) std::cout << "FAIL orphan file: " << o << "\n";
  std::cout << "entries=" << report.entries.size() << " failed=" << report.failed()
            << " orphans=" << report.orphans.size() << "\n";
  return report.ok() ? kExitOk : kExitFailure;
}

int run_dataset_stats(const fs::path& root) {
  const DatasetStats stats = dataset_stats(root);
  std::cout << "count=" << stats.count << "\n";
  std::string dims;
  for (const auto& [wh, n] : stats.dimensions) {
    if (!dims.empty()) dims += ",";
    dims += std::to_string(wh.first) + "x" + std::to_string(wh.second) + ":" + std::to_string(n);
  }
  std::cout << "dimensions=" << dims << "\n";
  std::cout << "prompt_length_mean=" << format_double(stats.mean_prompt_length) << "\n";
  std::cout << "prompt_length_min=" << stats.min_prompt_length << "\n";
  std::cout << "prompt_length_max=" << stats.max_prompt_length << "\n";
  return kExitOk;
}

int run_zeroconv_verify(std::uint64_t seed) {
  bool ok = true;
  for (const CheckResult& r : run_zeroconv_checks(seed)) {
    std::cout << r.name << "=" << (r.passed ? "pass" : "fail") << " " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

int run_zeroconv_train(const TrainConfig& config, const std::string& log_path,
                       const std::string& checkpoint_path) {
  const ToyTask task = make_toy_task(config.seed);
  ControlNetBlock cb = make_controlnet(task);
  TrainLog log;
  try {
    log = train_toy(cb, task, config);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kExitFailure;
  }
  if (!log_path.empty()) write_file(log_path, train_log_csv(log));
  if (!checkpoint_path.empty()) save_checkpoint(cb, checkpoint_path);
  std::cout << "baseline_loss=" << format_double(log.baseline_loss) << "\n";
  std::cout << "step0_loss=" << format_double(log.rows.front().loss) << "\n";
  std::cout << "final_loss=" << format_double(log.final_loss) << "\n";
  std::cout << "final_condition_fidelity=" << format_double(log.final_fidelity) << "\n";
  return kExitOk;
}

int run_zeroconv_infer(const fs::path& checkpoint, const fs::path& control, std::uint64_t seed) {
  const ControlNetBlock cb = load_checkpoint(checkpoint);
  Raster image;
  try {
    image = load_image(control);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  Rng rng(seed);
  const Tensor x = random_normal({cb.locked.channels(), 8, 8}, rng);
  const Tensor y = infer(cb, image, x);
  const Tensor base = block_forward(cb.locked, x);
  double mean = 0.0;
  for (double v : y.values()) mean += v;
  mean /= static_cast<double>(y.size());
  std::cout << "output_mean=" << format_double(mean) << "\n";
  std::cout << "control_effect_l2=" << format_double(std::sqrt(sum_of_squares(y - base))) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triangle-abstract control images, paired datasets and a toy ControlNet"};
  app.require_subcommand(1);

  // approximate
  auto* approx_cmd = app.add_subcommand("approximate", "Approximate an image with alpha-blended triangles");
  std::string approx_in, approx_out, svg_path, trace_path;
  int approx_resize = 0;
  ApproxFlags approx_flags;
  approx_cmd->add_option("input", approx_in, "Input image (PNG, JPEG, PPM)")->required();
  approx_cmd->add_option("output", approx_out, "Output control image (.png or .ppm)")->required();
  add_approx_flags(approx_cmd, approx_flags);
  approx_cmd->add_option("--resize", approx_resize, "Resize shorter edge and center-crop (0 keeps size)")
      ->check(CLI::NonNegativeNumber);
  approx_cmd->add_option("--svg", svg_path, "Also write the shapes as SVG");
  approx_cmd->add_option("--trace", trace_path, "Also write the score trace as CSV");

  // dataset
  auto* dataset_cmd = app.add_subcommand("dataset", "Build, validate or summarize a paired dataset");
  dataset_cmd->require_subcommand(1);
  auto* build_cmd = dataset_cmd->add_subcommand("build", "Build a dataset from a directory of images");
  BuildConfig build_config;
  ApproxFlags build_flags;
  std::string input_dir, output_dir, caption_mode = "sidecar";
  build_cmd->add_option("--input", input_dir, "Directory of source images")->required();
  build_cmd->add_option("--output", output_dir, "Dataset root to write")->required();
  build_cmd->add_option("--resize", build_config.resize, "Square edge length (0 keeps size)")
      ->check(CLI::NonNegativeNumber);
  build_cmd->add_option("--caption-mode", caption_mode, "sidecar or stub")
      ->check(CLI::IsMember({"sidecar", "stub"}));
  build_cmd->add_flag("--emit-traces", build_config.emit_traces, "Write score traces beside controls");
  add_approx_flags(build_cmd, build_flags);

  auto* validate_cmd = dataset_cmd->add_subcommand("validate", "Check every manifest entry");
  std::string validate_root;
  validate_cmd->add_option("root", validate_root, "Dataset root")->required();

  auto* stats_cmd = dataset_cmd->add_subcommand("stats", "Summarize a dataset");
  std::string stats_root;
  stats_cmd->add_option("root", stats_root, "Dataset root")->required();

  // zeroconv
  auto* zc_cmd = app.add_subcommand("zeroconv", "Toy zero-convolution ControlNet");
  zc_cmd->require_subcommand(1);
  auto* verify_cmd = zc_cmd->add_subcommand("verify", "Run the mechanism checks");
  std::uint64_t verify_seed = 0;
  verify_cmd->add_option("--seed", verify_seed, "Random seed");

  auto* train_cmd = zc_cmd->add_subcommand("train", "Train on the toy conditioning task");
  TrainConfig train_config;
  std::string log_path, checkpoint_path;
  train_cmd->add_option("--steps", train_config.steps, "SGD steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_config.learning_rate, "Learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", train_config.seed, "Random seed (task and batches)");
  train_cmd->add_option("--batch-size", train_config.batch_size, "Samples per step")->check(CLI::PositiveNumber);
  train_cmd->add_option("--log-every", train_config.log_every, "Log interval in steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--jobs", train_config.jobs, "Worker threads")->check(CLI::PositiveNumber);
  train_cmd->add_option("--log", log_path, "Training log CSV path");
  train_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint output path");

  auto* infer_cmd = zc_cmd->add_subcommand("infer", "Run a checkpoint on a control image");
  std::string infer_checkpoint, infer_control;
  std::uint64_t infer_seed = 0;
  infer_cmd->add_option("--checkpoint", infer_checkpoint, "Checkpoint path")->required();
  infer_cmd->add_option("--control", infer_control, "Control image")->required();
  infer_cmd->add_option("--seed", infer_seed, "Seed for the input feature map");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*approx_cmd) {
      return run_approximate(approx_in, approx_out, approx_flags, approx_resize, svg_path, trace_path);
    }
    if (*build_cmd) {
      build_config.input_dir = input_dir;
      build_config.output_dir = output_dir;
      build_config.caption_mode = caption_mode == "stub" ? CaptionMode::kStub : CaptionMode::kSidecar;
      build_config.approx = build_flags.to_config();
      build_config.approx.jobs = 1;
      build_config.parallelism = build_flags.jobs;
      build_config.seed = build_flags.seed;
      try {
        build_config.validate();
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
      }
      return run_dataset_build(build_config);
    }
    if (*validate_cmd) return run_dataset_validate(validate_root);
    if (*stats_cmd) return run_dataset_stats(stats_root);
    if (*verify_cmd) return run_zeroconv_verify(verify_seed);
    if (*train_cmd) return run_zeroconv_train(train_config, log_path, checkpoint_path);
    if (*infer_cmd) return run_zeroconv_infer(infer_checkpoint, infer_control, infer_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
