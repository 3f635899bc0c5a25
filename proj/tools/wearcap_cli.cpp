#include "CLI11.hpp"
#include "json.hpp"
#include "wearcap/config.hpp"
#include "wearcap/pipeline.hpp"
#include "wearcap/sequence_io.hpp"
#include "wearcap/sim.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace wearcap;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitStage = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<double> time_offset_override;
  std::string out_dir;
  std::string sequence;
  std::string truth;
  std::string run_dir;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("wearcap");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("WEARCAP_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

nlohmann::json load_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError({{0, path + ": " + e.what()}});
  }
}

// Sidecar next to a sequence: run.jsonl -> run.truth.jsonl.
fs::path truth_sidecar(const fs::path& sequence) {
  fs::path p = sequence;
  p.replace_extension();
  return p.string() + ".truth.jsonl";
}

std::optional<GroundTruth> load_truth(const Options& opt) {
  if (!opt.truth.empty()) return read_truth_file(opt.truth);
  const fs::path side = truth_sidecar(opt.sequence);
  if (fs::exists(side)) return read_truth_file(side);
  return std::nullopt;
}

PipelineConfig pipeline_config(const Options& opt) {
  PipelineConfig config = PipelineConfig::defaults();
  if (!opt.config.empty()) {
    try {
      apply_config(config, load_json(opt.config));
    } catch (const std::invalid_argument& e) {
      throw SchemaError({{0, opt.config + ": " + e.what()}});
    }
  }
  if (opt.seed) config.seed = *opt.seed;
  if (opt.time_offset_override) config.calibration.time_offset_override = opt.time_offset_override;
  return config;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

int cmd_simulate(const Options& opt) {
  nlohmann::json j = opt.config.empty() ? nlohmann::json::object() : load_json(opt.config);
  ScenarioConfig config;
  try {
    config = scenario_from_json(j, opt.seed.value_or(j.value("seed", std::uint64_t{0})));
  } catch (const std::invalid_argument& e) {
    throw SchemaError({{0, e.what()}});
  }
  const Scenario scenario = [&] {
    try {
      return generate(config);
    } catch (const std::exception& e) {
      throw StageError("simulate", e.what());
    }
  }();
  const fs::path dir = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
  write_sequence_file(dir / "sequence.jsonl", sequence_from_scenario(scenario));
  write_truth_file(dir / "sequence.truth.jsonl", scenario.truth);
  write_text_file(dir / "scenario.json", dump(to_json(config)));
  return 0;
}

int cmd_run(const Options& opt, Mode mode) {
  const Sequence seq = read_sequence_file(opt.sequence);
  const std::optional<GroundTruth> truth = load_truth(opt);
  const PipelineConfig config = pipeline_config(opt);
  const GroundTruth* tp = truth ? &*truth : nullptr;
  const PipelineResult result = run_pipeline(seq, config, mode, tp);
  const fs::path dir = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
  std::ostringstream body, objects;
  write_body(body, result.estimate.body);
  write_objects(objects, result.estimate);
  write_text_file(dir / "body.jsonl", body.str());
  write_text_file(dir / "objects.jsonl", objects.str());
  const auto report = make_report(result, config, mode, tp);
  write_text_file(dir / "report.json", dump(report));
  if (result.metrics) {
    std::cout << "E_obj " << result.metrics->e_obj << " m, E_body " << result.metrics->e_body
              << " m\n";
  }
  return 0;
}

MotionEstimate load_estimate(const fs::path& dir) {
  std::ifstream body(dir / "body.jsonl");
  std::ifstream objects(dir / "objects.jsonl");
  if (!body || !objects) {
    throw SchemaError({{0, "missing body.jsonl or objects.jsonl in " + dir.string()}});
  }
  return read_estimate(body, objects);
}

int cmd_eval(const Options& opt) {
  const Sequence seq = read_sequence_file(opt.sequence);
  const std::optional<GroundTruth> truth = load_truth(opt);
  if (!truth) throw SchemaError({{0, "no ground truth for " + opt.sequence}});
  const MotionEstimate estimate = load_estimate(opt.run_dir);
  ErrorMetrics m;
  try {
    m = eval_errors(estimate, *truth, seq.body, seq.objects);
  } catch (const std::exception& e) {
    throw StageError("eval", e.what());
  }
  const nlohmann::json out = {{"schema", "wearcap.eval"},
                              {"e_obj", m.e_obj},
                              {"e_body", m.e_body},
                              {"per_frame",
                               {{"time", truth->body.times},
                                {"e_obj", m.obj_per_frame},
                                {"e_body", m.body_per_frame}}}};
  const fs::path dir = opt.out_dir.empty() ? fs::path(opt.run_dir) : fs::path(opt.out_dir);
  write_text_file(dir / "eval.json", dump(out));
  std::cout << "E_obj " << m.e_obj << " m, E_body " << m.e_body << " m\n";
  return 0;
}

int cmd_export_plots(const Options& opt) {
  const Sequence seq = read_sequence_file(opt.sequence);
  const fs::path run = opt.run_dir;
  const MotionEstimate estimate = load_estimate(run);
  nlohmann::json report = nlohmann::json::object();
  if (fs::exists(run / "report.json")) report = load_json((run / "report.json").string());
  const fs::path dir = opt.out_dir.empty() ? run / "plots" : fs::path(opt.out_dir);
  export_plots(report, estimate, seq.body, dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"wearcap: human and object motion from body-worn sensors"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", opt.seed, "random seed (overrides the config)");
    cmd->add_option("--out-dir", opt.out_dir, "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic sequence and its ground truth");
  add_common(simulate);

  auto add_run = [&](CLI::App* cmd, const std::string& default_mode) {
    add_common(cmd);
    cmd->add_option("sequence", opt.sequence, "sequence file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--truth", opt.truth, "ground truth file (default: <sequence>.truth.jsonl)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--mode", opt.mode, "static, interpolate or full")
        ->default_val(default_mode)
        ->check(CLI::IsMember({"static", "interpolate", "full"}));
    cmd->add_option("--time-offset-override", opt.time_offset_override,
                    "fixed IMU to camera time offset in seconds");
  };
  auto* run = app.add_subcommand("run", "run the pipeline on a sequence");
  add_run(run, "full");
  auto* baseline = app.add_subcommand("baseline", "run a baseline mode on a sequence");
  add_run(baseline, "static");

  auto* eval = app.add_subcommand("eval", "score pipeline outputs against ground truth");
  add_common(eval);
  eval->add_option("sequence", opt.sequence, "sequence file")->required()->check(CLI::ExistingFile);
  eval->add_option("run_dir", opt.run_dir, "directory with body.jsonl and objects.jsonl")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--truth", opt.truth, "ground truth file")->check(CLI::ExistingFile);

  auto* plots = app.add_subcommand("export-plots", "write CSV tables for plotting");
  add_common(plots);
  plots->add_option("sequence", opt.sequence, "sequence file")->required()->check(CLI::ExistingFile);
  plots->add_option("run_dir", opt.run_dir, "directory with pipeline outputs")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(opt);
    if (run->parsed() || baseline->parsed()) return cmd_run(opt, parse_mode(opt.mode));
    if (eval->parsed()) return cmd_eval(opt);
    if (plots->parsed()) return cmd_export_plots(opt);
  } catch (const SchemaError& e) {
    for (const auto& d : e.diagnostics()) {
      if (d.line > 0) {
        std::cerr << "line " << d.line << ": " << d.message << '\n';
      } else {
        std::cerr << d.message << '\n';
      }
    }
    return kExitSchema;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
