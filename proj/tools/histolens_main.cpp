#include <CLI11.hpp>

#include <iostream>

#include "histolens/errors.hpp"
#include "histolens/log.hpp"
#include "histolens/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histolens: corpus analytics pipeline for classical Chinese debate texts"};
  std::string config_path;
  std::string stage_name = "all";
  std::string provider;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool verbose = false;
  std::vector<std::string> words;

  app.add_option("-c,--config", config_path, "Pipeline configuration (JSON)")->required();
  app.add_option("-s,--stage", stage_name,
                 "ingest, themes, extract, graph, geo, dataset, classify-eval, serve or all");
  app.add_option("-p,--provider", provider, "Provider name from the providers file");
  app.add_option("--seed", seed, "Seed for splits, few-shot selection and tutor sessions");
  app.add_option("-o,--out", out_dir, "Output directory");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_option("command", words, "Optional 'run <stage>' form");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (verbose) histolens::logger()->set_level(spdlog::level::debug);

  if (!words.empty()) {
    if (words[0] != "run" || words.size() != 2) {
      std::cerr << "usage: histolens [run <stage>] --config FILE [--stage STAGE]\n";
      return kExitConfig;
    }
    stage_name = words[1];
  }

  histolens::Stage stage;
  try {
    stage = histolens::parse_stage(stage_name);
  } catch (const histolens::Error& e) {
    std::cerr << "config-invalid: " << e.what() << "\n";
    return kExitConfig;
  }

  std::unique_ptr<histolens::Pipeline> pipeline;
  try {
    auto config = histolens::PipelineConfig::load(config_path);
    if (!provider.empty()) config.provider = provider;
    if (seed) config.seed = *seed;
    if (!out_dir.empty()) {
      config.output_dir = std::filesystem::absolute(out_dir);
      config.session_store = config.output_dir / "tutor" / "sessions.db";
    }
    pipeline = std::make_unique<histolens::Pipeline>(std::move(config));
  } catch (const histolens::ConfigError& e) {
    std::cerr << "config-invalid:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return kExitConfig;
  } catch (const histolens::Error& e) {
    std::cerr << "config-invalid: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    pipeline->run(stage);
  } catch (const histolens::Error& e) {
    std::cerr << histolens::error_code_name(e.code()) << ": " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "stage-failure: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitOk;
}
