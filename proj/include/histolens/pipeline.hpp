#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <memory>

#include <json.hpp>

#include "histolens/errors.hpp"

namespace histolens {

class Gateway;
class TutorService;

enum class Stage { Ingest, Themes, Extract, Graph, Geo, Dataset, ClassifyEval, Serve, All };

std::string_view to_string(Stage s);
/// Throws InvalidArgument for unknown names.
Stage parse_stage(std::string_view s);

/// Stages run by `all`, in order.
inline constexpr Stage kAllStages[] = {Stage::Ingest, Stage::Themes, Stage::Extract,
                                       Stage::Graph,  Stage::Geo,    Stage::Dataset};

std::vector<Stage> expand_stage(Stage s);

/// Paths are absolute after loading (relative ones resolve against the
/// config file's directory). Every threshold has a default.
struct PipelineConfig {
  std::filesystem::path base_dir;

  std::filesystem::path corpus;
  std::string corpus_format = "auto";
  std::filesystem::path markers;
  std::filesystem::path lexicons;
  std::filesystem::path stopwords;
  std::filesystem::path aliases;
  std::filesystem::path eras;
  std::filesystem::path gazetteer;
  std::filesystem::path overrides;
  std::filesystem::path providers;
  std::filesystem::path templates;
  std::string provider = "mock";
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "out";

  std::uint64_t seed = 0;
  std::size_t bins = 20;
  std::size_t min_mentions = 3;
  std::size_t min_chars = 20;
  double split_ratio = 0.8;
  std::size_t few_shot_k = 4;
  std::size_t top_k_terms = 100;
  std::size_t chunk_chars = 6000;
  std::size_t parallelism = 4;
  std::set<std::string> directed_labels;
  /// Stamped into graph metadata. Defaults to SOURCE_DATE_EPOCH, else the epoch.
  std::string created_at;

  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::filesystem::path session_store = "tutor/sessions.db";

  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  /// Throws ConfigInvalid if the file is missing or not JSON.
  static PipelineConfig load(const std::filesystem::path& path);
};

/// Every violation found, one message each; empty when valid.
std::vector<std::string> validate_config(const PipelineConfig& config);

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

struct OutputFile {
  std::string path;  // relative to the output directory, '/' separated
  std::string sha256;
  std::size_t bytes = 0;
};

class Pipeline {
 public:
  /// Validates the config; throws ConfigError listing every violation.
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  const PipelineConfig& config() const { return config_; }

  /// Runs one stage (or `all`) and updates manifest.json. On failure writes
  /// error.json and rethrows as StageFailure.
  void run(Stage stage);

  /// Used by tests to inject a backend; created lazily otherwise.
  Gateway& gateway();
  void set_gateway(std::shared_ptr<Gateway> gateway);

  /// Hook invoked once the tutor server is listening (serve stage).
  std::function<void(int port)> on_serving;

  std::vector<OutputFile> run_stage(Stage stage);

 private:
  std::vector<OutputFile> write_outputs(const std::vector<std::pair<std::string, std::string>>& files);
  void update_manifest(Stage stage, const std::vector<OutputFile>& outputs);

  std::vector<OutputFile> ingest();
  std::vector<OutputFile> themes();
  std::vector<OutputFile> extract();
  std::vector<OutputFile> graph();
  std::vector<OutputFile> geo();
  std::vector<OutputFile> dataset();
  std::vector<OutputFile> classify_eval();
  void serve();

  PipelineConfig config_;
  std::shared_ptr<Gateway> gateway_;
};

}  // namespace histolens
