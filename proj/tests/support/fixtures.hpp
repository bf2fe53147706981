#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <spdlog/sinks/base_sink.h>

#include "histolens/classifier.hpp"
#include "histolens/dataset.hpp"
#include "histolens/gateway.hpp"
#include "histolens/log.hpp"
#include "histolens/prompt.hpp"
#include "histolens/text.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return HISTOLENS_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path test_data_dir() { return source_dir() / "tests" / "data"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "histolens") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" +
             std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Counts log lines at or above warn while alive.
class LogCounter {
 public:
  LogCounter() : sink_(std::make_shared<Sink>()) { histolens::logger()->sinks().push_back(sink_); }
  ~LogCounter() {
    auto& sinks = histolens::logger()->sinks();
    sinks.erase(std::remove(sinks.begin(), sinks.end(), sink_), sinks.end());
  }
  std::size_t warnings() const { return sink_->count; }
  const std::vector<std::string>& messages() const { return sink_->lines; }

 private:
  struct Sink : spdlog::sinks::base_sink<std::mutex> {
    std::size_t count = 0;
    std::vector<std::string> lines;
    void sink_it_(const spdlog::details::log_msg& msg) override {
      if (msg.level >= spdlog::level::warn) {
        ++count;
        lines.emplace_back(msg.payload.data(), msg.payload.size());
      }
    }
    void flush_() override {}
  };
  std::shared_ptr<Sink> sink_;
};

inline histolens::ProviderConfig mock_provider(const std::string& name = "mock", const std::string& fixture_dir = "") {
  histolens::ProviderConfig p;
  p.name = name;
  p.api = "mock";
  p.model_id = "fixture-replay";
  p.fixture_dir = fixture_dir;
  return p;
}

/// Gateway with no sleeping between retries and the shipped templates.
inline std::shared_ptr<histolens::Gateway> make_gateway(std::vector<histolens::ProviderConfig> providers,
                                                        const std::filesystem::path& cache_dir = {}) {
  histolens::GatewayOptions opts;
  opts.sleep = [](std::chrono::milliseconds) {};
  opts.now = [] { return std::string("2024-01-01T00:00:00Z"); };
  auto gw = std::make_shared<histolens::Gateway>(std::move(providers), cache_dir, opts);
  gw->templates().load_directory(data_dir() / "templates");
  return gw;
}

/// Text of the statement inside a rendered classification prompt.
inline std::string statement_of(const histolens::Prompt& prompt) {
  const std::string marker = "Statement:\n";
  const auto task = prompt.user.rfind(histolens::kTaskMarker);
  const auto at = prompt.user.find(marker, task == std::string::npos ? 0 : task);
  if (at == std::string::npos) return {};
  std::string rest = prompt.user.substr(at + marker.size());
  const auto end = rest.find("\n\n");
  return end == std::string::npos ? rest : rest.substr(0, end);
}

inline std::string classification_reply(histolens::Label label, const std::string& span = "",
                                        const std::string& gloss = "") {
  nlohmann::json j;
  j["label"] = std::string(histolens::to_string(label));
  j["confidence"] = "high";
  j["explanation"] = "fixture reply";
  j["features"] = nlohmann::json::array();
  if (!span.empty()) j["features"].push_back({{"span", span}, {"gloss", gloss}});
  return "```json\n" + j.dump() + "\n```";
}

/// Synthetic statements: Han text long enough for any min_chars used in tests.
inline std::vector<histolens::LabeledStatement> synthetic_statements(std::size_t n_confucian, std::size_t n_legalist,
                                                                    std::uint64_t seed = 1) {
  static const std::vector<std::string> conf = {"仁", "義", "禮", "德", "孝", "教", "君", "子"};
  static const std::vector<std::string> leg = {"法", "刑", "罰", "令", "賞", "勢", "術", "權"};
  std::mt19937_64 rng(seed);
  std::vector<histolens::LabeledStatement> out;
  auto make = [&](histolens::Label label, std::size_t i) {
    const auto& pool = label == histolens::Label::Confucian ? conf : leg;
    std::string text;
    const std::size_t len = 20 + rng() % 30;
    for (std::size_t k = 0; k < len; ++k) text += pool[rng() % pool.size()];
    text += "也" + std::to_string(i);
    histolens::LabeledStatement s;
    s.id = (label == histolens::Label::Confucian ? "c" : "l") + std::string(i < 10 ? "00" : i < 100 ? "0" : "") +
           std::to_string(i);
    s.text = text;
    s.label = label;
    s.char_count = len + 1;
    s.chapter_index = static_cast<int>(1 + i % 5);
    out.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < n_confucian; ++i) make(histolens::Label::Confucian, i);
  for (std::size_t i = 0; i < n_legalist; ++i) make(histolens::Label::Legalist, i);
  return out;
}

/// The shipped fixture pipeline config with absolute input paths and cache and
/// output directories under `dir`.
inline nlohmann::json pipeline_config(const std::filesystem::path& dir) {
  auto j = nlohmann::json::parse(histolens::text::read_file(data_dir() / "fixture/config.json"));
  const auto base = data_dir() / "fixture";
  for (const char* key : {"corpus", "markers", "lexicons", "stopwords", "aliases", "eras", "gazetteer", "overrides",
                          "providers", "templates"})
    j[key] = (base / j[key].get<std::string>()).lexically_normal().string();
  j["cache_dir"] = (dir / "cache").string();
  j["output_dir"] = (dir / "out").string();
  return j;
}

inline std::filesystem::path write_pipeline_config(const std::filesystem::path& dir, const nlohmann::json& j) {
  const auto path = dir / "config.json";
  histolens::text::write_file(path, j.dump(2));
  return path;
}

}  // namespace fixtures
