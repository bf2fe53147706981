#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "histolens/classifier.hpp"
#include "histolens/dataset.hpp"
#include "histolens/gateway.hpp"

struct sqlite3;

namespace histolens {

struct HistoryEntry {
  std::string statement_id;
  Label learner_guess = Label::Confucian;
  Label gold_label = Label::Confucian;
  std::optional<ClassificationResult> model_result;
  bool explanation_unavailable = false;
  bool correct = false;
  std::string answered_at;

  bool operator==(const HistoryEntry&) const = default;
};

struct TeachingSession {
  std::string session_id;
  std::string dataset_ref;
  std::uint64_t seed = 0;
  std::vector<std::string> item_order;
  std::size_t cursor = 0;
  std::vector<HistoryEntry> history;

  bool operator==(const TeachingSession&) const = default;
  nlohmann::ordered_json to_json() const;
  static TeachingSession from_json(const nlohmann::json& j);
};

struct Passage {
  std::string statement_id;
  std::string text;
  /// 1-based.
  std::size_t position = 0;
  std::size_t total = 0;

  nlohmann::ordered_json to_json() const;
};

struct ProgressSummary {
  struct LabelScore {
    std::size_t answered = 0;
    std::size_t correct = 0;
    double accuracy = 0;
  };
  std::string session_id;
  std::size_t answered = 0;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0;
  std::map<Label, LabelScore> per_label;
  /// Most recent first, at most kRecentExplanations.
  std::vector<HistoryEntry> recent;

  nlohmann::ordered_json to_json() const;
};

inline constexpr std::size_t kRecentExplanations = 5;

/// Pure function of the session history.
ProgressSummary summarize(const TeachingSession& session);

struct GuessOutcome {
  bool correct = false;
  Label gold_label = Label::Confucian;
  std::optional<ClassificationResult> model_result;
  bool explanation_unavailable = false;
  std::size_t answered = 0;
  std::size_t total = 0;
  double running_accuracy = 0;

  nlohmann::ordered_json to_json() const;
};

/// Single-file SQLite store keyed by session id.
class SessionStore {
 public:
  explicit SessionStore(const std::filesystem::path& path);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  void put(const TeachingSession& session);
  std::optional<TeachingSession> get(const std::string& session_id);
  std::size_t size();

 private:
  std::mutex mu_;
  sqlite3* db_ = nullptr;
};

/// Datasets are `<dir>/<ref>.jsonl` files.
class DatasetRegistry {
 public:
  explicit DatasetRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::vector<std::string> refs() const;
  /// Throws UnknownDataset.
  std::shared_ptr<const std::vector<LabeledStatement>> get(const std::string& ref);

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const std::vector<LabeledStatement>>> loaded_;
};

struct TutorOptions {
  std::filesystem::path dataset_dir;
  std::filesystem::path store_path;
  std::string template_id = std::string(kClassifyTemplate);
  /// Dataset ref supplying few-shot exemplars; the session's own dataset when
  /// empty or absent. The current statement is always excluded.
  std::string few_shot_ref = "train";
  std::size_t few_shot_k = kDefaultFewShotK;
  std::uint64_t few_shot_seed = 0;
  /// Files served by GET /graph and GET /map.
  std::filesystem::path graph_path;
  std::filesystem::path map_path;
  std::function<std::string()> clock = utc_now_iso8601;
};

class TutorService {
 public:
  TutorService(Gateway& gateway, TutorOptions options);

  /// Throws UnknownDataset.
  TeachingSession create_session(const std::string& dataset_ref, std::uint64_t seed);
  /// Idempotent until a guess is submitted. Throws UnknownSession, SessionComplete.
  Passage next_passage(const std::string& session_id);
  /// Throws UnknownSession, SessionComplete, OutOfOrderGuess. Gateway failures
  /// set explanation_unavailable instead of throwing.
  GuessOutcome submit_guess(const std::string& session_id, const std::string& statement_id, Label guess);
  ProgressSummary session_progress(const std::string& session_id);
  TeachingSession session(const std::string& session_id);

  DatasetRegistry& datasets() { return datasets_; }
  const TutorOptions& options() const { return options_; }

 private:
  std::shared_ptr<std::mutex> session_lock(const std::string& id);
  TeachingSession load(const std::string& id);
  const LabeledStatement& find(const std::vector<LabeledStatement>& items, const std::string& id) const;

  Gateway& gateway_;
  TutorOptions options_;
  SessionStore store_;
  DatasetRegistry datasets_;
  std::mutex create_mu_;
  std::mutex locks_mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

}  // namespace histolens
