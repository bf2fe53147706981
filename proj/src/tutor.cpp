#include "histolens/tutor.hpp"

#include <sqlite3.h>

#include <algorithm>

#include "histolens/errors.hpp"
#include "histolens/hashing.hpp"
#include "histolens/log.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json history_to_json(const HistoryEntry& h) {
  ordered_json j;
  j["statement_id"] = h.statement_id;
  j["learner_guess"] = to_string(h.learner_guess);
  j["gold_label"] = to_string(h.gold_label);
  j["model_result"] = h.model_result ? to_json(*h.model_result) : ordered_json(nullptr);
  j["explanation_unavailable"] = h.explanation_unavailable;
  j["correct"] = h.correct;
  j["answered_at"] = h.answered_at;
  return j;
}

HistoryEntry history_from_json(const json& j) {
  HistoryEntry h;
  h.statement_id = j.at("statement_id").get<std::string>();
  h.learner_guess = parse_label(j.at("learner_guess").get<std::string>());
  h.gold_label = parse_label(j.at("gold_label").get<std::string>());
  if (!j.at("model_result").is_null()) h.model_result = classification_from_json(j.at("model_result"));
  h.explanation_unavailable = j.at("explanation_unavailable").get<bool>();
  h.correct = j.at("correct").get<bool>();
  h.answered_at = j.at("answered_at").get<std::string>();
  return h;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ordered_json TeachingSession::to_json() const {
  ordered_json j;
  j["session_id"] = session_id;
  j["dataset_ref"] = dataset_ref;
  j["seed"] = seed;
  j["item_order"] = item_order;
  j["cursor"] = cursor;
  j["history"] = ordered_json::array();
  for (const auto& h : history) j["history"].push_back(history_to_json(h));
  return j;
}

TeachingSession TeachingSession::from_json(const json& j) {
  TeachingSession s;
  s.session_id = j.at("session_id").get<std::string>();
  s.dataset_ref = j.at("dataset_ref").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.item_order = j.at("item_order").get<std::vector<std::string>>();
  s.cursor = j.at("cursor").get<std::size_t>();
  for (const auto& h : j.at("history")) s.history.push_back(history_from_json(h));
  return s;
}

ordered_json Passage::to_json() const {
  return ordered_json{{"statement_id", statement_id}, {"text", text}, {"position", position}, {"total", total}};
}

ordered_json ProgressSummary::to_json() const {
  ordered_json j;
  j["session_id"] = session_id;
  j["answered"] = answered;
  j["total"] = total;
  j["correct"] = correct;
  j["accuracy"] = accuracy;
  j["per_label"] = ordered_json::object();
  for (Label l : kAllLabels) {
    const auto it = per_label.find(l);
    const LabelScore s = it == per_label.end() ? LabelScore{} : it->second;
    j["per_label"][std::string(to_string(l))] = {
        {"answered", s.answered}, {"correct", s.correct}, {"accuracy", s.accuracy}};
  }
  j["recent"] = ordered_json::array();
  for (const auto& h : recent) j["recent"].push_back(history_to_json(h));
  return j;
}

ProgressSummary summarize(const TeachingSession& session) {
  ProgressSummary p;
  p.session_id = session.session_id;
  p.total = session.item_order.size();
  for (Label l : kAllLabels) p.per_label[l] = {};
  for (const auto& h : session.history) {
    ++p.answered;
    auto& s = p.per_label[h.gold_label];
    ++s.answered;
    if (h.correct) {
      ++p.correct;
      ++s.correct;
    }
  }
  p.accuracy = ratio(p.correct, p.answered);
  for (auto& [l, s] : p.per_label) s.accuracy = ratio(s.correct, s.answered);
  for (auto it = session.history.rbegin(); it != session.history.rend() && p.recent.size() < kRecentExplanations; ++it)
    p.recent.push_back(*it);
  return p;
}

ordered_json GuessOutcome::to_json() const {
  ordered_json j;
  j["correct"] = correct;
  j["gold_label"] = to_string(gold_label);
  j["explanation_unavailable"] = explanation_unavailable;
  j["model_result"] = model_result ? histolens::to_json(*model_result) : ordered_json(nullptr);
  j["progress"] = {{"answered", answered}, {"total", total}, {"running_accuracy", running_accuracy}};
  return j;
}

// ---------------------------------------------------------------------------
// Store

namespace {

[[noreturn]] void sqlite_fail(sqlite3* db, const std::string& what) {
  throw Error(ErrorCode::IoFailure, what + ": " + (db ? sqlite3_errmsg(db) : "out of memory"));
}

struct Stmt {
  sqlite3_stmt* s = nullptr;
  Stmt(sqlite3* db, const char* sql) {
    if (sqlite3_prepare_v2(db, sql, -1, &s, nullptr) != SQLITE_OK) sqlite_fail(db, "prepare");
  }
  ~Stmt() { sqlite3_finalize(s); }
};

}  // namespace

SessionStore::SessionStore(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (sqlite3_open(path.string().c_str(), &db_) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw Error(ErrorCode::IoFailure, "cannot open session store " + path.string() + ": " + msg);
  }
  char* err = nullptr;
  if (sqlite3_exec(db_, "CREATE TABLE IF NOT EXISTS sessions (id TEXT PRIMARY KEY, json TEXT NOT NULL)", nullptr,
                   nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw Error(ErrorCode::IoFailure, "cannot initialise session store: " + msg);
  }
}

SessionStore::~SessionStore() { sqlite3_close(db_); }

void SessionStore::put(const TeachingSession& session) {
  std::lock_guard lock(mu_);
  Stmt st(db_, "INSERT OR REPLACE INTO sessions (id, json) VALUES (?1, ?2)");
  const std::string body = session.to_json().dump();
  sqlite3_bind_text(st.s, 1, session.session_id.c_str(), -1, SQLITE_TRANSIENT);
  sqlite3_bind_text(st.s, 2, body.c_str(), static_cast<int>(body.size()), SQLITE_TRANSIENT);
  if (sqlite3_step(st.s) != SQLITE_DONE) sqlite_fail(db_, "store session");
}

std::optional<TeachingSession> SessionStore::get(const std::string& session_id) {
  std::lock_guard lock(mu_);
  Stmt st(db_, "SELECT json FROM sessions WHERE id = ?1");
  sqlite3_bind_text(st.s, 1, session_id.c_str(), -1, SQLITE_TRANSIENT);
  const int rc = sqlite3_step(st.s);
  if (rc == SQLITE_DONE) return std::nullopt;
  if (rc != SQLITE_ROW) sqlite_fail(db_, "load session");
  const auto* txt = reinterpret_cast<const char*>(sqlite3_column_text(st.s, 0));
  return TeachingSession::from_json(json::parse(txt ? txt : "{}"));
}

std::size_t SessionStore::size() {
  std::lock_guard lock(mu_);
  Stmt st(db_, "SELECT COUNT(*) FROM sessions");
  if (sqlite3_step(st.s) != SQLITE_ROW) sqlite_fail(db_, "count sessions");
  return static_cast<std::size_t>(sqlite3_column_int64(st.s, 0));
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<std::string> DatasetRegistry::refs() const {
  std::vector<std::string> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir_, ec)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir_))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::shared_ptr<const std::vector<LabeledStatement>> DatasetRegistry::get(const std::string& ref) {
  std::lock_guard lock(mu_);
  if (auto it = loaded_.find(ref); it != loaded_.end()) return it->second;
  const bool safe = !ref.empty() && ref.find('/') == std::string::npos && ref.find('\\') == std::string::npos &&
                    ref.find("..") == std::string::npos;
  const auto path = dir_ / (ref + ".jsonl");
  if (!safe || !std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::UnknownDataset, "unknown dataset '" + ref + "'");
  auto items = std::make_shared<const std::vector<LabeledStatement>>(load_jsonl(path));
  loaded_.emplace(ref, items);
  return items;
}

// ---------------------------------------------------------------------------
// Service

TutorService::TutorService(Gateway& gateway, TutorOptions options)
    : gateway_(gateway), options_(std::move(options)), store_(options_.store_path), datasets_(options_.dataset_dir) {}

std::shared_ptr<std::mutex> TutorService::session_lock(const std::string& id) {
  std::lock_guard lock(locks_mu_);
  auto& m = locks_[id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

TeachingSession TutorService::load(const std::string& id) {
  auto s = store_.get(id);
  if (!s) throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
  return *std::move(s);
}

const LabeledStatement& TutorService::find(const std::vector<LabeledStatement>& items, const std::string& id) const {
  for (const auto& s : items)
    if (s.id == id) return s;
  throw Error(ErrorCode::UnknownDataset, "statement '" + id + "' is missing from its dataset");
}

TeachingSession TutorService::create_session(const std::string& dataset_ref, std::uint64_t seed) {
  const auto items = datasets_.get(dataset_ref);
  std::vector<std::string> ids;
  for (const auto& s : *items) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());

  TeachingSession session;
  session.dataset_ref = dataset_ref;
  session.seed = seed;
  for (std::size_t i : seeded_permutation(ids.size(), seed)) session.item_order.push_back(ids[i]);

  std::lock_guard lock(create_mu_);
  for (std::size_t n = store_.size();; ++n) {
    const std::string id =
        "s-" + sha256_hex(dataset_ref + "\n" + std::to_string(seed) + "\n" + std::to_string(n)).substr(0, 16);
    if (!store_.get(id)) {
      session.session_id = id;
      break;
    }
  }
  store_.put(session);
  return session;
}

TeachingSession TutorService::session(const std::string& session_id) {
  auto m = session_lock(session_id);
  std::lock_guard lock(*m);
  return load(session_id);
}

Passage TutorService::next_passage(const std::string& session_id) {
  auto m = session_lock(session_id);
  std::lock_guard lock(*m);
  const TeachingSession s = load(session_id);
  if (s.cursor >= s.item_order.size())
    throw Error(ErrorCode::SessionComplete, "session '" + session_id + "' has no passages left");
  const auto items = datasets_.get(s.dataset_ref);
  const auto& st = find(*items, s.item_order[s.cursor]);
  return Passage{st.id, st.text, s.cursor + 1, s.item_order.size()};
}

GuessOutcome TutorService::submit_guess(const std::string& session_id, const std::string& statement_id, Label guess) {
  auto m = session_lock(session_id);
  std::lock_guard lock(*m);
  TeachingSession s = load(session_id);
  if (s.cursor >= s.item_order.size())
    throw Error(ErrorCode::SessionComplete, "session '" + session_id + "' has no passages left");
  if (statement_id != s.item_order[s.cursor])
    throw Error(ErrorCode::OutOfOrderGuess,
                "guess for '" + statement_id + "' but the current passage is '" + s.item_order[s.cursor] + "'");
  const auto items = datasets_.get(s.dataset_ref);
  const auto& st = find(*items, statement_id);

  HistoryEntry h;
  h.statement_id = statement_id;
  h.learner_guess = guess;
  h.gold_label = st.label;
  h.correct = guess == st.label;
  try {
    std::shared_ptr<const std::vector<LabeledStatement>> pool = items;
    if (!options_.few_shot_ref.empty() && options_.few_shot_ref != s.dataset_ref) {
      try {
        pool = datasets_.get(options_.few_shot_ref);
      } catch (const Error&) {
        pool = items;
      }
    }
    std::vector<Exemplar> exemplars;
    if (options_.few_shot_k > 0)
      exemplars = to_exemplars(select_few_shot(*pool, options_.few_shot_k, options_.few_shot_seed, statement_id));
    h.model_result = classify(st, gateway_, options_.template_id, exemplars);
  } catch (const Error& e) {
    logger()->warn("session {}: explanation for {} unavailable ({}: {})", session_id, statement_id,
                   error_code_name(e.code()), e.what());
    h.explanation_unavailable = true;
  }
  h.answered_at = options_.clock();
  s.history.push_back(std::move(h));
  ++s.cursor;
  store_.put(s);

  const auto& last = s.history.back();
  const auto progress = summarize(s);
  GuessOutcome out;
  out.correct = last.correct;
  out.gold_label = last.gold_label;
  out.model_result = last.model_result;
  out.explanation_unavailable = last.explanation_unavailable;
  out.answered = progress.answered;
  out.total = progress.total;
  out.running_accuracy = progress.accuracy;
  return out;
}

ProgressSummary TutorService::session_progress(const std::string& session_id) {
  return summarize(session(session_id));
}

}  // namespace histolens
