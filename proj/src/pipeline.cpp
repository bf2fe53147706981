#include "histolens/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>

#include "histolens/classifier.hpp"
#include "histolens/corpus.hpp"
#include "histolens/csv.hpp"
#include "histolens/dataset.hpp"
#include "histolens/extraction.hpp"
#include "histolens/gateway.hpp"
#include "histolens/geo.hpp"
#include "histolens/hashing.hpp"
#include "histolens/kgraph.hpp"
#include "histolens/log.hpp"
#include "histolens/text.hpp"
#include "histolens/themes.hpp"
#include "histolens/tutor.hpp"
#include "histolens/tutor_http.hpp"

namespace histolens {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Themes: return "themes";
    case Stage::Extract: return "extract";
    case Stage::Graph: return "graph";
    case Stage::Geo: return "geo";
    case Stage::Dataset: return "dataset";
    case Stage::ClassifyEval: return "classify-eval";
    case Stage::Serve: return "serve";
    case Stage::All: return "all";
  }
  return "all";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::Ingest, Stage::Themes, Stage::Extract, Stage::Graph, Stage::Geo, Stage::Dataset,
                   Stage::ClassifyEval, Stage::Serve, Stage::All})
    if (to_string(st) == s) return st;
  throw Error(ErrorCode::InvalidArgument, "unknown stage '" + std::string(s) + "'");
}

std::vector<Stage> expand_stage(Stage s) {
  if (s == Stage::All) return {std::begin(kAllStages), std::end(kAllStages)};
  return {s};
}

// ---------------------------------------------------------------------------
// Config

namespace {

const std::set<std::string> kConfigKeys = {
    "corpus",      "corpus_format", "markers",     "lexicons",     "stopwords",       "aliases",
    "eras",        "gazetteer",     "overrides",   "providers",    "templates",       "provider",
    "cache_dir",   "output_dir",    "seed",        "bins",         "min_mentions",    "min_chars",
    "split_ratio", "few_shot_k",    "top_k_terms", "chunk_chars",  "parallelism",     "directed_labels",
    "created_at",  "serve"};

std::string iso_from_epoch(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string default_created_at() {
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    char* end = nullptr;
    const long long v = std::strtoll(sde, &end, 10);
    if (end && *end == '\0' && v >= 0) return iso_from_epoch(static_cast<std::time_t>(v));
  }
  return iso_from_epoch(0);
}

// Collects type violations instead of stopping at the first one.
struct Reader {
  const json& j;
  const fs::path& base;
  std::vector<std::string>& violations;

  void path(const char* key, fs::path& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) {
      violations.push_back(std::string(key) + ": expected a path string");
      return;
    }
    const fs::path p = j.at(key).get<std::string>();
    out = p.is_absolute() ? p : base / p;
  }
  void str(const char* key, std::string& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) {
      violations.push_back(std::string(key) + ": expected a string");
      return;
    }
    out = j.at(key).get<std::string>();
  }
  template <typename T>
  void count(const char* key, T& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      violations.push_back(std::string(key) + ": expected a non-negative integer");
      return;
    }
    out = v.get<T>();
  }
  void number(const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) {
      violations.push_back(std::string(key) + ": expected a number");
      return;
    }
    out = j.at(key).get<double>();
  }
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(ErrorCode::ConfigInvalid,
            [&] {
              std::string msg = "invalid configuration (" + std::to_string(violations.size()) + " violation" +
                                (violations.size() == 1 ? "" : "s") + ")";
              for (const auto& v : violations) msg += "\n  - " + v;
              return msg;
            }()),
      violations_(std::move(violations)) {}

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  c.base_dir = base_dir;
  c.cache_dir = base_dir / c.cache_dir;
  c.output_dir = base_dir / c.output_dir;
  std::vector<std::string> violations;
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});
  for (const auto& [k, v] : j.items())
    if (!kConfigKeys.count(k)) violations.push_back("unknown key '" + k + "'");

  Reader r{j, base_dir, violations};
  r.path("corpus", c.corpus);
  r.str("corpus_format", c.corpus_format);
  r.path("markers", c.markers);
  r.path("lexicons", c.lexicons);
  r.path("stopwords", c.stopwords);
  r.path("aliases", c.aliases);
  r.path("eras", c.eras);
  r.path("gazetteer", c.gazetteer);
  r.path("overrides", c.overrides);
  r.path("providers", c.providers);
  r.path("templates", c.templates);
  r.str("provider", c.provider);
  r.path("cache_dir", c.cache_dir);
  r.path("output_dir", c.output_dir);
  r.count("seed", c.seed);
  r.count("bins", c.bins);
  r.count("min_mentions", c.min_mentions);
  r.count("min_chars", c.min_chars);
  r.number("split_ratio", c.split_ratio);
  r.count("few_shot_k", c.few_shot_k);
  r.count("top_k_terms", c.top_k_terms);
  r.count("chunk_chars", c.chunk_chars);
  r.count("parallelism", c.parallelism);
  r.str("created_at", c.created_at);
  if (j.contains("directed_labels")) {
    if (!j.at("directed_labels").is_array()) {
      violations.push_back("directed_labels: expected an array of strings");
    } else {
      for (const auto& l : j.at("directed_labels")) {
        if (l.is_string()) {
          c.directed_labels.insert(l.get<std::string>());
        } else {
          violations.push_back("directed_labels: expected an array of strings");
          break;
        }
      }
    }
  }
  c.session_store = c.output_dir / c.session_store;
  if (j.contains("serve")) {
    const auto& s = j.at("serve");
    if (!s.is_object()) {
      violations.push_back("serve: expected an object");
    } else {
      Reader sr{s, base_dir, violations};
      sr.str("host", c.serve_host);
      sr.count("port", c.serve_port);
      sr.path("session_store", c.session_store);
    }
  }
  if (c.created_at.empty()) c.created_at = default_created_at();
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::string doc;
  try {
    doc = text::read_file(path);
  } catch (const Error&) {
    throw ConfigError({"config file not found: " + path.string()});
  }
  const json j = json::parse(doc, nullptr, false);
  if (j.is_discarded()) throw ConfigError({"config file is not valid JSON: " + path.string()});
  return from_json(j, fs::absolute(path).parent_path());
}

std::vector<std::string> validate_config(const PipelineConfig& c) {
  std::vector<std::string> v;
  auto need_file = [&](const char* key, const fs::path& p) {
    if (p.empty()) {
      v.push_back(std::string(key) + ": required");
    } else if (!fs::is_regular_file(p)) {
      v.push_back(std::string(key) + ": file not found: " + p.string());
    }
  };
  need_file("corpus", c.corpus);
  need_file("markers", c.markers);
  need_file("lexicons", c.lexicons);
  need_file("stopwords", c.stopwords);
  need_file("aliases", c.aliases);
  need_file("eras", c.eras);
  need_file("gazetteer", c.gazetteer);
  need_file("overrides", c.overrides);
  need_file("providers", c.providers);
  if (c.templates.empty()) {
    v.push_back("templates: required");
  } else if (!fs::is_directory(c.templates)) {
    v.push_back("templates: directory not found: " + c.templates.string());
  }

  if (c.corpus_format != "auto" && c.corpus_format != "plain-markers" && c.corpus_format != "structured")
    v.push_back("corpus_format: must be auto, plain-markers or structured");
  if (c.bins < 1) v.push_back("bins: must be at least 1");
  if (c.min_mentions < 1) v.push_back("min_mentions: must be at least 1");
  if (c.min_chars < 1) v.push_back("min_chars: must be at least 1");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) v.push_back("split_ratio: must lie strictly between 0 and 1");
  if (c.few_shot_k % 2 != 0) v.push_back("few_shot_k: must be even");
  if (c.top_k_terms < 1) v.push_back("top_k_terms: must be at least 1");
  if (c.chunk_chars < 1) v.push_back("chunk_chars: must be at least 1");
  if (c.parallelism < 1) v.push_back("parallelism: must be at least 1");
  if (c.serve_port < 0 || c.serve_port > 65535) v.push_back("serve.port: must be in 0..65535");

  if (fs::is_regular_file(c.providers)) {
    try {
      bool found = false;
      for (const auto& p : load_provider_configs(c.providers)) found = found || p.name == c.provider;
      if (!found) v.push_back("provider: '" + c.provider + "' is not defined in " + c.providers.string());
    } catch (const std::exception& e) {
      v.push_back(std::string("providers: ") + e.what());
    }
  }
  if (fs::is_directory(c.templates)) {
    try {
      TemplateRegistry reg;
      reg.load_directory(c.templates);
      for (auto id : {kEntityTemplate, kRelationTemplate, kClassifyTemplate})
        if (!reg.contains(std::string(id))) v.push_back("templates: missing template '" + std::string(id) + "'");
      if (reg.contains(std::string(kClassifyTemplate)) &&
          reg.get(std::string(kClassifyTemplate)).few_shot_slots != c.few_shot_k)
        v.push_back("few_shot_k: " + std::to_string(c.few_shot_k) + " does not match the classify template's " +
                    std::to_string(reg.get(std::string(kClassifyTemplate)).few_shot_slots) + " few-shot slots");
    } catch (const std::exception& e) {
      v.push_back(std::string("templates: ") + e.what());
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  auto violations = validate_config(config_);
  if (!violations.empty()) throw ConfigError(std::move(violations));
}

Pipeline::~Pipeline() = default;

Gateway& Pipeline::gateway() {
  if (!gateway_) {
    auto gw = std::make_shared<Gateway>(load_provider_configs(config_.providers), config_.cache_dir);
    gw->templates().load_directory(config_.templates);
    gw->set_default_provider(config_.provider);
    gateway_ = std::move(gw);
  }
  return *gateway_;
}

void Pipeline::set_gateway(std::shared_ptr<Gateway> gateway) { gateway_ = std::move(gateway); }

namespace {

Corpus load_configured_corpus(const PipelineConfig& c) {
  return load_corpus(c.corpus, parse_corpus_format(c.corpus_format), MarkerTable::load(c.markers));
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

template <typename T>
ordered_json json_array(const std::vector<T>& items) {
  ordered_json a = ordered_json::array();
  for (const auto& it : items) a.push_back(to_json(it));
  return a;
}

std::string read_stage_file(const fs::path& path, std::string_view producer) {
  if (!fs::is_regular_file(path))
    throw Error(ErrorCode::FileNotFound,
                path.string() + " is missing; run the " + std::string(producer) + " stage first");
  return text::read_file(path);
}

std::vector<Entity> read_entities(const fs::path& out) {
  std::vector<Entity> entities;
  for (const auto& e : json::parse(read_stage_file(out / "extract" / "entities.json", "extract")))
    entities.push_back(entity_from_json(e));
  return entities;
}

}  // namespace

std::vector<OutputFile> Pipeline::write_outputs(const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<OutputFile> out;
  for (const auto& [rel, bytes] : files) {
    text::write_file(config_.output_dir / rel, bytes);
    out.push_back({rel, sha256_hex(bytes), bytes.size()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

void Pipeline::update_manifest(Stage stage, const std::vector<OutputFile>& outputs) {
  const fs::path path = config_.output_dir / "manifest.json";
  json manifest = json::object();
  if (fs::is_regular_file(path)) {
    manifest = json::parse(text::read_file(path), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) manifest = json::object();
  }
  json files = json::array();
  for (const auto& f : outputs) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  manifest["stages"][std::string(to_string(stage))] = {{"outputs", files}};
  text::write_file(path, manifest.dump(2) + "\n");
}

void Pipeline::run(Stage stage) {
  const fs::path error_path = config_.output_dir / "error.json";
  std::error_code ec;
  fs::remove(error_path, ec);
  for (Stage s : expand_stage(stage)) {
    try {
      if (s == Stage::Serve) {
        serve();
        continue;
      }
      const auto outputs = run_stage(s);
      update_manifest(s, outputs);
      logger()->info("stage {} wrote {} files", to_string(s), outputs.size());
    } catch (const Error& e) {
      ordered_json report{{"stage", to_string(s)}, {"code", error_code_name(e.code())}, {"message", e.what()}};
      try {
        text::write_file(error_path, dump(report));
      } catch (const Error&) {
      }
      throw Error(ErrorCode::StageFailure, "stage " + std::string(to_string(s)) + " failed: " +
                                               std::string(error_code_name(e.code())) + ": " + e.what());
    } catch (const std::exception& e) {
      ordered_json report{{"stage", to_string(s)}, {"code", "internal-error"}, {"message", e.what()}};
      try {
        text::write_file(error_path, dump(report));
      } catch (const Error&) {
      }
      throw Error(ErrorCode::StageFailure, "stage " + std::string(to_string(s)) + " failed: " + e.what());
    }
  }
}

std::vector<OutputFile> Pipeline::run_stage(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return ingest();
    case Stage::Themes: return themes();
    case Stage::Extract: return extract();
    case Stage::Graph: return graph();
    case Stage::Geo: return geo();
    case Stage::Dataset: return dataset();
    case Stage::ClassifyEval: return classify_eval();
    case Stage::Serve:
    case Stage::All: break;
  }
  throw Error(ErrorCode::InvalidArgument, "stage " + std::string(to_string(stage)) + " has no outputs");
}

std::vector<OutputFile> Pipeline::ingest() {
  const Corpus corpus = load_configured_corpus(config_);
  std::error_code ec;
  fs::remove_all(config_.output_dir / "ingest", ec);
  return write_outputs({{"ingest/corpus.json", serialize_corpus(corpus)},
                        {"ingest/stats.json", dump(corpus_stats(corpus).to_json())}});
}

std::vector<OutputFile> Pipeline::themes() {
  const Corpus corpus = load_configured_corpus(config_);
  const auto lexicons = load_lexicons(config_.lexicons);
  const auto stopwords = load_stopwords(config_.stopwords);
  validate_lexicons(lexicons, stopwords);
  const auto reports = theme_frequency(corpus, lexicons, stopwords, config_.bins);

  ordered_json all = ordered_json::array();
  std::string keywords = csv::format_row({"theme", "keyword", "count"});
  std::string histogram = csv::format_row({"theme", "bin", "start", "end", "count"});
  std::string lines = csv::format_row({"theme", "line_count", "total_count"});
  for (const auto& r : reports) {
    const std::string theme(to_string(r.theme));
    all.push_back(r.to_json());
    for (const auto& [kw, n] : r.per_keyword) keywords += csv::format_row({theme, kw, std::to_string(n)});
    for (std::size_t b = 0; b < r.distribution.size(); ++b) {
      const auto& bin = r.distribution[b];
      histogram += csv::format_row({theme, std::to_string(b), ordered_json(bin.start).dump(),
                                    ordered_json(bin.end).dump(), std::to_string(bin.count)});
    }
    lines += csv::format_row({theme, std::to_string(r.line_count), std::to_string(r.total_count)});
  }
  std::string terms = csv::format_row({"rank", "term", "count"});
  std::size_t rank = 0;
  for (const auto& [term, n] : term_frequency(corpus, stopwords, config_.top_k_terms))
    terms += csv::format_row({std::to_string(++rank), term, std::to_string(n)});

  std::error_code ec;
  fs::remove_all(config_.output_dir / "themes", ec);
  return write_outputs({{"themes/reports.json", dump(all)},
                        {"themes/keywords.csv", keywords},
                        {"themes/histogram.csv", histogram},
                        {"themes/lines.csv", lines},
                        {"themes/terms.csv", terms}});
}

std::vector<OutputFile> Pipeline::extract() {
  const Corpus corpus = load_configured_corpus(config_);
  const AliasTable aliases = AliasTable::load(config_.aliases);
  const EraTable eras = EraTable::load(config_.eras);
  Gateway& gw = gateway();
  const auto chapters = extract_corpus(corpus, gw, aliases, std::string(kEntityTemplate),
                                       std::string(kRelationTemplate), config_.chunk_chars, config_.parallelism);

  std::vector<std::pair<std::string, std::string>> files;
  std::vector<Mention> mentions;
  std::map<std::tuple<std::string, std::string, std::string>, Relation> merged;
  std::size_t failed = 0;
  for (const auto& ch : chapters) {
    ordered_json cj;
    cj["chapter_index"] = ch.chapter_index;
    cj["mentions"] = json_array(ch.mentions);
    cj["relations"] = json_array(ch.relations);
    cj["error"] = ch.error ? ordered_json(*ch.error) : ordered_json(nullptr);
    char name[32];
    std::snprintf(name, sizeof name, "extract/chapters/ch-%03d.json", ch.chapter_index);
    files.emplace_back(name, dump(cj));
    if (ch.error) ++failed;
    mentions.insert(mentions.end(), ch.mentions.begin(), ch.mentions.end());
    for (const auto& r : ch.relations) {
      auto [it, inserted] = merged.try_emplace({r.source, r.target, r.label}, r);
      if (!inserted) it->second.weight += r.weight;
    }
  }
  if (!chapters.empty() && failed == chapters.size())
    throw Error(ErrorCode::ProviderError, "extraction failed for every chapter; first error: " + *chapters[0].error);

  std::sort(mentions.begin(), mentions.end());
  auto entities = resolve_kind_conflicts(normalize(mentions, aliases));
  assign_eras(entities, eras);
  std::vector<Relation> relations;
  for (auto& [k, r] : merged) relations.push_back(std::move(r));

  std::string review = csv::format_row({"canonical_name", "kind", "mention_count"});
  for (const auto& e : entities)
    if (e.needs_review)
      review += csv::format_row({e.canonical_name, std::string(to_string(e.kind)), std::to_string(e.mention_count)});
  std::string era_csv = csv::format_row({"era", "mentions"});
  for (const auto& [era, n] : era_histogram(entities, eras, config_.min_mentions))
    era_csv += csv::format_row({era, std::to_string(n)});

  files.emplace_back("extract/mentions.json", dump(json_array(mentions)));
  files.emplace_back("extract/entities.json", dump(json_array(entities)));
  files.emplace_back("extract/relations.json", dump(json_array(relations)));
  files.emplace_back("extract/review.csv", review);
  files.emplace_back("extract/eras.csv", era_csv);
  std::error_code ec;
  fs::remove_all(config_.output_dir / "extract", ec);
  return write_outputs(files);
}

std::vector<OutputFile> Pipeline::graph() {
  const auto entities = read_entities(config_.output_dir);
  std::vector<Relation> relations;
  for (const auto& r : json::parse(read_stage_file(config_.output_dir / "extract" / "relations.json", "extract")))
    relations.push_back(relation_from_json(r));
  const Corpus corpus = load_configured_corpus(config_);

  GraphOptions opts;
  opts.directed_labels = config_.directed_labels;
  opts.metadata.corpus_id = corpus.id;
  opts.metadata.created_at = config_.created_at;
  const auto g = build_graph(entities, relations, opts);
  std::error_code ec;
  fs::remove_all(config_.output_dir / "graph", ec);
  return write_outputs({{"graph/graph.gexf", export_graph(g, GraphFormat::Gexf)},
                        {"graph/graph.graphml", export_graph(g, GraphFormat::GraphMl)},
                        {"graph/graph.json", export_graph(g, GraphFormat::Json)}});
}

std::vector<OutputFile> Pipeline::geo() {
  const auto entities = read_entities(config_.output_dir);
  const auto result = geocode(entities, load_gazetteer(config_.gazetteer), load_gazetteer(config_.overrides));
  std::error_code ec;
  fs::remove_all(config_.output_dir / "geo", ec);
  return write_outputs({{"geo/places.geojson", export_geojson(result.records)},
                        {"geo/unresolved.csv", export_unresolved_csv(result.unresolved)}});
}

std::vector<OutputFile> Pipeline::dataset() {
  const Corpus corpus = load_configured_corpus(config_);
  const auto statements = build_dataset(corpus, config_.min_chars);
  const auto stats = dataset_stats(statements);
  std::vector<std::pair<std::string, std::string>> files = {
      {"dataset/statements.jsonl", export_jsonl(statements)},
      {"dataset/stats.json", dump(stats.to_json())},
  };
  if (stats.n_confucian >= 2 && stats.n_legalist >= 2) {
    const auto [train, eval] = split(statements, config_.split_ratio, config_.seed);
    files.emplace_back("dataset/train.jsonl", export_jsonl(train));
    files.emplace_back("dataset/eval.jsonl", export_jsonl(eval));
  } else {
    logger()->warn("dataset has fewer than 2 statements for a label; train/eval split skipped");
  }
  std::error_code ec;
  fs::remove_all(config_.output_dir / "dataset", ec);
  return write_outputs(files);
}

std::vector<OutputFile> Pipeline::classify_eval() {
  const auto train = load_jsonl(config_.output_dir / "dataset" / "train.jsonl");
  const auto eval = load_jsonl(config_.output_dir / "dataset" / "eval.jsonl");
  const auto report = evaluate(eval, train, gateway(), std::string(kClassifyTemplate), config_.few_shot_k,
                               config_.seed, config_.parallelism);
  std::error_code ec;
  fs::remove_all(config_.output_dir / "classify", ec);
  return write_outputs({{"classify/report.json", dump(report.to_json())}, {"classify/report.csv", report.to_csv()}});
}

void Pipeline::serve() {
  TutorOptions opts;
  opts.dataset_dir = config_.output_dir / "dataset";
  opts.store_path = config_.session_store;
  opts.few_shot_k = config_.few_shot_k;
  opts.few_shot_seed = config_.seed;
  opts.graph_path = config_.output_dir / "graph" / "graph.json";
  opts.map_path = config_.output_dir / "geo" / "places.geojson";
  TutorService service(gateway(), opts);
  TutorServer server(service);
  int port = config_.serve_port;
  if (port == 0) {
    port = server.bind_any(config_.serve_host);
    if (port < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + config_.serve_host);
  }
  logger()->info("tutor service listening on http://{}:{}", config_.serve_host, port);
  if (on_serving) on_serving(port);
  const bool ok = config_.serve_port == 0 ? server.serve() : server.listen(config_.serve_host, port);
  if (!ok) throw Error(ErrorCode::IoFailure, "cannot listen on " + config_.serve_host + ":" + std::to_string(port));
}

}  // namespace histolens
