#include "histolens/kgraph.hpp"

#include <expat.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "histolens/errors.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

GraphFormat parse_graph_format(std::string_view s) {
  if (s == "gexf") return GraphFormat::Gexf;
  if (s == "graphml") return GraphFormat::GraphMl;
  if (s == "json" || s == "generic-structured") return GraphFormat::Json;
  throw Error(ErrorCode::InvalidArgument, "unknown graph format '" + std::string(s) + "'");
}

KnowledgeGraph build_graph(const std::vector<Entity>& entities, const std::vector<Relation>& relations,
                           const GraphOptions& options) {
  KnowledgeGraph g;
  g.metadata = options.metadata;

  std::map<std::string, GraphNode> nodes;
  for (const auto& e : entities) {
    auto [it, inserted] = nodes.try_emplace(e.canonical_name, GraphNode{e.canonical_name, e.kind, 0});
    if (!inserted && it->second.kind != e.kind)
      throw Error(ErrorCode::DuplicateNode, "entity '" + e.canonical_name + "' appears as both person and place");
    it->second.mention_count += e.mention_count;
  }

  std::map<std::tuple<std::string, std::string, std::string>, GraphEdge> edges;
  for (const auto& r : relations) {
    for (const auto* endpoint : {&r.source, &r.target})
      if (!nodes.count(*endpoint))
        throw Error(ErrorCode::DanglingEndpoint,
                    "relation " + r.source + " -[" + r.label + "]-> " + r.target + " names unknown entity '" +
                        *endpoint + "'");
    if (r.source == r.target) throw Error(ErrorCode::InvalidArgument, "self-loop on '" + r.source + "'");
    const bool directed = options.directed_labels.count(r.label) > 0;
    std::string s = r.source;
    std::string t = r.target;
    if (!directed && t < s) std::swap(s, t);
    auto [it, inserted] = edges.try_emplace({s, t, r.label}, GraphEdge{s, t, r.label, 0, directed});
    it->second.weight += r.weight;
  }

  for (auto& [name, n] : nodes) g.nodes.push_back(std::move(n));
  for (auto& [key, e] : edges) g.edges.push_back(std::move(e));
  return g;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string date_part(const std::string& ts) {
  if (ts.size() >= 10 && ts[4] == '-' && ts[7] == '-') return ts.substr(0, 10);
  return "";
}

std::string export_gexf(const KnowledgeGraph& g) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i].name] = i;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<gexf xmlns=\"http://www.gexf.net/1.2draft\" xmlns:viz=\"http://www.gexf.net/1.2draft/viz\" "
         "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
         "xsi:schemaLocation=\"http://www.gexf.net/1.2draft http://www.gexf.net/1.2draft/gexf.xsd\" "
         "version=\"1.2\">\n";
  const std::string date = date_part(g.metadata.created_at);
  out += "  <meta";
  if (!date.empty()) out += " lastmodifieddate=\"" + date + "\"";
  out += ">\n";
  out += "    <creator>" + xml_escape(g.metadata.pipeline_version) + "</creator>\n";
  out += "    <keywords>" + xml_escape(g.metadata.created_at) + "</keywords>\n";
  out += "    <description>" + xml_escape(g.metadata.corpus_id) + "</description>\n";
  out += "  </meta>\n";
  out += "  <graph mode=\"static\" defaultedgetype=\"undirected\">\n";
  out += "    <attributes class=\"node\" mode=\"static\">\n";
  out += "      <attribute id=\"0\" title=\"kind\" type=\"string\"/>\n";
  out += "      <attribute id=\"1\" title=\"mention_count\" type=\"integer\"/>\n";
  out += "    </attributes>\n";
  out += "    <nodes>\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    out += "      <node id=\"n" + std::to_string(i) + "\" label=\"" + xml_escape(n.name) + "\">\n";
    out += "        <attvalues>\n";
    out += "          <attvalue for=\"0\" value=\"" + std::string(to_string(n.kind)) + "\"/>\n";
    out += "          <attvalue for=\"1\" value=\"" + std::to_string(n.mention_count) + "\"/>\n";
    out += "        </attvalues>\n";
    out += "        <viz:size value=\"" + std::to_string(n.mention_count) + "\"/>\n";
    out += "      </node>\n";
  }
  out += "    </nodes>\n";
  out += "    <edges>\n";
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    out += "      <edge id=\"e" + std::to_string(i) + "\" source=\"n" + std::to_string(index.at(e.source)) +
           "\" target=\"n" + std::to_string(index.at(e.target)) + "\" type=\"" +
           (e.directed ? "directed" : "undirected") + "\" label=\"" + xml_escape(e.label) + "\" weight=\"" +
           std::to_string(e.weight) + "\"/>\n";
  }
  out += "    </edges>\n";
  out += "  </graph>\n";
  out += "</gexf>\n";
  return out;
}

std::string export_graphml(const KnowledgeGraph& g) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index[g.nodes[i].name] = i;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
         "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
         "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
         "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n";
  out += "  <key id=\"g0\" for=\"graph\" attr.name=\"corpus_id\" attr.type=\"string\"/>\n";
  out += "  <key id=\"g1\" for=\"graph\" attr.name=\"created_at\" attr.type=\"string\"/>\n";
  out += "  <key id=\"g2\" for=\"graph\" attr.name=\"pipeline_version\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d0\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d1\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d2\" for=\"node\" attr.name=\"mention_count\" attr.type=\"int\"/>\n";
  out += "  <key id=\"d3\" for=\"node\" attr.name=\"size\" attr.type=\"int\"/>\n";
  out += "  <key id=\"d4\" for=\"edge\" attr.name=\"label\" attr.type=\"string\"/>\n";
  out += "  <key id=\"d5\" for=\"edge\" attr.name=\"weight\" attr.type=\"int\"/>\n";
  out += "  <graph id=\"G\" edgedefault=\"undirected\">\n";
  out += "    <data key=\"g0\">" + xml_escape(g.metadata.corpus_id) + "</data>\n";
  out += "    <data key=\"g1\">" + xml_escape(g.metadata.created_at) + "</data>\n";
  out += "    <data key=\"g2\">" + xml_escape(g.metadata.pipeline_version) + "</data>\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    out += "    <node id=\"n" + std::to_string(i) + "\">\n";
    out += "      <data key=\"d0\">" + xml_escape(n.name) + "</data>\n";
    out += "      <data key=\"d1\">" + std::string(to_string(n.kind)) + "</data>\n";
    out += "      <data key=\"d2\">" + std::to_string(n.mention_count) + "</data>\n";
    out += "      <data key=\"d3\">" + std::to_string(n.mention_count) + "</data>\n";
    out += "    </node>\n";
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    out += "    <edge id=\"e" + std::to_string(i) + "\" source=\"n" + std::to_string(index.at(e.source)) +
           "\" target=\"n" + std::to_string(index.at(e.target)) + "\"" + (e.directed ? " directed=\"true\"" : "") +
           ">\n";
    out += "      <data key=\"d4\">" + xml_escape(e.label) + "</data>\n";
    out += "      <data key=\"d5\">" + std::to_string(e.weight) + "</data>\n";
    out += "    </edge>\n";
  }
  out += "  </graph>\n";
  out += "</graphml>\n";
  return out;
}

std::string export_json(const KnowledgeGraph& g) {
  ordered_json j;
  j["metadata"] = {{"corpus_id", g.metadata.corpus_id},
                   {"created_at", g.metadata.created_at},
                   {"pipeline_version", g.metadata.pipeline_version}};
  j["nodes"] = ordered_json::array();
  for (const auto& n : g.nodes)
    j["nodes"].push_back(ordered_json{{"id", n.name},
                                      {"kind", to_string(n.kind)},
                                      {"mention_count", n.mention_count},
                                      {"size", n.mention_count}});
  j["edges"] = ordered_json::array();
  for (const auto& e : g.edges)
    j["edges"].push_back(ordered_json{{"source", e.source},
                                      {"target", e.target},
                                      {"label", e.label},
                                      {"weight", e.weight},
                                      {"directed", e.directed}});
  return j.dump(2) + "\n";
}

}  // namespace

std::string export_graph(const KnowledgeGraph& graph, GraphFormat format) {
  switch (format) {
    case GraphFormat::Gexf: return export_gexf(graph);
    case GraphFormat::GraphMl: return export_graphml(graph);
    case GraphFormat::Json: return export_json(graph);
  }
  return {};
}

void write_graph(const KnowledgeGraph& graph, GraphFormat format, const std::filesystem::path& path) {
  text::write_file(path, export_graph(graph, format));
}

// ---------------------------------------------------------------------------
// Import

namespace {

struct XmlElement {
  std::string name;  // local name, namespace prefix stripped
  std::map<std::string, std::string> attrs;
  std::vector<std::unique_ptr<XmlElement>> children;
  std::string text;

  const std::string* attr(const std::string& key) const {
    auto it = attrs.find(key);
    return it == attrs.end() ? nullptr : &it->second;
  }
  std::vector<const XmlElement*> all(const std::string& local) const {
    std::vector<const XmlElement*> out;
    for (const auto& c : children)
      if (c->name == local) out.push_back(c.get());
    return out;
  }
  const XmlElement* first(const std::string& local) const {
    for (const auto& c : children)
      if (c->name == local) return c.get();
    return nullptr;
  }
};

std::string local_name(const char* qname) {
  std::string s(qname);
  // Expat namespace mode reports "uri|local".
  const auto bar = s.rfind('|');
  if (bar != std::string::npos) return s.substr(bar + 1);
  const auto colon = s.rfind(':');
  return colon == std::string::npos ? s : s.substr(colon + 1);
}

struct DomBuilder {
  std::unique_ptr<XmlElement> root;
  std::vector<XmlElement*> stack;
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
  auto* b = static_cast<DomBuilder*>(data);
  auto el = std::make_unique<XmlElement>();
  el->name = local_name(name);
  for (int i = 0; attrs[i]; i += 2) el->attrs[local_name(attrs[i])] = attrs[i + 1];
  XmlElement* raw = el.get();
  if (b->stack.empty()) {
    b->root = std::move(el);
  } else {
    b->stack.back()->children.push_back(std::move(el));
  }
  b->stack.push_back(raw);
}

void XMLCALL on_end(void* data, const XML_Char*) { static_cast<DomBuilder*>(data)->stack.pop_back(); }

void XMLCALL on_text(void* data, const XML_Char* s, int len) {
  auto* b = static_cast<DomBuilder*>(data);
  if (!b->stack.empty()) b->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

std::unique_ptr<XmlElement> parse_xml(std::string_view bytes) {
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreateNS("UTF-8", '|'),
                                                                       XML_ParserFree);
  DomBuilder builder;
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);
  if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw ParseError("<xml>", XML_GetCurrentLineNumber(parser.get()),
                     XML_ErrorString(XML_GetErrorCode(parser.get())));
  }
  if (!builder.root) throw ParseError("<xml>", 0, "empty document");
  return std::move(builder.root);
}

std::size_t parse_count(const std::string& s) {
  const double v = std::stod(s);
  if (v < 0 || std::floor(v) != v) throw Error(ErrorCode::MalformedStructure, "expected a non-negative integer, got " + s);
  return static_cast<std::size_t>(v);
}

void finalize(KnowledgeGraph& g) {
  std::sort(g.nodes.begin(), g.nodes.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  std::sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.source, a.target, a.label) < std::tie(b.source, b.target, b.label);
  });
}

KnowledgeGraph import_gexf(std::string_view bytes) {
  const auto root = parse_xml(bytes);
  if (root->name != "gexf") throw ParseError("<gexf>", 0, "root element is not <gexf>");
  KnowledgeGraph g;
  if (const auto* meta = root->first("meta")) {
    if (const auto* c = meta->first("creator")) g.metadata.pipeline_version = c->text;
    if (const auto* k = meta->first("keywords")) g.metadata.created_at = k->text;
    if (const auto* d = meta->first("description")) g.metadata.corpus_id = d->text;
  }
  const auto* graph = root->first("graph");
  if (!graph) throw ParseError("<gexf>", 0, "missing <graph>");
  const std::string default_type = graph->attr("defaultedgetype") ? *graph->attr("defaultedgetype") : "undirected";

  std::map<std::string, std::string> attr_title;  // id -> title
  for (const auto* attrs : graph->all("attributes"))
    for (const auto* a : attrs->all("attribute"))
      if (a->attr("id") && a->attr("title")) attr_title[*a->attr("id")] = *a->attr("title");

  std::map<std::string, std::string> id_to_name;
  if (const auto* nodes = graph->first("nodes")) {
    for (const auto* n : nodes->all("node")) {
      GraphNode node;
      const std::string id = n->attr("id") ? *n->attr("id") : "";
      node.name = n->attr("label") ? *n->attr("label") : id;
      if (const auto* av = n->first("attvalues")) {
        for (const auto* v : av->all("attvalue")) {
          if (!v->attr("for") || !v->attr("value")) continue;
          const auto title = attr_title.count(*v->attr("for")) ? attr_title[*v->attr("for")] : *v->attr("for");
          if (title == "kind") node.kind = parse_entity_kind(*v->attr("value"));
          if (title == "mention_count") node.mention_count = parse_count(*v->attr("value"));
        }
      }
      id_to_name[id] = node.name;
      g.nodes.push_back(std::move(node));
    }
  }
  if (const auto* edges = graph->first("edges")) {
    for (const auto* e : edges->all("edge")) {
      GraphEdge edge;
      edge.source = id_to_name.at(*e->attr("source"));
      edge.target = id_to_name.at(*e->attr("target"));
      edge.label = e->attr("label") ? *e->attr("label") : "";
      edge.weight = e->attr("weight") ? parse_count(*e->attr("weight")) : 1;
      edge.directed = (e->attr("type") ? *e->attr("type") : default_type) == "directed";
      g.edges.push_back(std::move(edge));
    }
  }
  finalize(g);
  return g;
}

KnowledgeGraph import_graphml(std::string_view bytes) {
  const auto root = parse_xml(bytes);
  if (root->name != "graphml") throw ParseError("<graphml>", 0, "root element is not <graphml>");
  std::map<std::string, std::string> key_name;
  for (const auto* k : root->all("key"))
    if (k->attr("id") && k->attr("attr.name")) key_name[*k->attr("id")] = *k->attr("attr.name");

  const auto* graph = root->first("graph");
  if (!graph) throw ParseError("<graphml>", 0, "missing <graph>");
  const bool default_directed = graph->attr("edgedefault") && *graph->attr("edgedefault") == "directed";

  auto data_of = [&](const XmlElement* el) {
    std::map<std::string, std::string> out;
    for (const auto* d : el->all("data"))
      if (d->attr("key")) out[key_name.count(*d->attr("key")) ? key_name[*d->attr("key")] : *d->attr("key")] = d->text;
    return out;
  };

  KnowledgeGraph g;
  auto gd = data_of(graph);
  g.metadata.corpus_id = gd["corpus_id"];
  g.metadata.created_at = gd["created_at"];
  g.metadata.pipeline_version = gd["pipeline_version"];

  std::map<std::string, std::string> id_to_name;
  for (const auto* n : graph->all("node")) {
    auto d = data_of(n);
    GraphNode node;
    const std::string id = *n->attr("id");
    node.name = d.count("name") ? d["name"] : id;
    if (d.count("kind")) node.kind = parse_entity_kind(d["kind"]);
    if (d.count("mention_count")) node.mention_count = parse_count(d["mention_count"]);
    id_to_name[id] = node.name;
    g.nodes.push_back(std::move(node));
  }
  for (const auto* e : graph->all("edge")) {
    auto d = data_of(e);
    GraphEdge edge;
    edge.source = id_to_name.at(*e->attr("source"));
    edge.target = id_to_name.at(*e->attr("target"));
    edge.label = d["label"];
    edge.weight = d.count("weight") ? parse_count(d["weight"]) : 1;
    edge.directed = e->attr("directed") ? *e->attr("directed") == "true" : default_directed;
    g.edges.push_back(std::move(edge));
  }
  finalize(g);
  return g;
}

KnowledgeGraph import_json(std::string_view bytes) {
  const json j = json::parse(bytes);
  KnowledgeGraph g;
  const auto& m = j.at("metadata");
  g.metadata = GraphMetadata{m.value("corpus_id", ""), m.value("created_at", ""), m.value("pipeline_version", "")};
  for (const auto& n : j.at("nodes"))
    g.nodes.push_back(GraphNode{n.at("id").get<std::string>(), parse_entity_kind(n.at("kind").get<std::string>()),
                                n.at("mention_count").get<std::size_t>()});
  for (const auto& e : j.at("edges"))
    g.edges.push_back(GraphEdge{e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                                e.at("label").get<std::string>(), e.at("weight").get<std::size_t>(),
                                e.value("directed", false)});
  finalize(g);
  return g;
}

}  // namespace

KnowledgeGraph import_graph(std::string_view bytes, GraphFormat format) {
  try {
    switch (format) {
      case GraphFormat::Gexf: return import_gexf(bytes);
      case GraphFormat::GraphMl: return import_graphml(bytes);
      case GraphFormat::Json: return import_json(bytes);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::MalformedStructure, std::string("graph import failed: ") + e.what());
  }
  return {};
}

}  // namespace histolens
