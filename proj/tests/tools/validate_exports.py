#!/usr/bin/env python3
"""Validate graph and map exports with tools independent of the C++ code.

GEXF and GraphML files are checked against the XSDs in tests/schemas with lxml
and re-imported with networkx; GeoJSON is checked structurally.
Exit status is 0 only when every supplied file passes.
"""

import argparse
import io
import json
import pathlib
import sys

from lxml import etree
import networkx as nx

SCHEMAS = pathlib.Path(__file__).resolve().parent.parent / "schemas"


def validate_xml(path, schema_name):
    schema = etree.XMLSchema(etree.parse(str(SCHEMAS / schema_name)))
    doc = etree.parse(str(path))
    if not schema.validate(doc):
        return [f"{path}: {e.line}: {e.message}" for e in schema.error_log]
    return []


def check_counts(graph, path, nodes, edges):
    problems = []
    if nodes is not None and graph.number_of_nodes() != nodes:
        problems.append(f"{path}: networkx read {graph.number_of_nodes()} nodes, expected {nodes}")
    if edges is not None and graph.number_of_edges() != edges:
        problems.append(f"{path}: networkx read {graph.number_of_edges()} edges, expected {edges}")
    return problems


def strip_edge_direction(path, attribute):
    """networkx rejects graphs mixing directed and undirected edges, which both
    formats allow, so it reads a copy without per-edge direction markers.
    Returns the copy and the number of edges that carried a directed marker."""
    doc = etree.parse(str(path))
    directed = 0
    for edge in doc.iter("{*}edge"):
        value = edge.attrib.pop(attribute, None)
        if value in ("directed", "true"):
            directed += 1
    return io.BytesIO(etree.tostring(doc)), directed


def check_directed(path, found, expected):
    if expected is not None and found != expected:
        return [f"{path}: {found} directed edges, expected {expected}"]
    return []


def check_gexf(path, nodes, edges, directed):
    problems = validate_xml(path, "gexf.xsd")
    copy, found = strip_edge_direction(path, "type")
    try:
        g = nx.read_gexf(copy)
    except Exception as e:  # noqa: BLE001
        return problems + [f"{path}: networkx could not read: {e}"]
    return problems + check_counts(g, path, nodes, edges) + check_directed(path, found, directed)


def check_graphml(path, nodes, edges, directed):
    problems = validate_xml(path, "graphml.xsd")
    copy, found = strip_edge_direction(path, "directed")
    try:
        g = nx.read_graphml(copy)
    except Exception as e:  # noqa: BLE001
        return problems + [f"{path}: networkx could not read: {e}"]
    return problems + check_counts(g, path, nodes, edges) + check_directed(path, found, directed)


def check_geojson(path, features):
    problems = []
    try:
        doc = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
    except ValueError as e:
        return [f"{path}: not JSON: {e}"]
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        return [f"{path}: not a FeatureCollection"]
    for i, f in enumerate(doc["features"]):
        where = f"{path}: feature {i}"
        if f.get("type") != "Feature":
            problems.append(f"{where}: type is not Feature")
            continue
        geom = f.get("geometry") or {}
        coords = geom.get("coordinates")
        if geom.get("type") != "Point" or not isinstance(coords, list) or len(coords) != 2:
            problems.append(f"{where}: geometry is not a 2D Point")
            continue
        lon, lat = coords
        if not (-180 <= lon <= 180 and -90 <= lat <= 90):
            problems.append(f"{where}: coordinates out of range {coords}")
        if not isinstance(f.get("properties"), dict) or "name" not in f["properties"]:
            problems.append(f"{where}: properties.name missing")
    if features is not None and len(doc["features"]) != features:
        problems.append(f"{path}: {len(doc['features'])} features, expected {features}")
    return problems


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gexf")
    ap.add_argument("--graphml")
    ap.add_argument("--geojson")
    ap.add_argument("--nodes", type=int)
    ap.add_argument("--edges", type=int)
    ap.add_argument("--directed", type=int)
    ap.add_argument("--features", type=int)
    args = ap.parse_args()

    problems = []
    if args.gexf:
        problems += check_gexf(args.gexf, args.nodes, args.edges, args.directed)
    if args.graphml:
        problems += check_graphml(args.graphml, args.nodes, args.edges, args.directed)
    if args.geojson:
        problems += check_geojson(args.geojson, args.features)
    for p in problems:
        print(p, file=sys.stderr)
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
