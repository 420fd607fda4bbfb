#include <gtest/gtest.h>

#include "ldm/error.hpp"
#include "ldm/graph_store.hpp"
#include "ldm/road_graph.hpp"
#include "support/oracles.hpp"

namespace ldm {
namespace {

const char* kThreeNodes = R"(<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6">
  <node id="1" lat="48.0000" lon="11.0000"/>
  <node id="2" lat="48.0010" lon="11.0000"/>
  <node id="3" lat="48.0020" lon="11.0000"/>
  <node id="4" lat="48.0030" lon="11.0100"/>
  <way id="10">
    <nd ref="1"/><nd ref="2"/><nd ref="3"/>
    <tag k="highway" v="residential"/>
    <tag k="name" v="Main Street"/>
  </way>
  <way id="11">
    <nd ref="3"/><nd ref="4"/>
    <tag k="building" v="yes"/>
  </way>
</osm>)";

TEST(ParseOsm, HighwayWayAndItsNodes) {
  const auto r = parse_osm(std::string_view(kThreeNodes));
  EXPECT_EQ(r.graph.nodes().size(), 3u);
  EXPECT_EQ(r.graph.ways().size(), 1u);
  EXPECT_TRUE(r.warnings.empty());
  // Two undirected segments: node 2 has both neighbours, 1 and 3 one each.
  EXPECT_EQ(r.graph.edges_from(1).size(), 1u);
  EXPECT_EQ(r.graph.edges_from(2).size(), 2u);
  EXPECT_EQ(r.graph.edges_from(3).size(), 1u);
  EXPECT_EQ(r.graph.segment_count(), 2u);
  EXPECT_EQ(r.graph.ways().at(10).tags.at("name"), "Main Street");
}

TEST(ParseOsm, NonHighwayNodesExcluded) {
  const auto r = parse_osm(std::string_view(kThreeNodes));
  EXPECT_EQ(r.graph.find_node(4), nullptr);
  EXPECT_NE(r.graph.find_node(3), nullptr);
}

TEST(ParseOsm, DanglingRefDropsWayWithWarning) {
  const auto r = parse_osm(std::string_view(R"(<osm>
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/>
  <way id="5"><nd ref="1"/><nd ref="99"/><tag k="highway" v="primary"/></way>
  <way id="6"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way>
</osm>)"));
  EXPECT_EQ(r.graph.ways().size(), 1u);
  EXPECT_TRUE(r.graph.ways().contains(6));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("DanglingNodeRef"), std::string::npos);
  EXPECT_NE(r.warnings[0].find("99"), std::string::npos);
}

TEST(ParseOsm, MalformedXmlReportsLine) {
  try {
    parse_osm(std::string_view("<osm>\n<node id=\"1\" lat=\"0\" lon=\"0\">\n</osm>"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedDocument);
    EXPECT_NE(e.message().find("line"), std::string::npos);
  }
}

TEST(ParseOsm, BadCoordinatesRejected) {
  EXPECT_THROW(parse_osm(std::string_view(R"(<osm><node id="1" lat="91" lon="0"/></osm>)")), Error);
  EXPECT_THROW(parse_osm(std::string_view(R"(<osm><node id="1" lat="x" lon="0"/></osm>)")), Error);
}

TEST(ParseOsm, OnewayAndReverse) {
  const auto r = parse_osm(std::string_view(R"(<osm>
  <node id="1" lat="0" lon="0"/><node id="2" lat="0" lon="0.001"/><node id="3" lat="0" lon="0.002"/>
  <way id="7"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/><tag k="oneway" v="yes"/></way>
  <way id="8"><nd ref="2"/><nd ref="3"/><tag k="highway" v="primary"/><tag k="oneway" v="-1"/></way>
</osm>)"));
  EXPECT_TRUE(r.graph.ways().at(7).oneway);
  EXPECT_EQ(r.graph.ways().at(8).node_refs, (std::vector<OsmId>{3, 2}));
  EXPECT_EQ(r.graph.edges_from(1).size(), 1u);
  // 2 -> 1 is forbidden, 2 -> 3 is forbidden after reversal.
  EXPECT_TRUE(r.graph.edges_from(2).empty());
  ASSERT_EQ(r.graph.edges_from(3).size(), 1u);
  EXPECT_EQ(r.graph.edges_from(3)[0].neighbor, 2);
}

TEST(ParseOsm, StreamAndStringAgree) {
  std::istringstream in(kThreeNodes);
  EXPECT_EQ(parse_osm(in).graph, parse_osm(std::string_view(kThreeNodes)).graph);
}

TEST(RoadGraphProperty, EdgeLengthsSumToPolylineLength) {
  testing::Rng rng(31);
  const auto g = testing::random_road_graph(rng, {45.0, 7.0, 0}, 6, 7, 120.0);
  for (const auto& [wid, w] : g.ways()) {
    double poly = 0, edges = 0;
    for (std::size_t i = 0; i + 1 < w.node_refs.size(); ++i) {
      poly += geo::haversine_m(g.nodes().at(w.node_refs[i]).position, g.nodes().at(w.node_refs[i + 1]).position);
      for (const auto& e : g.edges_from(w.node_refs[i])) {
        if (e.way == wid && e.neighbor == w.node_refs[i + 1]) edges += e.length_m;
      }
    }
    EXPECT_NEAR(edges, poly, 1e-6 * poly);
  }
}

TEST(RoadGraphProperty, AdjacencySymmetricUnlessOneway) {
  testing::Rng rng(32);
  const auto g = testing::random_road_graph(rng, {45.0, 7.0, 0}, 8, 8, 100.0);
  for (const auto& [from, edges] : g.adjacency()) {
    for (const auto& e : edges) {
      const auto& back = g.edges_from(e.neighbor);
      const bool reverse = std::any_of(back.begin(), back.end(), [&](const RoadEdge& b) {
        return b.neighbor == from && b.way == e.way;
      });
      EXPECT_EQ(reverse, !g.ways().at(e.way).oneway);
    }
  }
}

TEST(LoadIntoStore, CountsAndRelations) {
  GraphStore s;
  const auto r = parse_osm(std::string_view(kThreeNodes));
  const auto counts = load_into_store(r.graph, s);
  EXPECT_EQ(counts, (MapLoadCounts{3, 1}));
  const auto st = s.stats();
  EXPECT_EQ(st.element_count_per_layer.at(LdmLayer::L1_Static), 4u);
  EXPECT_EQ(st.relation_count, 3u);
  EXPECT_TRUE(s.read([](const StoreView& v) {
    return v.find_by_key(ElementKind::Object, road_way_name(10), "road.way").has_value();
  }));
}

TEST(LoadIntoStore, Idempotent) {
  GraphStore s;
  const auto g = parse_osm(std::string_view(kThreeNodes)).graph;
  load_into_store(g, s);
  const auto snap = s.snapshot(from_us(0));
  const auto stats = s.stats();
  load_into_store(g, s);
  EXPECT_EQ(s.snapshot(from_us(0)), snap);
  EXPECT_EQ(s.stats(), stats);
}

TEST(LoadIntoStore, EmptyGraph) {
  GraphStore s;
  EXPECT_EQ(load_into_store(RoadGraph{}, s), (MapLoadCounts{0, 0}));
}

RoadGraph chain(int n, bool oneway = false) {
  std::map<OsmId, RoadNode> nodes;
  RoadWay w{100, {}, {{"highway", "primary"}}, oneway};
  for (int i = 1; i <= n; ++i) {
    nodes[i] = RoadNode{i, {0.0, 0.001 * i, 0}};
    w.node_refs.push_back(i);
  }
  return RoadGraph::build(std::move(nodes), {{100, w}});
}

TEST(NextNodes, ChainTraversal) {
  EXPECT_EQ(next_nodes(chain(5), 1, 90.0, 3), (std::vector<OsmId>{2, 3, 4}));
}

TEST(NextNodes, ShortWhenFewReachable) {
  EXPECT_EQ(next_nodes(chain(3), 1, 90.0, 10), (std::vector<OsmId>{2, 3}));
}

TEST(NextNodes, IsolatedNode) {
  auto g = RoadGraph::build({{1, RoadNode{1, {0, 0, 0}}}}, {});
  EXPECT_TRUE(next_nodes(g, 1, 0.0, 3).empty());
}

TEST(NextNodes, UnknownNode) {
  try {
    next_nodes(chain(3), 77, 0, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownNode);
  }
}

TEST(NextNodes, RespectsOneway) {
  EXPECT_TRUE(next_nodes(chain(4, true), 4, 270.0, 3).empty());
  EXPECT_EQ(next_nodes(chain(4, false), 4, 270.0, 3), (std::vector<OsmId>{3, 2, 1}));
}

TEST(NextNodesProperty, MatchesOracle) {
  testing::Rng rng(33);
  for (int round = 0; round < 20; ++round) {
    const auto g = testing::random_road_graph(rng, {40.0, -3.7, 0}, 7, 9, 80.0);
    for (int q = 0; q < 30; ++q) {
      const auto from = 1000 + rng.integer(0, 7 * 9 - 1);
      const double heading = rng.uniform(0, 360);
      const auto k = static_cast<std::size_t>(rng.integer(1, 12));
      EXPECT_EQ(next_nodes(g, from, heading, k), testing::oracle_next_nodes(g, from, heading, k));
    }
  }
}

TEST(MapMatch, BesideOnlyWay) {
  const auto g = chain(3);
  // 5 m north of the midpoint of segment 0.
  const auto p = geo::enu_to_wgs84({0.0, 0.0015, 0}, {0, 5.0, 0});
  const auto m = map_match(g, p);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->way, 100);
  EXPECT_NEAR(m->distance_m, 5.0, 1e-6);
  EXPECT_EQ(m, testing::oracle_map_match(g, p, 50.0));
}

TEST(MapMatch, FarPointUnmatched) {
  const auto p = geo::enu_to_wgs84({0.0, 0.0015, 0}, {0, 500.0, 0});
  EXPECT_FALSE(map_match(chain(3), p).has_value());
}

TEST(MapMatch, TieGoesToLowerWayId) {
  // Two parallel ways 20 m either side of the query point.
  std::map<OsmId, RoadNode> nodes;
  const GeoPosition o{10.0, 10.0, 0};
  nodes[1] = {1, geo::enu_to_wgs84(o, {-50, 20, 0})};
  nodes[2] = {2, geo::enu_to_wgs84(o, {50, 20, 0})};
  nodes[3] = {3, geo::enu_to_wgs84(o, {-50, -20, 0})};
  nodes[4] = {4, geo::enu_to_wgs84(o, {50, -20, 0})};
  std::map<OsmId, RoadWay> ways;
  ways[7] = {7, {1, 2}, {{"highway", "primary"}}, false};
  ways[3] = {3, {3, 4}, {{"highway", "primary"}}, false};
  const auto g = RoadGraph::build(nodes, ways);
  const auto m = map_match(g, o);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->way, 3);
}

TEST(MapMatchProperty, MatchesExhaustiveOracle) {
  testing::Rng rng(34);
  const GeoPosition c{52.5, 13.4, 0};
  for (int round = 0; round < 10; ++round) {
    const auto g = testing::random_road_graph(rng, c, 10, 12, 90.0);
    for (int q = 0; q < 200; ++q) {
      const auto p = geo::enu_to_wgs84(c, {rng.uniform(-700, 700), rng.uniform(-600, 600), 0});
      EXPECT_EQ(map_match(g, p), testing::oracle_map_match(g, p, 50.0));
    }
  }
}

TEST(ParseOsmProperty, Deterministic) {
  testing::Rng rng(35);
  const auto g = testing::random_road_graph(rng, {0, 0, 0}, 5, 5, 100);
  std::ostringstream xml;
  xml.precision(17);
  xml << "<osm>\n";
  for (const auto& [id, n] : g.nodes()) {
    xml << "<node id=\"" << id << "\" lat=\"" << n.position.lat << "\" lon=\"" << n.position.lon << "\"/>\n";
  }
  for (const auto& [id, w] : g.ways()) {
    xml << "<way id=\"" << id << "\">";
    for (auto r : w.node_refs) xml << "<nd ref=\"" << r << "\"/>";
    for (const auto& [k, v] : w.tags) xml << "<tag k=\"" << k << "\" v=\"" << v << "\"/>";
    if (w.oneway) xml << "<tag k=\"oneway\" v=\"yes\"/>";
    xml << "</way>\n";
  }
  xml << "</osm>\n";
  const auto a = parse_osm(std::string_view(xml.str()));
  const auto b = parse_osm(std::string_view(xml.str()));
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.graph.adjacency(), b.graph.adjacency());
  EXPECT_EQ(a.graph.nodes(), g.nodes());
  for (const auto& [id, w] : g.ways()) {
    EXPECT_EQ(a.graph.ways().at(id).node_refs, w.node_refs);
    EXPECT_EQ(a.graph.ways().at(id).oneway, w.oneway);
  }
}

}  // namespace
}  // namespace ldm
