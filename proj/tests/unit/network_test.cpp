#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace whatif;

namespace {

// Nodes on a line 2 km apart plus one node 3 km above node 1; roads 1->2
// and 2->3, both FFTT 10 and capacity 5000.
RoadNetwork homogeneous() {
  return fixtures::planar({{0, 0}, {2, 0}, {4, 0}, {0, 3}}, {{1, 2, 5000, 10}, {2, 3, 5000, 10}});
}

}  // namespace

TEST(Geometry, IdenticalPointsAreZeroKm) {
  EXPECT_EQ(haversine_km({12.5, 41.9}, {12.5, 41.9}), 0.0);
}

TEST(Geometry, OneDegreeOnTheEquatorMatchesIndependentEvaluation) {
  const double expected = oracle::great_circle_km(0, 0, 1, 0);
  EXPECT_NEAR(expected, 111.19492664455873, 1e-9);
  EXPECT_NEAR(haversine_km({0, 0}, {1, 0}), expected, 1e-9);
}

TEST(Geometry, HaversineAgreesWithVectorFormulaOnRandomPairs) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lon(-180, 180), lat(-89, 89);
  for (int i = 0; i < 1000; ++i) {
    const double a = lon(rng), b = lat(rng), c = lon(rng), d = lat(rng);
    const double ref = oracle::great_circle_km(a, b, c, d);
    EXPECT_NEAR(haversine_km({a, b}, {c, d}), ref, 1e-9 * std::max(1.0, ref));
  }
}

TEST(Geometry, FileLengthTakesPrecedence) {
  const auto sf = fixtures::sioux_falls();
  const Road& r = sf.network.road(RoadId{1});
  ASSERT_TRUE(r.length_km.has_value());
  EXPECT_EQ(road_length_km(sf.network, RoadId{1}), *r.length_km);
  EXPECT_NE(road_length_km(sf.network, RoadId{1}), distance_km(sf.network, r.from, r.to));
}

TEST(Geometry, PlanarLengthUsesScale) {
  RoadNetwork n(Projection::planar, 0.5);
  n.add_node({NodeId{1}, {0, 0}});
  n.add_node({NodeId{2}, {3, 4}});
  EXPECT_DOUBLE_EQ(distance_km(n, NodeId{1}, NodeId{2}), 2.5);
}

TEST(Network, RejectsInvalidRoads) {
  RoadNetwork n(Projection::planar);
  n.add_node({NodeId{1}, {0, 0}});
  n.add_node({NodeId{2}, {1, 0}});
  EXPECT_THROW(n.add_road({RoadId{1}, NodeId{1}, NodeId{3}, 10, 1, {}, RoadKind::surface}), ValidationError);
  EXPECT_THROW(n.add_road({RoadId{1}, NodeId{1}, NodeId{1}, 10, 1, {}, RoadKind::surface}), ValidationError);
  EXPECT_THROW(n.add_road({RoadId{1}, NodeId{1}, NodeId{2}, 0, 1, {}, RoadKind::surface}), ValidationError);
  EXPECT_THROW(n.add_road({RoadId{1}, NodeId{1}, NodeId{2}, 10, -1, {}, RoadKind::surface}), ValidationError);
  n.add_road({RoadId{1}, NodeId{1}, NodeId{2}, 10, 1, {}, RoadKind::surface});
  EXPECT_THROW(n.add_road({RoadId{2}, NodeId{1}, NodeId{2}, 10, 1, {}, RoadKind::surface}), ValidationError);
  EXPECT_THROW(n.add_road({RoadId{1}, NodeId{2}, NodeId{1}, 10, 1, {}, RoadKind::surface}), ValidationError);
}

TEST(Network, RejectsOutOfRangeLonLat) {
  RoadNetwork n(Projection::lonlat);
  EXPECT_THROW(n.add_node({NodeId{1}, {181, 0}}), ValidationError);
  EXPECT_THROW(n.add_node({NodeId{1}, {0, -91}}), ValidationError);
  EXPECT_NO_THROW(n.add_node({NodeId{1}, {-180, 90}}));
  EXPECT_THROW(n.add_node({NodeId{1}, {0, 0}}), ValidationError);
}

TEST(Edits, SetCapacityReturnsNewSnapshot) {
  const auto base = fixtures::braess().network;
  const auto copy = base;
  const auto edited = set_capacity(base, RoadId{3}, 7000);
  EXPECT_EQ(base, copy);
  EXPECT_EQ(edited.road(RoadId{3}).capacity, 7000);
  EXPECT_EQ(set_capacity(base, RoadId{3}, base.road(RoadId{3}).capacity), base);
  EXPECT_THROW(set_capacity(base, RoadId{3}, 0), ValidationError);
  EXPECT_THROW(set_capacity(base, RoadId{99}, 10), NotFoundError);
}

TEST(Edits, ExpansionByHalf) {
  const auto sf = fixtures::sioux_falls().network;
  const double c = sf.road(RoadId{16}).capacity;
  EXPECT_DOUBLE_EQ(set_capacity(sf, RoadId{16}, 1.5 * c).road(RoadId{16}).capacity, 1.5 * c);
}

TEST(Edits, HalvingFfttHalvesBprTime) {
  const auto base = fixtures::braess().network;
  const auto edited = set_fftt(base, RoadId{1}, base.road(RoadId{1}).fftt / 2);
  const Road& a = base.road(RoadId{1});
  const Road& b = edited.road(RoadId{1});
  for (double v : {0.0, 100.0, 850.0, 3000.0})
    EXPECT_NEAR(bpr_time(b.fftt, b.capacity, v), bpr_time(a.fftt, a.capacity, v) / 2, 1e-12);
  EXPECT_EQ(set_fftt(base, RoadId{1}, a.fftt), base);
  EXPECT_THROW(set_fftt(base, RoadId{1}, -1), ValidationError);
}

TEST(Edits, CloseRoadKeepsNodes) {
  const auto base = fixtures::braess().network;
  const auto closed = close_road(base, RoadId{3});
  EXPECT_EQ(closed.roads().size(), 4u);
  EXPECT_EQ(closed.nodes().size(), 4u);
  EXPECT_FALSE(closed.find_road(RoadId{3}));
  EXPECT_EQ(base.roads().size(), 5u);
  EXPECT_THROW(close_road(base, RoadId{3}).road(RoadId{3}), NotFoundError);
  EXPECT_THROW(close_road(closed, RoadId{3}), NotFoundError);
}

TEST(Edits, CloseThenRebuildIsStructuralIdentity) {
  const auto base = homogeneous();
  const Road r = base.road(RoadId{2});
  const auto closed = close_road(base, RoadId{2});
  const auto rebuilt = build_road(closed, {r.from, r.to, false, RoadKind::surface, r.capacity, r.fftt});
  EXPECT_TRUE(structurally_equal(base, rebuilt));
  EXPECT_FALSE(structurally_equal(base, closed));
}

TEST(Edits, ClosingOnlyRoadMakesOdUnreachable) {
  auto data = fixtures::braess();
  auto n = close_road(close_road(data.network, RoadId{1}), RoadId{2});
  EXPECT_THROW(solve_sue(n, data.demands), UnreachableOdError);
}

TEST(Edits, NewRoadDefaultsFromRatioRule) {
  const auto n = homogeneous();
  const auto built = build_road(n, {NodeId{1}, NodeId{4}});
  const Road* r = built.find_road_between(NodeId{1}, NodeId{4});
  ASSERT_NE(r, nullptr);
  EXPECT_NEAR(r->fftt, 15.0, 1e-12);
  EXPECT_NEAR(r->capacity, 5000.0, 1e-12);
  EXPECT_EQ(n.roads().size(), 2u);
}

TEST(Edits, ExplicitAttributesOverrideDefaults) {
  const auto built = build_road(homogeneous(), {NodeId{1}, NodeId{4}, false, RoadKind::tunnel, 1234.0, 7.0});
  const Road* r = built.find_road_between(NodeId{1}, NodeId{4});
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->capacity, 1234.0);
  EXPECT_EQ(r->fftt, 7.0);
  EXPECT_EQ(r->kind, RoadKind::tunnel);
}

TEST(Edits, TwoWayBuildAddsTwoRoads) {
  const auto sf = fixtures::sioux_falls().network;
  ASSERT_FALSE(sf.find_road_between(NodeId{1}, NodeId{8}));
  const auto built = build_road(sf, {NodeId{1}, NodeId{8}, true});
  EXPECT_EQ(built.roads().size(), 78u);
  EXPECT_TRUE(built.find_road_between(NodeId{1}, NodeId{8}));
  EXPECT_TRUE(built.find_road_between(NodeId{8}, NodeId{1}));
}

TEST(Edits, BuildRejectsDuplicatesAndUnknownNodes) {
  const auto n = homogeneous();
  EXPECT_THROW(build_road(n, {NodeId{1}, NodeId{2}}), ValidationError);
  EXPECT_THROW(build_road(n, {NodeId{2}, NodeId{1}, true}), ValidationError);
  EXPECT_THROW(build_road(n, {NodeId{1}, NodeId{9}}), NotFoundError);
  RoadNetwork empty(Projection::planar);
  empty.add_node({NodeId{1}, {0, 0}});
  empty.add_node({NodeId{2}, {1, 0}});
  EXPECT_THROW(build_road(empty, {NodeId{1}, NodeId{2}}), ValidationError);
  EXPECT_NO_THROW(build_road(empty, {NodeId{1}, NodeId{2}, false, RoadKind::surface, 10.0, 1.0}));
}

TEST(Edits, RoadIdsAreFreshAndStable) {
  const auto n = homogeneous();
  const auto built = build_road(n, {NodeId{1}, NodeId{4}, true});
  for (const auto& [id, r] : n.roads()) EXPECT_EQ(built.road(id), r);
  EXPECT_TRUE(built.find_road(RoadId{3}));
  EXPECT_TRUE(built.find_road(RoadId{4}));
  // A closed id is never handed out again.
  const auto closed = close_road(built, RoadId{4});
  const auto again = build_road(closed, {NodeId{4}, NodeId{1}});
  EXPECT_FALSE(again.find_road(RoadId{4}));
  EXPECT_TRUE(again.find_road(RoadId{5}));
}
