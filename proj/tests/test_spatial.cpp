#include <doctest.h>

#include <limits>

#include "oracles.hpp"
#include "scenerecon/spatial.hpp"

using namespace scenerecon;

TEST_SUITE("spatial") {

TEST_CASE("nearest matches brute force on random clouds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Points pts = oracle::random_points(500 + 97 * static_cast<int>(seed), seed);
    const PointIndex index(pts);
    const Points queries = oracle::random_points(300, seed + 100, -1.5, 1.5);
    for (int q = 0; q < queries.cols(); ++q) {
      const Neighbor got = index.nearest(queries.col(q));
      const double want = std::sqrt(oracle::brute_nn_squared(pts, queries.col(q)));
      CHECK(got.distance == doctest::Approx(want).epsilon(1e-15));
      CHECK(got.index == brute_force_nearest(pts, queries.col(q)).index);
    }
  }
}

TEST_CASE("ties resolve to the lowest index") {
  Points pts(3, 6);
  pts << 1, -1, 0, 0, 1, -1,
         0, 0, 1, -1, 0, 0,
         0, 0, 0, 0, 0, 0;
  const PointIndex index(pts);
  const Neighbor n = index.nearest(Vec3::Zero());
  CHECK(n.index == 0);
  CHECK(n.distance == doctest::Approx(1.0));
  // Duplicates at columns 0 and 4.
  CHECK(index.nearest(Vec3(1, 0, 0)).index == 0);
  const auto k = index.k_nearest(Vec3::Zero(), 4);
  REQUIRE(k.size() == 4);
  CHECK(k[0].index == 0);
  CHECK(k[1].index == 1);
  CHECK(k[2].index == 2);
  CHECK(k[3].index == 3);
}

TEST_CASE("k nearest matches brute force") {
  const Points pts = oracle::random_points(1000, 42);
  const PointIndex index(pts);
  const Points queries = oracle::random_points(50, 43);
  for (int q = 0; q < queries.cols(); ++q) {
    const auto got = index.k_nearest(queries.col(q), 10);
    const auto want = brute_force_k_nearest(pts, queries.col(q), 10);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].index == want[i].index);
      CHECK(got[i].distance == doctest::Approx(want[i].distance));
    }
  }
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(PointIndex(Points(3, 0)), Error);
  Points bad = Points::Zero(3, 4);
  bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(PointIndex{bad}, Error);
  const PointIndex single(Points::Zero(3, 1));
  CHECK(single.nearest(Vec3(1, 2, 3)).index == 0);
  CHECK_THROWS_AS(single.k_nearest(Vec3::Zero(), 2), Error);
  CHECK_THROWS_AS(single.k_nearest(Vec3::Zero(), 0), Error);
  // All points coincide.
  const PointIndex same(Points::Ones(3, 50));
  CHECK(same.nearest(Vec3::Zero()).index == 0);
}

}  // TEST_SUITE
