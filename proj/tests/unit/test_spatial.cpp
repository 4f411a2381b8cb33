#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "bvecchia/error.hpp"
#include "bvecchia/spatial.hpp"
#include "oracles.hpp"

namespace bv = bvecchia;

namespace {

void expect_valid_partition(const bv::LocationSet& pts, const bv::BlockPartition& part,
                            std::size_t bc) {
  ASSERT_EQ(part.block_count(), bc);
  ASSERT_EQ(part.assignment.size(), pts.size());
  std::vector<int> seen(pts.size(), 0);
  std::size_t total = 0;
  for (std::size_t b = 0; b < bc; ++b) {
    ASSERT_FALSE(part.blocks[b].empty()) << "block " << b;
    total += part.block_size(b);
    EXPECT_TRUE(std::is_sorted(part.blocks[b].begin(), part.blocks[b].end()));
    for (std::size_t i : part.blocks[b]) {
      ++seen[i];
      EXPECT_EQ(part.assignment[i], b);
    }
    for (std::size_t k = 0; k < pts.dim(); ++k) {
      double mean = 0.0;
      for (std::size_t i : part.blocks[b]) mean += pts(i, k);
      mean /= static_cast<double>(part.block_size(b));
      EXPECT_NEAR(part.centroid(b)[k], mean, 1e-14);
    }
  }
  EXPECT_EQ(total, pts.size());
  for (int s : seen) EXPECT_EQ(s, 1);
}

bv::BlockPartition partition_from_centroids(const std::vector<std::vector<double>>& c) {
  std::vector<double> coords;
  for (const auto& p : c) coords.insert(coords.end(), p.begin(), p.end());
  bv::LocationSet pts(coords, c.front().size());
  std::vector<std::size_t> assign(c.size());
  std::iota(assign.begin(), assign.end(), 0);
  return bv::BlockPartition::from_assignment(pts, assign, c.size());
}

}  // namespace

TEST(LocationSet, RejectsMalformedInput) {
  EXPECT_THROW(bv::LocationSet({0.1, 0.2}, 1), bv::InvalidArgument);
  EXPECT_THROW(bv::LocationSet({0.1, 0.2, 0.3}, 2), bv::InvalidArgument);
  EXPECT_THROW(bv::LocationSet({}, 2), bv::InvalidArgument);
  EXPECT_THROW(bv::LocationSet({0.1, std::numeric_limits<double>::quiet_NaN()}, 2),
               bv::InvalidData);
  EXPECT_THROW(bv::LocationSet({0.1, std::numeric_limits<double>::infinity()}, 2),
               bv::InvalidData);
}

TEST(LocationSet, SubsetAndGrid) {
  const auto grid = bv::grid_locations(4, 2);
  ASSERT_EQ(grid.size(), 16u);
  EXPECT_DOUBLE_EQ(grid(0, 0), 0.125);
  EXPECT_DOUBLE_EQ(grid(15, 1), 0.875);
  const std::size_t idx[] = {3, 5};
  const auto sub = grid.subset(idx);
  EXPECT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub(1, 0), grid(5, 0));
  const std::size_t bad[] = {16};
  EXPECT_THROW(grid.subset(bad), bv::InvalidArgument);
}

TEST(LocationSet, UniformIsSeededAndInUnitCube) {
  const auto a = bv::uniform_locations(200, 3, 9);
  EXPECT_EQ(a, bv::uniform_locations(200, 3, 9));
  EXPECT_NE(a, bv::uniform_locations(200, 3, 10));
  for (double c : a.coords()) {
    EXPECT_GE(c, 0.0);
    EXPECT_LT(c, 1.0);
  }
}

TEST(KMeans, FiveHundredPointsEightyBlocks) {
  const auto pts = bv::uniform_locations(500, 2, 1);
  expect_valid_partition(pts, bv::kmeans_cluster(pts, 80, 1), 80);
}

TEST(KMeans, BlockCountEqualToNGivesSingletons) {
  const auto pts = bv::uniform_locations(50, 2, 4);
  const auto part = bv::kmeans_cluster(pts, 50, 4);
  expect_valid_partition(pts, part, 50);
  for (const auto& b : part.blocks) EXPECT_EQ(b.size(), 1u);
}

TEST(KMeans, SingleBlockIsEverything) {
  const auto pts = bv::uniform_locations(37, 3, 2);
  const auto part = bv::kmeans_cluster(pts, 1, 2);
  expect_valid_partition(pts, part, 1);
}

TEST(KMeans, RejectsTooManyBlocks) {
  const auto pts = bv::uniform_locations(10, 2, 1);
  EXPECT_THROW(bv::kmeans_cluster(pts, 11, 1), bv::InvalidArgument);
  EXPECT_THROW(bv::kmeans_cluster(pts, 0, 1), bv::InvalidArgument);
}

TEST(KMeans, DuplicatePointsStillFillEveryBlock) {
  std::vector<double> coords;
  for (int i = 0; i < 20; ++i) coords.insert(coords.end(), {0.5, 0.5});
  coords.insert(coords.end(), {0.1, 0.9});
  const bv::LocationSet pts(coords, 2);
  expect_valid_partition(pts, bv::kmeans_cluster(pts, 5, 3), 5);
}

TEST(KMeansProperty, ValidDeterministicAndObjectiveNonIncreasing) {
  oracle::Gen gen(101);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = gen.integer(1, 300);
    const std::size_t dim = gen.integer(2, 3);
    const std::size_t bc = gen.integer(1, n);
    const auto pts = gen.points(n, dim);
    const std::uint64_t seed = gen.integer(0, 1000);
    std::vector<double> trace;
    const auto part = bv::kmeans_cluster(pts, bc, seed, {.max_iter = 100, .objective_trace = &trace});
    SCOPED_TRACE(testing::Message() << "trial " << trial << " n=" << n << " bc=" << bc);
    expect_valid_partition(pts, part, bc);
    EXPECT_EQ(part, bv::kmeans_cluster(pts, bc, seed));
    for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LE(trace[k], trace[k - 1] * (1 + 1e-12) + 1e-15);
  }
}

TEST(SpaceFillKey, MortonCorners) {
  const double origin[] = {0.0, 0.0};
  const double one[] = {1.0, 1.0};
  EXPECT_EQ(bv::space_fill_key(origin, bv::Ordering::morton, 1), 0u);
  EXPECT_EQ(bv::space_fill_key(origin, bv::Ordering::morton, 16), 0u);
  EXPECT_EQ(bv::space_fill_key(one, bv::Ordering::morton, 1), 3u);
}

TEST(SpaceFillKey, HilbertFirstOrderCells) {
  const double a[] = {1.0, 0.0};
  const double b[] = {0.0, 1.0};
  const double o[] = {0.0, 0.0};
  const auto ka = bv::space_fill_key(a, bv::Ordering::hilbert, 1);
  const auto kb = bv::space_fill_key(b, bv::Ordering::hilbert, 1);
  EXPECT_NE(ka, kb);
  EXPECT_GE(ka, 1u);
  EXPECT_LE(ka, 3u);
  EXPECT_GE(kb, 1u);
  EXPECT_LE(kb, 3u);
  EXPECT_EQ(bv::space_fill_key(o, bv::Ordering::hilbert, 1), 0u);
}

TEST(SpaceFillKey, HilbertVisitsAdjacentCells) {
  for (std::size_t dim : {2u, 3u}) {
    const std::uint32_t bits = 3;
    const std::size_t side = 1u << bits;
    std::size_t cells = 1;
    for (std::size_t k = 0; k < dim; ++k) cells *= side;
    std::vector<std::vector<std::size_t>> by_key(cells);
    std::vector<double> p(dim);
    for (std::size_t c = 0; c < cells; ++c) {
      std::size_t rem = c;
      std::vector<std::size_t> q(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        q[k] = rem % side;
        rem /= side;
        p[k] = static_cast<double>(q[k]) / static_cast<double>(side - 1);
      }
      const auto key = bv::space_fill_key(p, bv::Ordering::hilbert, bits);
      ASSERT_LT(key, cells);
      ASSERT_TRUE(by_key[key].empty()) << "duplicate key";
      by_key[key] = q;
    }
    for (std::size_t k = 1; k < cells; ++k) {
      std::size_t manhattan = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        manhattan += by_key[k][d] > by_key[k - 1][d] ? by_key[k][d] - by_key[k - 1][d]
                                                     : by_key[k - 1][d] - by_key[k][d];
      }
      EXPECT_EQ(manhattan, 1u) << "dim " << dim << " step " << k;
    }
  }
}

TEST(SpaceFillKey, ClampsAndValidates) {
  const double out[] = {-0.5, 1.5};
  const double in[] = {0.0, 1.0};
  EXPECT_EQ(bv::space_fill_key(out, bv::Ordering::morton, 8),
            bv::space_fill_key(in, bv::Ordering::morton, 8));
  EXPECT_THROW(bv::space_fill_key(in, bv::Ordering::random, 8), bv::InvalidArgument);
  EXPECT_THROW(bv::space_fill_key(in, bv::Ordering::morton, 32), bv::InvalidArgument);
  EXPECT_EQ(bv::default_curve_bits(2), 16u);
  EXPECT_EQ(bv::default_curve_bits(3), 10u);
}

TEST(SpaceFillKeyProperty, MortonMostSignificantBitDominates) {
  oracle::Gen gen(5);
  const std::uint32_t bits = 16;
  const double top = static_cast<double>(1u << (bits - 1)) / static_cast<double>((1u << bits) - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = gen.integer(2, 3);
    const std::size_t axis = gen.integer(0, dim - 1);
    std::vector<double> lo(dim), hi(dim);
    for (std::size_t k = 0; k < dim; ++k) lo[k] = hi[k] = gen.uniform(0.0, 0.49);
    lo[axis] = gen.uniform(0.0, 0.49);
    hi[axis] = lo[axis] + top;
    const auto b = bv::default_curve_bits(dim);
    EXPECT_GT(bv::space_fill_key(hi, bv::Ordering::morton, b),
              bv::space_fill_key(lo, bv::Ordering::morton, b));
  }
}

TEST(OrderBlocks, MortonAlongDiagonal) {
  const auto part = partition_from_centroids({{0.9, 0.9}, {0.1, 0.1}, {0.5, 0.5}});
  const auto perm = bv::order_blocks(part, bv::Ordering::morton, 0);
  EXPECT_EQ(perm.order, (std::vector<std::size_t>{1, 2, 0}));
  const auto sorted = partition_from_centroids({{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.9}});
  EXPECT_EQ(bv::order_blocks(sorted, bv::Ordering::morton, 0).order,
            (std::vector<std::size_t>{0, 1, 2}));
}

TEST(OrderBlocks, SingleBlockAnyStrategy) {
  const auto part = partition_from_centroids({{0.3, 0.3}});
  for (auto s : {bv::Ordering::morton, bv::Ordering::hilbert, bv::Ordering::random,
                 bv::Ordering::maxmin, bv::Ordering::kdtree}) {
    EXPECT_EQ(bv::order_blocks(part, s, 7).order, std::vector<std::size_t>{0});
  }
}

TEST(OrderBlocks, MaxminSecondPickIsOppositeCorner) {
  const auto part = partition_from_centroids({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  const auto order = bv::order_blocks(part, bv::Ordering::maxmin, 0).order;
  // All corners tie for nearest to the center; the lowest id starts.
  EXPECT_EQ(order[0], 0u);
  EXPECT_EQ(order[1], 3u);
}

TEST(OrderBlocks, ParseAndPrint) {
  for (auto s : {bv::Ordering::morton, bv::Ordering::hilbert, bv::Ordering::random,
                 bv::Ordering::maxmin, bv::Ordering::kdtree}) {
    EXPECT_EQ(bv::parse_ordering(bv::to_string(s)), s);
  }
  EXPECT_THROW(bv::parse_ordering("zorder"), bv::InvalidArgument);
}

TEST(OrderBlocksProperty, BijectionAndDeterministic) {
  oracle::Gen gen(77);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = gen.integer(1, 200);
    const auto pts = gen.points(n, gen.integer(2, 3));
    const std::size_t bc = gen.integer(1, n);
    const auto part = bv::kmeans_cluster(pts, bc, trial);
    const auto strategy = gen.ordering();
    const std::uint64_t seed = gen.integer(0, 99);
    const auto perm = bv::order_blocks(part, strategy, seed);
    std::vector<std::size_t> sorted = perm.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> ids(bc);
    std::iota(ids.begin(), ids.end(), 0);
    EXPECT_EQ(sorted, ids) << bv::to_string(strategy);
    EXPECT_EQ(perm, bv::order_blocks(part, strategy, seed));
    EXPECT_EQ(perm.strategy, strategy);
  }
}

TEST(OrderBlocks, KdTreeSplitsOnFirstAxisFirst) {
  const auto part = partition_from_centroids({{0.9, 0.1}, {0.1, 0.9}, {0.2, 0.2}, {0.8, 0.8}});
  const auto order = bv::order_blocks(part, bv::Ordering::kdtree, 0).order;
  // The left half in x holds blocks 1 and 2, which must come first.
  std::set<std::size_t> first{order[0], order[1]};
  EXPECT_EQ(first, (std::set<std::size_t>{1, 2}));
}

TEST(Neighbors, FirstPositionEmptyAndExactFit) {
  const auto pts = bv::uniform_locations(60, 2, 3);
  const auto part = bv::kmeans_cluster(pts, 6, 3);
  const auto perm = bv::order_blocks(part, bv::Ordering::random, 3);
  const std::size_t l1 = part.block_size(perm.order[0]);
  const auto nn = bv::neighbor_sets(pts, part, perm, l1);
  EXPECT_TRUE(nn[0].empty());
  std::vector<std::size_t> got = nn[1];
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, part.blocks[perm.order[0]]);
}

TEST(Neighbors, TwoBlocksLargeCsConditionsOnWholeFirstBlock) {
  const auto pts = bv::uniform_locations(40, 2, 8);
  const auto part = bv::kmeans_cluster(pts, 2, 8);
  const auto perm = bv::order_blocks(part, bv::Ordering::random, 8);
  const auto nn = bv::neighbor_sets(pts, part, perm, 100);
  std::vector<std::size_t> got = nn[1];
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, part.blocks[perm.order[0]]);
}

TEST(Neighbors, SingletonBlocksMatchBruteForce) {
  const auto pts = bv::uniform_locations(150, 2, 12);
  const auto part = bv::kmeans_cluster(pts, 150, 12);
  const auto perm = bv::order_blocks(part, bv::Ordering::random, 12);
  const auto nn = bv::neighbor_sets(pts, part, perm, 1);
  std::vector<std::size_t> earlier;
  for (std::size_t pos = 0; pos < 150; ++pos) {
    const std::size_t i = part.blocks[perm.order[pos]][0];
    EXPECT_EQ(nn[pos], oracle::brute_nearest(pts, earlier, pts.point(i), 1)) << "position " << pos;
    earlier.push_back(i);
  }
}

TEST(NeighborsProperty, LegalAndMatchBruteForce) {
  oracle::Gen gen(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = gen.integer(1, 500);
    const auto pts = gen.points(n, gen.integer(2, 3));
    const std::size_t bc = gen.integer(1, std::min<std::size_t>(n, 120));
    const std::size_t cs = gen.integer(0, 40);
    const auto part = bv::kmeans_cluster(pts, bc, trial);
    const auto perm = bv::order_blocks(part, gen.ordering(), trial);
    const auto nn = bv::neighbor_sets(pts, part, perm, cs, bv::Parallelism{3});
    SCOPED_TRACE(testing::Message() << "trial " << trial << " n=" << n << " bc=" << bc << " cs=" << cs);
    ASSERT_EQ(nn.sets.size(), bc);
    EXPECT_EQ(nn, bv::neighbor_sets(pts, part, perm, cs, bv::Parallelism{1}));
    std::vector<std::size_t> earlier;
    for (std::size_t pos = 0; pos < bc; ++pos) {
      const auto& set = nn[pos];
      EXPECT_EQ(set.size(), std::min(cs, earlier.size()));
      std::set<std::size_t> unique(set.begin(), set.end());
      EXPECT_EQ(unique.size(), set.size());
      const std::set<std::size_t> allowed(earlier.begin(), earlier.end());
      for (std::size_t j : set) EXPECT_TRUE(allowed.count(j));
      EXPECT_EQ(set, oracle::brute_nearest(pts, earlier, part.centroid(perm.order[pos]), cs));
      for (std::size_t i : part.blocks[perm.order[pos]]) earlier.push_back(i);
    }
  }
}

TEST(NearestPoints, SortedByDistanceThenIndex) {
  const bv::LocationSet pts({0.5, 0.5, 0.4, 0.5, 0.6, 0.5, 0.5, 0.9}, 2);
  const std::size_t cand[] = {0, 1, 2, 3};
  const double target[] = {0.5, 0.5};
  EXPECT_EQ(bv::nearest_points(pts, cand, target, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(bv::nearest_points(pts, cand, target, 10).size(), 4u);
}
