#include "bvecchia/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "bvecchia/error.hpp"
#include "bvecchia/random.hpp"

namespace bvecchia {

namespace {

// Stream ids keep the generators used by different operations independent
// even when they share a user seed.
constexpr std::uint64_t kStreamLocations = 1;
constexpr std::uint64_t kStreamKMeans = 2;
constexpr std::uint64_t kStreamOrdering = 3;

}  // namespace

LocationSet::LocationSet(std::vector<double> coords, std::size_t dim)
    : coords_(std::move(coords)), dim_(dim) {
  if (dim_ != 2 && dim_ != 3) throw InvalidArgument("LocationSet: dim must be 2 or 3");
  if (coords_.empty() || coords_.size() % dim_ != 0) {
    throw InvalidArgument("LocationSet: need a positive number of complete points");
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw InvalidData("LocationSet: non-finite coordinate");
  }
}

LocationSet LocationSet::subset(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t i : indices) {
    if (i >= size()) throw InvalidArgument("LocationSet::subset: index out of range");
    const auto p = point(i);
    out.insert(out.end(), p.begin(), p.end());
  }
  return LocationSet(std::move(out), dim_);
}

LocationSet uniform_locations(std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("uniform_locations: n must be positive");
  CounterRng rng(seed, kStreamLocations);
  std::vector<double> coords(n * dim);
  for (double& c : coords) c = rng.uniform();
  return LocationSet(std::move(coords), dim);
}

LocationSet grid_locations(std::size_t side, std::size_t dim) {
  if (side == 0) throw InvalidArgument("grid_locations: side must be positive");
  std::size_t n = 1;
  for (std::size_t k = 0; k < dim; ++k) n *= side;
  std::vector<double> coords;
  coords.reserve(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rest = i;
    for (std::size_t k = 0; k < dim; ++k) {
      coords.push_back((static_cast<double>(rest % side) + 0.5) / static_cast<double>(side));
      rest /= side;
    }
  }
  return LocationSet(std::move(coords), dim);
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

BlockPartition BlockPartition::from_assignment(const LocationSet& points,
                                               std::vector<std::size_t> assignment,
                                               std::size_t bc) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  if (assignment.size() != n) {
    throw InvalidArgument("BlockPartition: assignment length must equal the point count");
  }
  BlockPartition part;
  part.dim = d;
  part.blocks.resize(bc);
  part.centroids.assign(bc * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = assignment[i];
    if (b >= bc) throw InvalidArgument("BlockPartition: block id out of range");
    part.blocks[b].push_back(i);
    for (std::size_t k = 0; k < d; ++k) part.centroids[b * d + k] += points(i, k);
  }
  for (std::size_t b = 0; b < bc; ++b) {
    if (part.blocks[b].empty()) throw InvalidArgument("BlockPartition: empty block");
    const double inv = 1.0 / static_cast<double>(part.blocks[b].size());
    for (std::size_t k = 0; k < d; ++k) part.centroids[b * d + k] *= inv;
  }
  part.assignment = std::move(assignment);
  return part;
}

double kmeans_objective(const LocationSet& points, const BlockPartition& partition) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    total += squared_distance(points.point(i), partition.centroid(partition.assignment[i]));
  }
  return total;
}

namespace {

std::vector<double> kmeanspp_seed(const LocationSet& points, std::size_t bc, CounterRng& rng) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  std::vector<double> centers;
  centers.reserve(bc * d);
  std::vector<bool> chosen(n, false);
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());

  auto add_center = [&](std::size_t idx) {
    chosen[idx] = true;
    const auto p = points.point(idx);
    centers.insert(centers.end(), p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) dist2[i] = std::min(dist2[i], squared_distance(points.point(i), p));
  };

  add_center(static_cast<std::size_t>(rng.below(n)));
  while (centers.size() < bc * d) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += dist2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist2[i] <= 0.0) continue;
        acc += dist2[i];
        pick = i;
        if (acc > target) break;
      }
    } else {
      // Only duplicates of existing centers remain: take an unchosen point uniformly.
      const std::size_t remaining = static_cast<std::size_t>(std::count(chosen.begin(), chosen.end(), false));
      std::size_t skip = static_cast<std::size_t>(rng.below(remaining));
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (skip-- == 0) {
          pick = i;
          break;
        }
      }
    }
    add_center(pick);
  }
  return centers;
}

std::size_t nearest_center(std::span<const double> p, const std::vector<double>& centers,
                           std::size_t bc, std::size_t d) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < bc; ++c) {
    const double dist = squared_distance(p, std::span<const double>(centers.data() + c * d, d));
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  return best;
}

// Moves the farthest point of a multi-point cluster into each empty cluster.
void repair_empty_clusters(const LocationSet& points, std::vector<std::size_t>& assignment,
                           std::vector<double>& centers, std::size_t bc) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  std::vector<std::size_t> counts(bc, 0);
  for (std::size_t a : assignment) ++counts[a];

  for (std::size_t e = 0; e < bc; ++e) {
    if (counts[e] != 0) continue;
    std::size_t far = n;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = assignment[i];
      if (counts[a] < 2) continue;
      const double dist =
          squared_distance(points.point(i), std::span<const double>(centers.data() + a * d, d));
      if (dist > far_d) {
        far_d = dist;
        far = i;
      }
    }
    --counts[assignment[far]];
    assignment[far] = e;
    counts[e] = 1;
    const auto p = points.point(far);
    std::copy(p.begin(), p.end(), centers.begin() + static_cast<std::ptrdiff_t>(e * d));
  }
}

void update_centers(const LocationSet& points, const std::vector<std::size_t>& assignment,
                    std::vector<double>& centers, std::size_t bc) {
  const std::size_t d = points.dim();
  std::vector<std::size_t> counts(bc, 0);
  std::fill(centers.begin(), centers.end(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t a = assignment[i];
    ++counts[a];
    for (std::size_t k = 0; k < d; ++k) centers[a * d + k] += points(i, k);
  }
  for (std::size_t c = 0; c < bc; ++c) {
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t k = 0; k < d; ++k) centers[c * d + k] *= inv;
  }
}

}  // namespace

BlockPartition kmeans_cluster(const LocationSet& points, std::size_t bc, std::uint64_t seed,
                              const KMeansOptions& options) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  if (bc == 0 || bc > n) throw InvalidArgument("kmeans_cluster: need 1 <= bc <= n");
  if (options.max_iter == 0) throw InvalidArgument("kmeans_cluster: max_iter must be positive");

  if (bc == n) {
    // Every cluster must be non-empty, so the only valid partition is singletons.
    std::vector<std::size_t> assignment(n);
    std::iota(assignment.begin(), assignment.end(), std::size_t{0});
    auto part = BlockPartition::from_assignment(points, std::move(assignment), bc);
    if (options.objective_trace) options.objective_trace->push_back(0.0);
    return part;
  }

  CounterRng rng(seed, kStreamKMeans);
  std::vector<double> centers = kmeanspp_seed(points, bc, rng);
  std::vector<std::size_t> assignment(n);
  for (std::size_t i = 0; i < n; ++i) assignment[i] = nearest_center(points.point(i), centers, bc, d);

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    repair_empty_clusters(points, assignment, centers, bc);
    update_centers(points, assignment, centers, bc);
    if (options.objective_trace) {
      double obj = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        obj += squared_distance(points.point(i),
                                std::span<const double>(centers.data() + assignment[i] * d, d));
      }
      options.objective_trace->push_back(obj);
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_center(points.point(i), centers, bc, d);
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // The last reassignment may have emptied a cluster when max_iter ran out.
  repair_empty_clusters(points, assignment, centers, bc);
  return BlockPartition::from_assignment(points, std::move(assignment), bc);
}

std::string_view to_string(Ordering ordering) noexcept {
  switch (ordering) {
    case Ordering::morton: return "morton";
    case Ordering::hilbert: return "hilbert";
    case Ordering::random: return "random";
    case Ordering::maxmin: return "maxmin";
    case Ordering::kdtree: return "kdtree";
  }
  return "unknown";
}

Ordering parse_ordering(std::string_view name) {
  for (Ordering o : {Ordering::morton, Ordering::hilbert, Ordering::random, Ordering::maxmin,
                     Ordering::kdtree}) {
    if (to_string(o) == name) return o;
  }
  throw InvalidArgument("unknown ordering '" + std::string(name) +
                        "' (expected morton, hilbert, random, maxmin or kdtree)");
}

namespace {

std::vector<std::size_t> curve_order(const BlockPartition& part, Ordering strategy) {
  const std::size_t bc = part.block_count();
  const std::uint32_t bits = default_curve_bits(part.dim);
  std::vector<std::uint64_t> keys(bc);
  for (std::size_t b = 0; b < bc; ++b) keys[b] = space_fill_key(part.centroid(b), strategy, bits);
  std::vector<std::size_t> order(bc);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return order;
}

std::vector<std::size_t> random_order(std::size_t bc, std::uint64_t seed) {
  std::vector<std::size_t> order(bc);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, kStreamOrdering);
  for (std::size_t i = bc; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<std::size_t> maxmin_order(const BlockPartition& part) {
  const std::size_t bc = part.block_count();
  const std::size_t d = part.dim;
  std::vector<double> mean(d, 0.0);
  for (std::size_t b = 0; b < bc; ++b) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += part.centroids[b * d + k];
  }
  for (double& m : mean) m /= static_cast<double>(bc);

  std::size_t first = 0;
  double first_d = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < bc; ++b) {
    const double dist = squared_distance(part.centroid(b), mean);
    if (dist < first_d) {
      first_d = dist;
      first = b;
    }
  }

  std::vector<std::size_t> order{first};
  order.reserve(bc);
  std::vector<bool> taken(bc, false);
  taken[first] = true;
  std::vector<double> min_d(bc, std::numeric_limits<double>::infinity());
  std::size_t last = first;
  while (order.size() < bc) {
    std::size_t best = bc;
    double best_d = -1.0;
    for (std::size_t b = 0; b < bc; ++b) {
      if (taken[b]) continue;
      min_d[b] = std::min(min_d[b], squared_distance(part.centroid(b), part.centroid(last)));
      if (min_d[b] > best_d) {
        best_d = min_d[b];
        best = b;
      }
    }
    taken[best] = true;
    order.push_back(best);
    last = best;
  }
  return order;
}

void kdtree_visit(const BlockPartition& part, std::vector<std::size_t> ids, std::size_t depth,
                  std::vector<std::size_t>& out) {
  if (ids.size() == 1) {
    out.push_back(ids.front());
    return;
  }
  const std::size_t axis = depth % part.dim;
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    const double ca = part.centroid(a)[axis];
    const double cb = part.centroid(b)[axis];
    return ca < cb || (ca == cb && a < b);
  });
  const auto mid = ids.begin() + static_cast<std::ptrdiff_t>(ids.size() / 2);
  kdtree_visit(part, std::vector<std::size_t>(ids.begin(), mid), depth + 1, out);
  kdtree_visit(part, std::vector<std::size_t>(mid, ids.end()), depth + 1, out);
}

}  // namespace

BlockPermutation order_blocks(const BlockPartition& partition, Ordering strategy,
                              std::uint64_t seed) {
  const std::size_t bc = partition.block_count();
  if (bc == 0) throw InvalidArgument("order_blocks: empty partition");
  BlockPermutation perm;
  perm.strategy = strategy;
  perm.seed = seed;
  switch (strategy) {
    case Ordering::morton:
    case Ordering::hilbert:
      perm.order = curve_order(partition, strategy);
      break;
    case Ordering::random:
      perm.order = random_order(bc, seed);
      break;
    case Ordering::maxmin:
      perm.order = maxmin_order(partition);
      break;
    case Ordering::kdtree: {
      std::vector<std::size_t> ids(bc);
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      perm.order.reserve(bc);
      kdtree_visit(partition, std::move(ids), 0, perm.order);
      break;
    }
    default:
      throw InvalidArgument("order_blocks: unknown strategy");
  }
  return perm;
}

std::vector<std::size_t> nearest_points(const LocationSet& points,
                                        std::span<const std::size_t> candidates,
                                        std::span<const double> target, std::size_t k) {
  k = std::min(k, candidates.size());
  if (k == 0) return {};
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  for (std::size_t idx : candidates) scored.emplace_back(squared_distance(points.point(idx), target), idx);
  auto kth = scored.begin() + static_cast<std::ptrdiff_t>(k);
  std::partial_sort(scored.begin(), kth, scored.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (auto it = scored.begin(); it != kth; ++it) out.push_back(it->second);
  return out;
}

NeighborSets neighbor_sets(const LocationSet& points, const BlockPartition& partition,
                           const BlockPermutation& perm, std::size_t cs,
                           Parallelism parallelism) {
  const std::size_t bc = partition.block_count();
  if (partition.assignment.size() != points.size() || perm.order.size() != bc) {
    throw InvalidArgument("neighbor_sets: points, partition and permutation disagree");
  }
  // Points laid out in permuted block order; the candidates of position i
  // are exactly the prefix covering positions 0 .. i-1.
  std::vector<std::size_t> laid_out;
  laid_out.reserve(points.size());
  std::vector<std::size_t> prefix(bc + 1, 0);
  for (std::size_t pos = 0; pos < bc; ++pos) {
    const auto& block = partition.blocks[perm.order[pos]];
    laid_out.insert(laid_out.end(), block.begin(), block.end());
    prefix[pos + 1] = laid_out.size();
  }

  NeighborSets nn;
  nn.cs = cs;
  nn.sets = batched_apply(
                bc,
                [&](std::size_t pos) {
                  if (pos == 0 || cs == 0) return std::vector<std::size_t>{};
                  const std::span<const std::size_t> candidates(laid_out.data(), prefix[pos]);
                  return nearest_points(points, candidates, partition.centroid(perm.order[pos]), cs);
                },
                parallelism)
                .value_or_throw();
  return nn;
}

}  // namespace bvecchia
