#include "scenerecon/mesh.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>

namespace scenerecon {
namespace {

std::pair<int, int> ordered(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

// Union-find over face indices.
struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

EdgeTopology edge_topology(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> counts;
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      ++counts[ordered(mesh.faces(k, f), mesh.faces((k + 1) % 3, f))];
    }
  }
  EdgeTopology out;
  out.edges.resize(2, static_cast<Eigen::Index>(counts.size()));
  out.face_count.reserve(counts.size());
  int i = 0;
  for (const auto& [edge, count] : counts) {
    out.edges(0, i) = edge.first;
    out.edges(1, i) = edge.second;
    out.face_count.push_back(count);
    ++i;
  }
  return out;
}

Edges unique_edges(const Mesh& mesh) { return edge_topology(mesh).edges; }

void validate(const Mesh& mesh) {
  const int n = mesh.vertex_count();
  for (int f = 0; f < mesh.face_count(); ++f) {
    const int a = mesh.faces(0, f), b = mesh.faces(1, f), c = mesh.faces(2, f);
    for (int v : {a, b, c}) {
      if (v < 0 || v >= n) {
        throw Error("mesh: face " + std::to_string(f) + " references vertex " +
                    std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
      }
    }
    if (a == b || b == c || a == c) {
      throw Error("mesh: face " + std::to_string(f) + " is degenerate");
    }
  }
}

int connected_components(const Mesh& mesh) {
  const int nf = mesh.face_count();
  if (nf == 0) return 0;
  DisjointSets sets(nf);
  std::vector<int> owner(mesh.vertex_count(), -1);
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      int& o = owner[mesh.faces(k, f)];
      if (o < 0) {
        o = f;
      } else {
        sets.unite(o, f);
      }
    }
  }
  int count = 0;
  for (int f = 0; f < nf; ++f) count += sets.find(f) == f;
  return count;
}

Mesh compact(const Mesh& mesh) {
  std::vector<int> remap(mesh.vertex_count(), -1);
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) remap[mesh.faces(k, f)] = 0;
  }
  int next = 0;
  for (int& r : remap) {
    if (r == 0) r = next++;
  }
  Mesh out;
  out.vertices.resize(3, next);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (remap[v] >= 0) out.vertices.col(remap[v]) = mesh.vertices.col(v);
  }
  out.faces.resize(3, mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) out.faces(k, f) = remap[mesh.faces(k, f)];
  }
  return out;
}

Mesh icosphere(int subdivisions) {
  if (subdivisions < 0) throw Error("icosphere: subdivisions must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = ordered(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint(f(0), f(1));
      const int bc = midpoint(f(1), f(2));
      const int ca = midpoint(f(2), f(0));
      next.emplace_back(f(0), ab, ca);
      next.emplace_back(f(1), bc, ab);
      next.emplace_back(f(2), ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    faces = std::move(next);
  }

  Mesh mesh;
  mesh.vertices.resize(3, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.col(i) = verts[i];
  mesh.faces.resize(3, static_cast<Eigen::Index>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) mesh.faces.col(i) = faces[i];
  return mesh;
}

std::vector<BoundaryLoop> boundary_loops(const Mesh& mesh) {
  const EdgeTopology topo = edge_topology(mesh);
  std::map<int, std::vector<int>> adjacency;  // vertex -> boundary neighbors
  std::map<std::pair<int, int>, bool> used;
  for (int e = 0; e < topo.edges.cols(); ++e) {
    if (topo.face_count[e] != 1) continue;
    const int a = topo.edges(0, e), b = topo.edges(1, e);
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
    used[{a, b}] = false;
  }
  for (auto& [v, nbrs] : adjacency) std::sort(nbrs.begin(), nbrs.end());

  auto take_next = [&](int v) {
    for (int n : adjacency[v]) {
      auto it = used.find(ordered(v, n));
      if (!it->second) {
        it->second = true;
        return n;
      }
    }
    return -1;
  };
  auto walk = [&](int start, bool stop_at_junction) {
    BoundaryLoop loop;
    loop.vertices.push_back(start);
    int current = start;
    while (true) {
      const int next = take_next(current);
      if (next < 0) break;
      if (next == start) {
        loop.closed = true;
        break;
      }
      loop.vertices.push_back(next);
      current = next;
      if (stop_at_junction && adjacency[current].size() != 2) break;
    }
    return loop;
  };

  std::vector<BoundaryLoop> loops;
  // Chains first: they start and end at vertices whose boundary degree is
  // not two (open ends or pinch points).
  for (const auto& [v, nbrs] : adjacency) {
    if (nbrs.size() == 2) continue;
    while (true) {
      BoundaryLoop loop = walk(v, true);
      if (loop.vertices.size() < 2) break;
      loops.push_back(std::move(loop));
    }
  }
  for (const auto& [v, nbrs] : adjacency) {
    BoundaryLoop loop = walk(v, true);
    if (loop.vertices.size() >= 2) loops.push_back(std::move(loop));
  }
  return loops;
}

Mesh refine_boundary(const Mesh& mesh, int iterations, double step) {
  Mesh out = mesh;
  if (step == 0.0 || iterations <= 0) return out;
  const std::vector<BoundaryLoop> loops = boundary_loops(mesh);
  if (loops.empty()) return out;

  // Each (prev, vertex, next) triple along a loop is one smoothing term.
  struct Term {
    int prev, vertex, next;
  };
  std::vector<Term> terms;
  for (const auto& loop : loops) {
    const int n = static_cast<int>(loop.vertices.size());
    for (int i = 0; i < n; ++i) {
      if (!loop.closed && (i == 0 || i == n - 1)) continue;
      terms.push_back({loop.vertices[(i + n - 1) % n], loop.vertices[i],
                       loop.vertices[(i + 1) % n]});
    }
  }
  std::vector<int> multiplicity(mesh.vertex_count(), 0);
  for (const auto& t : terms) ++multiplicity[t.vertex];

  for (int it = 0; it < iterations; ++it) {
    Points displacement = Points::Zero(3, out.vertices.cols());
    for (const auto& t : terms) {
      const Vec3 mid = 0.5 * (out.vertices.col(t.prev) + out.vertices.col(t.next));
      displacement.col(t.vertex) += (mid - out.vertices.col(t.vertex)) / multiplicity[t.vertex];
    }
    out.vertices += step * displacement;
  }
  return out;
}

double local_density(const Points& points, const std::vector<int>& neighborhood) {
  const std::size_t k = neighborhood.size();
  if (k < 2) throw Error("local_density: neighborhood needs at least 2 points");
  double largest = 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < k; ++n) {
      if (n == m) continue;
      nearest = std::min(
          nearest, (points.col(neighborhood[m]) - points.col(neighborhood[n])).norm());
    }
    largest = std::max(largest, nearest);
  }
  return largest;
}

double local_density(int q, const TargetSurface& target) {
  if (q < 0 || q >= static_cast<int>(target.neighbors.size())) {
    throw Error("local_density: point index out of range");
  }
  return local_density(target.points, target.neighbors[q]);
}

namespace {

TargetSurface finish_target(const Points& points, std::vector<std::vector<int>> neighbors) {
  TargetSurface target;
  target.points = points;
  target.neighbors = std::move(neighbors);
  target.density.resize(target.neighbors.size());
  for (std::size_t q = 0; q < target.neighbors.size(); ++q) {
    target.density[q] = local_density(target.points, target.neighbors[q]);
  }
  target.index = std::make_shared<const PointIndex>(points);
  return target;
}

}  // namespace

TargetSurface target_from_points(const Points& points, int k) {
  if (points.cols() < 2) throw Error("target surface: need at least 2 points");
  const PointIndex index(points);
  const int kk = std::min<int>(std::max(k, 2), static_cast<int>(points.cols()));
  std::vector<std::vector<int>> neighbors(points.cols());
  for (int q = 0; q < points.cols(); ++q) {
    // The query point is an indexed point, so it is (or ties with) the
    // first result; force it to the front so N(q) always contains q.
    auto knn = index.k_nearest(points.col(q), kk);
    auto& set = neighbors[q];
    set.push_back(q);
    for (const auto& nb : knn) {
      if (nb.index != q && static_cast<int>(set.size()) < kk) set.push_back(nb.index);
    }
  }
  return finish_target(points, std::move(neighbors));
}

TargetSurface target_from_mesh(const Mesh& mesh) {
  validate(mesh);
  std::vector<std::vector<int>> neighbors(mesh.vertex_count());
  for (int v = 0; v < mesh.vertex_count(); ++v) neighbors[v].push_back(v);
  const Edges edges = unique_edges(mesh);
  for (int e = 0; e < edges.cols(); ++e) {
    neighbors[edges(0, e)].push_back(edges(1, e));
    neighbors[edges(1, e)].push_back(edges(0, e));
  }
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (neighbors[v].size() < 2) {
      throw Error("target surface: vertex " + std::to_string(v) + " has no neighbors");
    }
  }
  return finish_target(mesh.vertices, std::move(neighbors));
}

PointClassification classify_point(const Vec3& p, const TargetSurface& target) {
  if (!target.index) throw Error("classify_point: empty target surface");
  const Neighbor nb = target.index->nearest(p);
  PointClassification out;
  out.nearest = nb.index;
  out.distance = nb.distance;
  out.density = target.density[nb.index];
  out.close = !(nb.distance > out.density);
  return out;
}

int EdgeScoreReport::cut_count() const {
  return static_cast<int>(std::count(cut.begin(), cut.end(), true));
}

std::vector<double> edge_sample_parameters(int samples, EdgeSampling sampling,
                                           std::uint64_t seed, int edge_index) {
  std::vector<double> t(samples);
  if (sampling == EdgeSampling::kUniform) {
    for (int i = 0; i < samples; ++i) t[i] = (i + 0.5) / samples;
    return t;
  }
  // One generator per edge keeps results independent of evaluation order.
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(edge_index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : t) {
    do {
      v = unit(rng);
    } while (v <= 0.0);
  }
  return t;
}

EdgeScoreReport score_edges(const Mesh& mesh, const TargetSurface& target,
                            const EdgeScoreOptions& options) {
  if (options.samples_per_edge < 1) throw Error("score_edges: samples_per_edge must be >= 1");
  EdgeScoreReport report;
  report.edges = unique_edges(mesh);
  report.threshold = options.threshold;
  const int ne = static_cast<int>(report.edges.cols());
  report.score.resize(ne);
  report.samples.assign(ne, options.samples_per_edge);
  report.cut.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const Vec3 a = mesh.vertices.col(report.edges(0, e));
    const Vec3 b = mesh.vertices.col(report.edges(1, e));
    const auto params =
        edge_sample_parameters(options.samples_per_edge, options.sampling, options.seed, e);
    int close = 0;
    for (double t : params) close += classify_point(a + t * (b - a), target).close;
    report.score[e] = static_cast<double>(close) / options.samples_per_edge;
    report.cut[e] = report.score[e] < options.threshold;
  }
  return report;
}

Mesh cut_edges(const Mesh& mesh, const EdgeScoreReport& report, double threshold) {
  if (threshold < 0.0 || threshold > 1.0) throw Error("cut_edges: threshold outside [0, 1]");
  std::map<std::pair<int, int>, bool> cut;
  for (int e = 0; e < report.edges.cols(); ++e) {
    if (report.score[e] < threshold) cut[{report.edges(0, e), report.edges(1, e)}] = true;
  }
  std::vector<int> kept;
  kept.reserve(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    bool remove = false;
    for (int k = 0; k < 3 && !remove; ++k) {
      remove = cut.count(ordered(mesh.faces(k, f), mesh.faces((k + 1) % 3, f))) > 0;
    }
    if (!remove) kept.push_back(f);
  }
  if (kept.empty()) return Mesh{Points(3, 0), Faces(3, 0)};
  Mesh trimmed;
  trimmed.vertices = mesh.vertices;
  trimmed.faces.resize(3, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) trimmed.faces.col(i) = mesh.faces.col(kept[i]);
  return compact(trimmed);
}

}  // namespace scenerecon
