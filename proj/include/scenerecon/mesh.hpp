#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "scenerecon/common.hpp"
#include "scenerecon/spatial.hpp"

namespace scenerecon {

using Faces = Eigen::Matrix3Xi;
using Edges = Eigen::Matrix2Xi;

// Triangle mesh with column-wise vertices and faces. An empty mesh (no
// vertices, no faces) is the explicit result of removing every face.
struct Mesh {
  Points vertices;
  Faces faces;

  int vertex_count() const { return static_cast<int>(vertices.cols()); }
  int face_count() const { return static_cast<int>(faces.cols()); }
  bool empty() const { return faces.cols() == 0; }
};

// Unique undirected edges (first index < second, sorted lexicographically)
// and how many faces touch each one.
struct EdgeTopology {
  Edges edges;
  std::vector<int> face_count;
};

EdgeTopology edge_topology(const Mesh& mesh);
Edges unique_edges(const Mesh& mesh);

// Throws Error on out-of-range or degenerate faces.
void validate(const Mesh& mesh);

// Number of face-connected components; isolated vertices are ignored.
int connected_components(const Mesh& mesh);

// Drops vertices that no face references and remaps face indices.
Mesh compact(const Mesh& mesh);

// Subdivided icosahedron on the unit sphere: 10 * 4^k + 2 vertices.
Mesh icosphere(int subdivisions);

// A maximal chain of boundary edges. Closed loops list each vertex once;
// open chains list both end vertices.
struct BoundaryLoop {
  std::vector<int> vertices;
  bool closed{false};

  int edge_count() const {
    const int n = static_cast<int>(vertices.size());
    return closed ? n : n - 1;
  }
};

std::vector<BoundaryLoop> boundary_loops(const Mesh& mesh);

// Moves every boundary vertex toward the midpoint of its two loop neighbors
// by `step`, `iterations` times. Interior vertices stay put.
Mesh refine_boundary(const Mesh& mesh, int iterations, double step);

// Ground-truth samples with a neighbor set per point and a cached local
// density. Neighbor sets include the point itself.
struct TargetSurface {
  Points points;
  std::vector<std::vector<int>> neighbors;
  std::vector<double> density;
  std::shared_ptr<const PointIndex> index;
};

inline constexpr int kDefaultTargetNeighbors = 10;

// Neighbor sets are the k nearest target points (the point itself first).
TargetSurface target_from_points(const Points& points, int k = kDefaultTargetNeighbors);
// Neighbor sets are each vertex plus its 1-ring.
TargetSurface target_from_mesh(const Mesh& mesh);

// Largest nearest-neighbor gap inside the neighborhood of point q:
// max over m in N(q) of min over n in N(q), n != m, of |q_m - q_n|.
double local_density(int q, const TargetSurface& target);
double local_density(const Points& points, const std::vector<int>& neighborhood);

struct PointClassification {
  bool close{false};
  int nearest{-1};
  double distance{0};
  double density{0};
};

// True when the nearest target point q lies within D(q) of p (ties keep).
PointClassification classify_point(const Vec3& p, const TargetSurface& target);

enum class EdgeSampling { kUniform, kSeededRandom };

inline constexpr double kDefaultCutThreshold = 0.2;
inline constexpr int kDefaultSamplesPerEdge = 5;

struct EdgeScoreReport {
  Edges edges;
  std::vector<double> score;
  std::vector<int> samples;
  std::vector<bool> cut;
  double threshold{kDefaultCutThreshold};

  int cut_count() const;
};

struct EdgeScoreOptions {
  int samples_per_edge{kDefaultSamplesPerEdge};
  EdgeSampling sampling{EdgeSampling::kUniform};
  std::uint64_t seed{0};
  double threshold{kDefaultCutThreshold};
};

// Mean close/far classification of points sampled on the open segment of
// every edge. Uniform sampling uses parameters (i + 0.5) / k.
EdgeScoreReport score_edges(const Mesh& mesh, const TargetSurface& target,
                            const EdgeScoreOptions& options = {});

// Sample parameters along an edge for the given mode; exposed for tests.
std::vector<double> edge_sample_parameters(int samples, EdgeSampling sampling,
                                           std::uint64_t seed, int edge_index);

// Removes every face touching an edge whose score is below `threshold`,
// then drops isolated vertices. Returns an empty mesh if nothing is left.
Mesh cut_edges(const Mesh& mesh, const EdgeScoreReport& report,
               double threshold = kDefaultCutThreshold);

}  // namespace scenerecon
