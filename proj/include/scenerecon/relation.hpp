#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scenerecon/geomcore.hpp"

// Object relation "attention sum": each object's relational feature is a
// weighted sum of every object's value projection, weighted by appearance
// similarity and gated by relative 2D box geometry. Self-pairs are included.

namespace scenerecon {

struct GeometryEmbeddingOptions {
  int dims_per_component{16};  // four components, 64 dims in total by default
  double wavelength{1000.0};
  double scale{100.0};
  double epsilon{1e-3};
};

// Sinusoidal encoding of (log(|dx|/w_i + eps), log(|dy|/h_i + eps),
// log(w_j/w_i), log(h_j/h_i)). For each component, entry 2k holds
// sin(scale * x / wavelength^(2k/dims)) and entry 2k+1 the matching cosine.
Eigen::VectorXd geometry_embedding(const Box2D& box_i, const Box2D& box_j,
                                   const GeometryEmbeddingOptions& options = {});

// The raw 4-vector of relative geometry fed to the encoder.
Eigen::Vector4d relative_geometry(const Box2D& box_i, const Box2D& box_j, double epsilon);

struct RelationWeights {
  Eigen::MatrixXd query;     // d_k x d_a
  Eigen::MatrixXd key;       // d_k x d_a
  Eigen::MatrixXd value;     // d_k x d_a
  Eigen::MatrixXd geometry;  // 1 x embedding dims

  int appearance_dim() const { return static_cast<int>(query.cols()); }
  int key_dim() const { return static_cast<int>(query.rows()); }
  void validate() const;
};

struct AttentionResult {
  Eigen::MatrixXd features;  // d_k x N, column i is object i's relational feature
  Eigen::MatrixXd weights;   // N x N, row i holds omega_ij
};

// features: d_a x N, one column per object.
AttentionResult attention_sum(const Eigen::MatrixXd& features, std::span<const Box2D> boxes,
                              const RelationWeights& weights,
                              const GeometryEmbeddingOptions& options = {});

// JSON bundle: {"query": {"rows", "cols", "data": [row-major]}, "key", "value",
// "geometry"}.
RelationWeights load_relation_weights_json(const std::filesystem::path& path);
void save_relation_weights_json(const RelationWeights& weights,
                                const std::filesystem::path& path);

// Flat binary bundle: magic "RELW", uint32 version 1, then for query, key,
// value and geometry in that order: uint32 rows, uint32 cols and rows*cols
// little-endian float64 values in row-major order.
RelationWeights load_relation_weights_binary(const std::filesystem::path& path);
void save_relation_weights_binary(const RelationWeights& weights,
                                  const std::filesystem::path& path);

}  // namespace scenerecon
