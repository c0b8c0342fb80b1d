#include "scenerecon/relation.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

namespace scenerecon {

Eigen::Vector4d relative_geometry(const Box2D& box_i, const Box2D& box_j, double epsilon) {
  if (!(box_i.width > 0) || !(box_i.height > 0) || !(box_j.width > 0) || !(box_j.height > 0)) {
    throw Error("relative_geometry: box width and height must be positive");
  }
  const Vec2 delta = box_j.center - box_i.center;
  return {std::log(std::abs(delta.x()) / box_i.width + epsilon),
          std::log(std::abs(delta.y()) / box_i.height + epsilon),
          std::log(box_j.width / box_i.width), std::log(box_j.height / box_i.height)};
}

Eigen::VectorXd geometry_embedding(const Box2D& box_i, const Box2D& box_j,
                                   const GeometryEmbeddingOptions& options) {
  const int per = options.dims_per_component;
  if (per < 2 || per % 2 != 0) throw Error("geometry_embedding: dims per component must be even");
  const Eigen::Vector4d rel = relative_geometry(box_i, box_j, options.epsilon);
  Eigen::VectorXd out(4 * per);
  const int freqs = per / 2;
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < freqs; ++k) {
      const double denom = std::pow(options.wavelength, static_cast<double>(k) / freqs);
      const double arg = options.scale * rel(c) / denom;
      out(c * per + 2 * k) = std::sin(arg);
      out(c * per + 2 * k + 1) = std::cos(arg);
    }
  }
  return out;
}

void RelationWeights::validate() const {
  const auto finite = [](const Eigen::MatrixXd& m) { return m.allFinite(); };
  if (query.rows() == 0 || query.cols() == 0) throw Error("relation weights: empty query map");
  if (key.rows() != query.rows() || key.cols() != query.cols() ||
      value.rows() != query.rows() || value.cols() != query.cols()) {
    throw Error("relation weights: query, key and value must share d_k x d_a");
  }
  if (geometry.rows() != 1 || geometry.cols() == 0) {
    throw Error("relation weights: geometry map must be 1 x embedding dims");
  }
  if (!finite(query) || !finite(key) || !finite(value) || !finite(geometry)) {
    throw Error("relation weights: non-finite entries");
  }
}

AttentionResult attention_sum(const Eigen::MatrixXd& features, std::span<const Box2D> boxes,
                              const RelationWeights& weights,
                              const GeometryEmbeddingOptions& options) {
  weights.validate();
  const int n = static_cast<int>(features.cols());
  if (n < 1) throw Error("attention_sum: need at least one object");
  if (static_cast<int>(boxes.size()) != n) {
    throw Error("attention_sum: " + std::to_string(n) + " features vs " +
                std::to_string(boxes.size()) + " boxes");
  }
  if (features.rows() != weights.appearance_dim()) {
    throw Error("attention_sum: feature dimension " + std::to_string(features.rows()) +
                " does not match weights (" + std::to_string(weights.appearance_dim()) + ")");
  }
  if (weights.geometry.cols() != 4 * options.dims_per_component) {
    throw Error("attention_sum: geometry map width does not match the embedding size");
  }

  const Eigen::MatrixXd q = weights.query * features;
  const Eigen::MatrixXd k = weights.key * features;
  const Eigen::MatrixXd v = weights.value * features;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(weights.key_dim()));

  AttentionResult out;
  out.weights.resize(n, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd appearance(n), gate(n);
    for (int j = 0; j < n; ++j) {
      appearance(j) = q.col(i).dot(k.col(j)) * inv_sqrt_dk;
      const Eigen::VectorXd emb = geometry_embedding(boxes[i], boxes[j], options);
      gate(j) = std::max(0.0, weights.geometry.row(0).dot(emb));
    }
    // Shift by the row maximum before exponentiating; it cancels in the ratio.
    const Eigen::ArrayXd expo = (appearance.array() - appearance.maxCoeff()).exp();
    Eigen::ArrayXd unnormalized = gate.array() * expo;
    double total = unnormalized.sum();
    if (!(total > 0.0)) {
      // Every geometry gate closed: fall back to the appearance softmax.
      unnormalized = expo;
      total = unnormalized.sum();
    }
    out.weights.row(i) = (unnormalized / total).matrix().transpose();
  }
  out.features = v * out.weights.transpose();
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.contains(name)) throw Error("relation weights: missing matrix '" + name + "'");
  const auto& m = j.at(name);
  const auto rows = m.at("rows").get<Eigen::Index>();
  const auto cols = m.at("cols").get<Eigen::Index>();
  const auto& data = m.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error("relation weights: matrix '" + name + "' has inconsistent dimensions");
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = data[r * cols + c].get<double>();
  }
  return out;
}

constexpr char kMagic[4] = {'R', 'E', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary weight bundles assume a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw Error("relation weights: truncated binary bundle");
  }
  return v;
}

}  // namespace

RelationWeights load_relation_weights_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  RelationWeights w;
  w.query = matrix_from_json(j, "query");
  w.key = matrix_from_json(j, "key");
  w.value = matrix_from_json(j, "value");
  w.geometry = matrix_from_json(j, "geometry");
  w.validate();
  return w;
}

void save_relation_weights_json(const RelationWeights& weights,
                                const std::filesystem::path& path) {
  nlohmann::json j = {{"query", matrix_to_json(weights.query)},
                      {"key", matrix_to_json(weights.key)},
                      {"value", matrix_to_json(weights.value)},
                      {"geometry", matrix_to_json(weights.geometry)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RelationWeights load_relation_weights_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(path.string() + ": not a relation weight bundle");
  }
  if (read_u32(in) != kVersion) throw Error(path.string() + ": unsupported bundle version");
  RelationWeights w;
  for (Eigen::MatrixXd* m : {&w.query, &w.key, &w.value, &w.geometry}) {
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> buf(rows, cols);
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(sizeof(double) * rows * cols))) {
      throw Error(path.string() + ": truncated binary bundle");
    }
    *m = buf;
  }
  w.validate();
  return w;
}

void save_relation_weights_binary(const RelationWeights& weights,
                                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  for (const Eigen::MatrixXd* m : {&weights.query, &weights.key, &weights.value,
                                   &weights.geometry}) {
    write_u32(out, static_cast<std::uint32_t>(m->rows()));
    write_u32(out, static_cast<std::uint32_t>(m->cols()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> buf = *m;
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(sizeof(double) * buf.size()));
  }
}

}  // namespace scenerecon
