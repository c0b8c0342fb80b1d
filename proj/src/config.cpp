#include "scenerecon/config.hpp"

#include "scenerecon/canonical_json.hpp"

namespace scenerecon {
namespace {

using nlohmann::json;

// Field table for LossWeights so serialization and parsing stay in sync.
struct WeightField {
  const char* name;
  double LossWeights::*member;
};

constexpr WeightField kWeightFields[] = {
    {"lambda_r", &LossWeights::lambda_r},
    {"delta", &LossWeights::delta},
    {"distance", &LossWeights::distance},
    {"size", &LossWeights::size},
    {"yaw", &LossWeights::yaw},
    {"pitch", &LossWeights::pitch},
    {"roll", &LossWeights::roll},
    {"layout_center", &LossWeights::layout_center},
    {"layout_size", &LossWeights::layout_size},
    {"layout_yaw", &LossWeights::layout_yaw},
    {"chamfer", &LossWeights::chamfer},
    {"edge", &LossWeights::edge},
    {"boundary", &LossWeights::boundary},
    {"cross_entropy", &LossWeights::cross_entropy},
    {"cooperative", &LossWeights::cooperative},
    {"global", &LossWeights::global},
};

json weights_to_json(const LossWeights& w) {
  json j = json::object();
  for (const auto& f : kWeightFields) j[f.name] = w.*f.member;
  return j;
}

void weights_from_json(const json& j, LossWeights& w, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const auto& f : kWeightFields) {
      if (key == f.name) {
        w.*f.member = get_number(value, where + "." + key);
        found = true;
      }
    }
    if (!found) throw Error(where + "." + key + ": unknown field");
  }
}

json bins_to_json(const BinSpec& b) { return {{"edges", b.edges}, {"periodic", b.periodic}}; }

void bins_from_json(const json& j, BinSpec& b, const std::string& where) {
  reject_unknown(j, {"edges", "periodic"}, where);
  if (j.contains("edges")) {
    const json& e = j.at("edges");
    if (!e.is_array()) throw Error(where + ".edges: expected array");
    b.edges.clear();
    for (std::size_t i = 0; i < e.size(); ++i) {
      b.edges.push_back(get_number(e[i], where + ".edges[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("periodic")) b.periodic = get_bool(j.at("periodic"), where + ".periodic");
  try {
    b.validate();
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
}

const char* sampling_name(EdgeSampling s) {
  return s == EdgeSampling::kUniform ? "uniform" : "seeded_random";
}

template <typename T>
void read_int(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = static_cast<T>(get_integer(j.at(key), where + "." + key));
}

void read_double(const json& j, const char* key, double& out, const std::string& where) {
  if (j.contains(key)) out = get_number(j.at(key), where + "." + key);
}

void read_bool(const json& j, const char* key, bool& out, const std::string& where) {
  if (j.contains(key)) out = get_bool(j.at(key), where + "." + key);
}

}  // namespace

FitConfig ToolConfig::fit_config() const {
  FitConfig out = fit;
  out.weights = weights;
  out.seed = seed;
  out.edge_scoring.seed = seed;
  return out;
}

void ToolConfig::validate() const {
  fit.validate();
  for (const BinSpec* b : {&bins.yaw, &bins.layout_yaw, &bins.pitch, &bins.roll, &bins.distance}) {
    b->validate();
  }
  if (!(metrics.iou_threshold >= 0 && metrics.iou_threshold < 1)) {
    throw Error("config: metrics.iou_threshold must be in [0, 1)");
  }
  if (metrics.ap_interpolation != "all_point") {
    throw Error("config: metrics.ap_interpolation must be \"all_point\"");
  }
  if (metrics.scale_error != "mean_abs_ratio_minus_one") {
    throw Error("config: metrics.scale_error must be \"mean_abs_ratio_minus_one\"");
  }
  if (metrics.surface_samples < 1) throw Error("config: metrics.surface_samples must be >= 1");
  if (metrics.icp.max_iters < 1) throw Error("config: metrics.icp.max_iters must be >= 1");
  const double t = fit.edge_scoring.threshold;
  if (!(t >= 0 && t <= 1)) throw Error("config: fit.edge_threshold must be in [0, 1]");
  if (fit.edge_scoring.samples_per_edge < 1) {
    throw Error("config: fit.samples_per_edge must be >= 1");
  }
  if (fit.target_neighbors < 2) throw Error("config: fit.target_neighbors must be >= 2");
}

json ToolConfig::to_json() const {
  json j;
  j["weights"] = weights_to_json(weights);
  j["bins"] = {{"yaw", bins_to_json(bins.yaw)},
               {"layout_yaw", bins_to_json(bins.layout_yaw)},
               {"pitch", bins_to_json(bins.pitch)},
               {"roll", bins_to_json(bins.roll)},
               {"distance", bins_to_json(bins.distance)}};
  j["fit"] = {{"max_iters", fit.max_iters},
              {"step", fit.step},
              {"backtrack", fit.backtrack},
              {"tolerance", fit.tolerance},
              {"template_subdivisions", fit.template_subdivisions},
              {"edge_threshold", fit.edge_scoring.threshold},
              {"samples_per_edge", fit.edge_scoring.samples_per_edge},
              {"edge_sampling", sampling_name(fit.edge_scoring.sampling)},
              {"target_neighbors", fit.target_neighbors},
              {"refine_iterations", fit.refine_iterations},
              {"refine_step", fit.refine_step},
              {"mesh_samples", fit.mesh_samples},
              {"scene_step", fit.scene_step}};
  j["metrics"] = {{"iou_threshold", metrics.iou_threshold},
                  {"ap_interpolation", metrics.ap_interpolation},
                  {"scale_error", metrics.scale_error},
                  {"pose_thresholds",
                   {{"translation", metrics.pose.translation},
                    {"rotation_deg", metrics.pose.rotation},
                    {"scale", metrics.pose.scale}}},
                  {"surface_samples", metrics.surface_samples},
                  {"icp",
                   {{"max_iters", metrics.icp.max_iters},
                    {"tolerance", metrics.icp.tolerance},
                    {"with_scale", metrics.icp.with_scale},
                    {"multi_start", metrics.icp.multi_start}}}};
  j["seed"] = seed;
  return j;
}

ToolConfig ToolConfig::from_json(const json& doc, const ToolConfig& base) {
  ToolConfig c = base;
  const std::string root = "$";
  reject_unknown(doc, {"weights", "bins", "fit", "metrics", "seed"}, root);
  if (doc.contains("weights")) weights_from_json(doc.at("weights"), c.weights, "$.weights");
  if (doc.contains("bins")) {
    const json& b = doc.at("bins");
    reject_unknown(b, {"yaw", "layout_yaw", "pitch", "roll", "distance"}, "$.bins");
    const std::pair<const char*, BinSpec*> specs[] = {{"yaw", &c.bins.yaw},
                                                      {"layout_yaw", &c.bins.layout_yaw},
                                                      {"pitch", &c.bins.pitch},
                                                      {"roll", &c.bins.roll},
                                                      {"distance", &c.bins.distance}};
    for (const auto& [name, spec] : specs) {
      if (b.contains(name)) bins_from_json(b.at(name), *spec, std::string("$.bins.") + name);
    }
  }
  if (doc.contains("fit")) {
    const json& f = doc.at("fit");
    const std::string w = "$.fit";
    reject_unknown(f,
                   {"max_iters", "step", "backtrack", "tolerance", "template_subdivisions",
                    "edge_threshold", "samples_per_edge", "edge_sampling", "target_neighbors",
                    "refine_iterations", "refine_step", "mesh_samples", "scene_step"},
                   w);
    read_int(f, "max_iters", c.fit.max_iters, w);
    read_double(f, "step", c.fit.step, w);
    read_double(f, "backtrack", c.fit.backtrack, w);
    read_double(f, "tolerance", c.fit.tolerance, w);
    read_int(f, "template_subdivisions", c.fit.template_subdivisions, w);
    read_double(f, "edge_threshold", c.fit.edge_scoring.threshold, w);
    read_int(f, "samples_per_edge", c.fit.edge_scoring.samples_per_edge, w);
    if (f.contains("edge_sampling")) {
      const std::string s = get_string(f.at("edge_sampling"), w + ".edge_sampling");
      if (s == "uniform") {
        c.fit.edge_scoring.sampling = EdgeSampling::kUniform;
      } else if (s == "seeded_random") {
        c.fit.edge_scoring.sampling = EdgeSampling::kSeededRandom;
      } else {
        throw Error(w + ".edge_sampling: expected \"uniform\" or \"seeded_random\"");
      }
    }
    read_int(f, "target_neighbors", c.fit.target_neighbors, w);
    read_int(f, "refine_iterations", c.fit.refine_iterations, w);
    read_double(f, "refine_step", c.fit.refine_step, w);
    read_int(f, "mesh_samples", c.fit.mesh_samples, w);
    read_double(f, "scene_step", c.fit.scene_step, w);
  }
  if (doc.contains("metrics")) {
    const json& m = doc.at("metrics");
    const std::string w = "$.metrics";
    reject_unknown(m,
                   {"iou_threshold", "ap_interpolation", "scale_error", "pose_thresholds",
                    "surface_samples", "icp"},
                   w);
    read_double(m, "iou_threshold", c.metrics.iou_threshold, w);
    if (m.contains("ap_interpolation")) {
      c.metrics.ap_interpolation = get_string(m.at("ap_interpolation"), w + ".ap_interpolation");
    }
    if (m.contains("scale_error")) {
      c.metrics.scale_error = get_string(m.at("scale_error"), w + ".scale_error");
    }
    if (m.contains("pose_thresholds")) {
      const json& p = m.at("pose_thresholds");
      const std::string pw = w + ".pose_thresholds";
      reject_unknown(p, {"translation", "rotation_deg", "scale"}, pw);
      read_double(p, "translation", c.metrics.pose.translation, pw);
      read_double(p, "rotation_deg", c.metrics.pose.rotation, pw);
      read_double(p, "scale", c.metrics.pose.scale, pw);
    }
    read_int(m, "surface_samples", c.metrics.surface_samples, w);
    if (m.contains("icp")) {
      const json& i = m.at("icp");
      const std::string iw = w + ".icp";
      reject_unknown(i, {"max_iters", "tolerance", "with_scale", "multi_start"}, iw);
      read_int(i, "max_iters", c.metrics.icp.max_iters, iw);
      read_double(i, "tolerance", c.metrics.icp.tolerance, iw);
      read_bool(i, "with_scale", c.metrics.icp.with_scale, iw);
      read_bool(i, "multi_start", c.metrics.icp.multi_start, iw);
    }
  }
  if (doc.contains("seed")) {
    const long long s = get_integer(doc.at("seed"), "$.seed");
    if (s < 0) throw Error("$.seed: must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  c.validate();
  return c;
}

ToolConfig ToolConfig::load(const std::filesystem::path& path, const ToolConfig& base) {
  const json doc = read_json(path);
  try {
    return from_json(doc, base);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

ToolConfig ToolConfig::from_json(const json& doc) { return from_json(doc, ToolConfig{}); }

ToolConfig ToolConfig::load(const std::filesystem::path& path) { return load(path, ToolConfig{}); }

}  // namespace scenerecon
