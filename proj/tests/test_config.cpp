#include <doctest.h>

#include "scenerecon/canonical_json.hpp"
#include "scenerecon/config.hpp"
#include "scratch.hpp"

using namespace scenerecon;

namespace {

const std::filesystem::path kGolden =
    std::filesystem::path(SCENERECON_TEST_DATA_DIR) / "default_config.json";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults match the golden file") {
  CHECK(canonical_dump(ToolConfig{}.to_json()) == slurp(kGolden));
}

TEST_CASE("golden file carries the published constants") {
  const nlohmann::json g = read_json(kGolden);
  CHECK(g["fit"]["template_subdivisions"] == 4);
  CHECK(icosphere(g["fit"]["template_subdivisions"].get<int>()).vertices.cols() == 2562);
  CHECK(g["fit"]["edge_threshold"] == 0.2);
  CHECK(g["metrics"]["iou_threshold"] == 0.15);
  const nlohmann::json& w = g["weights"];
  CHECK(w["lambda_r"] == 10);
  for (const char* k : {"delta", "distance", "size", "yaw", "pitch", "roll", "layout_center",
                        "layout_size", "layout_yaw"}) {
    CHECK(w[k] == 1);
  }
  CHECK(w["chamfer"] == 100);
  CHECK(w["edge"] == 10);
  CHECK(w["boundary"] == 50);
  CHECK(w["cross_entropy"] == 0.01);
  CHECK(w["cooperative"] == 10);
  CHECK(w["global"] == 100);
}

TEST_CASE("partial overrides keep the other defaults") {
  const ToolConfig c = ToolConfig::from_json(
      {{"weights", {{"edge", 3}}}, {"fit", {{"max_iters", 7}}}, {"seed", 9}});
  CHECK(c.weights.edge == 3);
  CHECK(c.weights.chamfer == 100);
  CHECK(c.fit.max_iters == 7);
  CHECK(c.fit.step == 1.0);
  const FitConfig f = c.fit_config();
  CHECK(f.weights.edge == 3);
  CHECK(f.seed == 9);
  CHECK(canonical_dump(ToolConfig::from_json(c.to_json()).to_json()) ==
        canonical_dump(c.to_json()));
}

TEST_CASE("bad configs are rejected with a path") {
  const auto message = [](const nlohmann::json& j) -> std::string {
    try {
      ToolConfig::from_json(j);
    } catch (const Error& e) {
      return e.what();
    }
    return {};
  };
  CHECK(message({{"weights", {{"chamfr", 1}}}}).find("weights.chamfr") != std::string::npos);
  CHECK(message({{"colour", 1}}).find("colour") != std::string::npos);
  CHECK(message({{"fit", {{"max_iters", "ten"}}}}).find("fit.max_iters") != std::string::npos);
  CHECK_FALSE(message({{"fit", {{"backtrack", 2.0}}}}).empty());
  CHECK_FALSE(message({{"metrics", {{"iou_threshold", 1.5}}}}).empty());
  CHECK_FALSE(message({{"bins", {{"yaw", {{"edges", {1, 0}}}}}}}).empty());

  ScratchDir dir("config_bad");
  spit(dir / "c.json", "{ not json");
  CHECK_THROWS_AS(ToolConfig::load(dir / "c.json"), Error);
  CHECK_THROWS_AS(ToolConfig::load(dir / "missing.json"), Error);
}

}  // TEST_SUITE
