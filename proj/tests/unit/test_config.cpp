#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include <json.hpp>

#include "neardgd/config.hpp"

using namespace neardgd;
using nlohmann::json;
namespace fs = std::filesystem;

#ifndef NEARDGD_SOURCE_DIR
#error "NEARDGD_SOURCE_DIR must point at the repository root"
#endif

namespace {

json base_config() {
  return json{
      {"problem", {{"n", 5}, {"p", 4}, {"kappa", 10.0}, {"seed", 3}}},
      {"topology", {{"kind", "cyclic"}, {"c", 1}}},
      {"variants", {"dgd", "((2,-),(2,-))"}},
      {"alpha", "auto"},
      {"horizon", 50},
  };
}

void expect_config_error(const json& j, const std::string& fragment) {
  try {
    parse_run_config(j);
    FAIL("expected ConfigError for fragment: " << fragment);
  } catch (const ConfigError& e) {
    INFO(e.what());
    REQUIRE(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("a minimal config parses with defaults") {
  const RunConfig cfg = parse_run_config(base_config());
  REQUIRE(cfg.n == 5);
  REQUIRE(cfg.p == 4);
  REQUIRE(cfg.kappa == 10.0);
  REQUIRE(cfg.seed == 3);
  REQUIRE(cfg.topology.kind == TopologyKind::cyclic);
  REQUIRE(cfg.topology.describe() == "cyclic(n=5,c=1)");
  REQUIRE(cfg.weights == WeightScheme::metropolis);
  REQUIRE(cfg.variants.size() == 2);
  REQUIRE(cfg.variants[0].is_dgd);
  REQUIRE(cfg.variants[1].name == "((2,-),(2,-))");
  REQUIRE_FALSE(cfg.alpha.has_value());
  REQUIRE_FALSE(cfg.unsafe_alpha);
  REQUIRE(cfg.horizon == 50);
  REQUIRE(cfg.cost_models.size() == 1);
  REQUIRE(cfg.cost_models[0].c_c == 1.0);
  REQUIRE_FALSE(cfg.verify.any());
  REQUIRE(cfg.verify.slack == 1e-9);
  REQUIRE_FALSE(cfg.plots.enabled);
  REQUIRE_FALSE(cfg.output_dir.has_value());
}

TEST_CASE("full config round trips every field") {
  json j = base_config();
  j["alpha"] = 0.01;
  j["unsafe_alpha_override"] = true;
  j["cost_models"] = {{{"c_c", 10.0}, {"c_g", 0.5}},
                      {{"c_c", 1.0}, {"c_g", 1.0}}};
  j["output_dir"] = "results";
  j["verify"] = {{"theorem1", true}, {"lemma3", true}, {"slack", 1e-8}};
  j["plots"] = {{"enabled", true},
                {"axes", {"iters", "cost"}},
                {"marker_every", 10}};

  const RunConfig cfg = parse_run_config(j);
  REQUIRE(cfg.alpha == 0.01);
  REQUIRE(cfg.unsafe_alpha);
  REQUIRE(cfg.cost_models.size() == 2);
  REQUIRE(cfg.cost_models[0].c_c == 10.0);
  REQUIRE(cfg.cost_models[0].c_g == 0.5);
  REQUIRE(cfg.output_dir == "results");
  REQUIRE(cfg.verify.theorem1);
  REQUIRE(cfg.verify.lemma3);
  REQUIRE_FALSE(cfg.verify.theorem2);
  REQUIRE(cfg.verify.slack == 1e-8);
  REQUIRE(cfg.plots.enabled);
  REQUIRE(cfg.plots.axes == std::vector<std::string>{"iters", "cost"});
  REQUIRE(cfg.plots.marker_every == 10);
}

TEST_CASE("unknown keys are rejected at every level") {
  json j = base_config();
  j["extra"] = 1;
  expect_config_error(j, "unknown key 'extra'");

  j = base_config();
  j["problem"]["cond"] = 3;
  expect_config_error(j, "unknown key 'cond'");

  j = base_config();
  j["topology"]["radius"] = 2;
  expect_config_error(j, "unknown key 'radius'");

  j = base_config();
  j["verify"] = {{"theorem9", true}};
  expect_config_error(j, "unknown key 'theorem9'");

  j = base_config();
  j["plots"] = {{"style", "dark"}};
  expect_config_error(j, "unknown key 'style'");

  j = base_config();
  j["cost_models"] = {{{"c_c", 1.0}, {"c_g", 1.0}, {"c_x", 1.0}}};
  expect_config_error(j, "unknown key 'c_x'");
}

TEST_CASE("problem block validation") {
  json j = base_config();
  j.erase("problem");
  expect_config_error(j, "missing required block 'problem'");

  j = base_config();
  j["problem"]["n"] = 0;
  expect_config_error(j, "'n'");

  j = base_config();
  j["problem"]["p"] = 1;
  expect_config_error(j, "'p'");

  j = base_config();
  j["problem"]["kappa"] = 0.5;
  expect_config_error(j, "kappa");

  j = base_config();
  j["problem"]["seed"] = -4;
  expect_config_error(j, "seed");

  j = base_config();
  j["problem"]["n"] = "five";
  expect_config_error(j, "'n'");
}

TEST_CASE("topology block validation") {
  json j = base_config();
  j["topology"] = {{"kind", "moebius"}};
  expect_config_error(j, "unknown topology kind");

  j = base_config();
  j["topology"] = {{"kind", "cyclic"}, {"c", 1}, {"n", 7}};
  expect_config_error(j, "does not match");

  // A matching redundant n is accepted.
  j = base_config();
  j["topology"] = {{"kind", "cyclic"}, {"c", 1}, {"n", 5}};
  REQUIRE(parse_run_config(j).topology.n == 5);

  j = base_config();
  j["topology"] = {{"kind", "custom"}, {"edges", {{0, 1}, {1, 2}}}};
  expect_config_error(j, "not connected");

  j = base_config();
  j["topology"] = {{"kind", "custom"},
                   {"edges", {{0, 1}, {1, 2}, {2, 3}, {3, 4}}}};
  REQUIRE(parse_run_config(j).topology.kind == TopologyKind::custom);

  j = base_config();
  j["topology"] = {{"kind", "custom"}, {"edges", {{0}}}};
  expect_config_error(j, "pair of agent indices");

  j = base_config();
  j["topology"] = {{"kind", "star"}, {"hub", 2}};
  REQUIRE(parse_run_config(j).topology.describe() == "star(n=5,hub=2)");
}

TEST_CASE("uniform weights demand a complete graph") {
  json j = base_config();
  j["topology"] = {{"kind", "cyclic"}, {"c", 1}, {"weights", "uniform"}};
  expect_config_error(j, "uniform weights require");

  j = base_config();
  j["topology"] = {{"kind", "complete"}, {"weights", "uniform"}};
  const RunConfig cfg = parse_run_config(j);
  REQUIRE(cfg.weights == WeightScheme::uniform);
  const ConsensusMatrix w = build_consensus(cfg);
  REQUIRE(w.beta == 0.0);

  j = base_config();
  j["topology"] = {{"kind", "complete"}, {"weights", "magic"}};
  expect_config_error(j, "unknown weight scheme");
}

TEST_CASE("variant list validation") {
  json j = base_config();
  j["variants"] = json::array();
  expect_config_error(j, "non-empty");

  j = base_config();
  j["variants"] = {"((1,-)"};
  expect_config_error(j, "bad variant");

  j = base_config();
  j["variants"] = {42};
  expect_config_error(j, "must be a string");
}

TEST_CASE("alpha and horizon validation") {
  json j = base_config();
  j.erase("alpha");
  expect_config_error(j, "missing 'alpha'");

  j = base_config();
  j["alpha"] = "fast";
  expect_config_error(j, "'auto' or a number");

  j = base_config();
  j["alpha"] = -0.1;
  expect_config_error(j, "positive");

  j = base_config();
  j["horizon"] = 0;
  expect_config_error(j, "horizon");

  j = base_config();
  j.erase("horizon");
  expect_config_error(j, "horizon");
}

TEST_CASE("cost model and plot validation") {
  json j = base_config();
  j["cost_models"] = {{{"c_c", -1.0}, {"c_g", 1.0}}};
  expect_config_error(j, "non-negative");

  j = base_config();
  j["plots"] = {{"axes", {"iters", "iters"}}};
  expect_config_error(j, "duplicate plot axis");

  j = base_config();
  j["plots"] = {{"axes", {"time"}}};
  expect_config_error(j, "unknown plot axis");

  j = base_config();
  j["plots"] = {{"axes", json::array()}};
  expect_config_error(j, "non-empty");

  j = base_config();
  j["verify"] = {{"slack", -1.0}};
  expect_config_error(j, "slack");
}

TEST_CASE("load_run_config reports file level problems") {
  const fs::path missing = fs::temp_directory_path() / "neardgd_no_such.json";
  fs::remove(missing);
  REQUIRE_THROWS_AS(load_run_config(missing), ConfigError);

  const fs::path bad = fs::temp_directory_path() / "neardgd_bad.json";
  csv::write_text(bad, "{ not json");
  REQUIRE_THROWS_AS(load_run_config(bad), ConfigError);
  fs::remove(bad);
}

TEST_CASE("all shipped preset configs parse") {
  const fs::path configs = fs::path(NEARDGD_SOURCE_DIR) / "configs";
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(configs)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    INFO(entry.path().string());
    const RunConfig cfg = load_run_config(entry.path());
    REQUIRE(cfg.horizon >= 1);
    REQUIRE_FALSE(cfg.variants.empty());
    REQUIRE_NOTHROW(build_consensus(cfg));
  }
  REQUIRE(seen >= 4);
}
