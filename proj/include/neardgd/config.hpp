#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "neardgd/errors.hpp"
#include "neardgd/graph.hpp"
#include "neardgd/harness.hpp"

namespace neardgd {

struct VerifyOptions {
  bool theorem1 = false;  // fixed-schedule bounds (mean and per-agent)
  bool theorem2 = false;  // diminishing-phase bound
  bool lemma3 = false;    // per-iterate inequality audit (needs inner iterates)
  bool counters = false;  // cumulative work counters
  double slack = 1e-9;

  bool any() const { return theorem1 || theorem2 || lemma3 || counters; }
};

struct PlotSettings {
  bool enabled = false;
  std::vector<std::string> axes = {"iters", "grads", "comms", "cost"};
  long marker_every = 500;
};

enum class WeightScheme { metropolis, uniform };

struct RunConfig {
  int n = 0;
  int p = 0;
  double kappa = 1.0;
  std::uint64_t seed = 0;

  Topology topology;
  WeightScheme weights = WeightScheme::metropolis;

  std::vector<VariantSpec> variants;
  std::optional<double> alpha;  // empty = default step length
  bool unsafe_alpha = false;
  long horizon = 0;
  std::vector<CostModel> cost_models;
  std::optional<std::string> output_dir;
  VerifyOptions verify;
  PlotSettings plots;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (item.key() == a) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("config: unknown key '" + item.key() + "' in " +
                        where);
  }
}

inline const nlohmann::json& require_object(const nlohmann::json& j,
                                            const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("config: missing required block '") + key +
                      "'");
  const auto& v = j.at(key);
  if (!v.is_object())
    throw ConfigError(std::string("config: '") + key + "' must be an object");
  return v;
}

inline long get_integer(const nlohmann::json& obj, const char* where,
                        const char* key, long lo, long hi) {
  if (!obj.contains(key))
    throw ConfigError(std::string("config: missing '") + key + "' in " +
                      where);
  const auto& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(std::string("config: '") + key + "' in " + where +
                      " must be an integer");
  const long x = v.get<long>();
  if (x < lo || x > hi)
    throw ConfigError(std::string("config: '") + key + "' in " + where +
                      " is out of range");
  return x;
}

inline double get_number(const nlohmann::json& obj, const char* where,
                         const char* key) {
  if (!obj.contains(key))
    throw ConfigError(std::string("config: missing '") + key + "' in " +
                      where);
  const auto& v = obj.at(key);
  if (!v.is_number())
    throw ConfigError(std::string("config: '") + key + "' in " + where +
                      " must be a number");
  return v.get<double>();
}

inline bool get_bool(const nlohmann::json& obj, const char* where,
                     const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean())
    throw ConfigError(std::string("config: '") + key + "' in " + where +
                      " must be a boolean");
  return v.get<bool>();
}

inline Topology parse_topology(const nlohmann::json& t, int n_problem) {
  reject_unknown_keys(t, "'topology'", {"kind", "n", "c", "hub", "edges",
                                        "weights"});
  if (!t.contains("kind") || !t.at("kind").is_string())
    throw ConfigError("config: 'topology' needs a string 'kind'");
  if (t.contains("n")) {
    const long n_topo = get_integer(t, "'topology'", "n", 1, 1 << 20);
    if (n_topo != n_problem)
      throw ConfigError(
          "config: 'topology.n' does not match 'problem.n'");
  }
  const std::string kind = t.at("kind").get<std::string>();
  // Builder complaints (bad n/c/hub, disconnected graph) are config errors.
  const auto build = [](auto&& fn) -> Topology {
    try {
      return fn();
    } catch (const Error& e) {
      throw ConfigError(std::string("config: topology: ") + e.what());
    }
  };
  if (kind == "cyclic") {
    const long c = get_integer(t, "'topology'", "c", 1, 1 << 20);
    return build([&] { return cyclic_topology(n_problem, static_cast<int>(c)); });
  }
  if (kind == "complete")
    return build([&] { return complete_topology(n_problem); });
  if (kind == "star") {
    long hub = 0;
    if (t.contains("hub"))
      hub = get_integer(t, "'topology'", "hub", 0, n_problem - 1);
    return build([&] { return star_topology(n_problem, static_cast<int>(hub)); });
  }
  if (kind == "custom") {
    if (!t.contains("edges") || !t.at("edges").is_array())
      throw ConfigError("config: custom topology needs an 'edges' array");
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : t.at("edges")) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer())
        throw ConfigError(
            "config: each edge must be a pair of agent indices");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return build([&] { return custom_topology(n_problem, std::move(edges)); });
  }
  throw ConfigError("config: unknown topology kind '" + kind + "'");
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: root must be an object");
  detail::reject_unknown_keys(
      j, "the config root",
      {"problem", "topology", "variants", "alpha", "horizon", "cost_models",
       "output_dir", "verify", "plots", "unsafe_alpha_override"});

  RunConfig cfg;

  const auto& problem = detail::require_object(j, "problem");
  detail::reject_unknown_keys(problem, "'problem'", {"n", "p", "kappa",
                                                     "seed"});
  cfg.n = static_cast<int>(
      detail::get_integer(problem, "'problem'", "n", 1, 1 << 20));
  cfg.p = static_cast<int>(
      detail::get_integer(problem, "'problem'", "p", 2, 1 << 20));
  cfg.kappa = detail::get_number(problem, "'problem'", "kappa");
  if (!(cfg.kappa >= 1.0))
    throw ConfigError("config: 'problem.kappa' must be at least 1");
  if (!problem.contains("seed"))
    throw ConfigError("config: missing 'seed' in 'problem'");
  const auto& seed = problem.at("seed");
  const bool seed_ok =
      seed.is_number_unsigned() ||
      (seed.is_number_integer() && seed.get<long long>() >= 0);
  if (!seed_ok)
    throw ConfigError(
        "config: 'problem.seed' must be a non-negative integer");
  cfg.seed = seed.get<std::uint64_t>();

  const auto& topo = detail::require_object(j, "topology");
  cfg.topology = detail::parse_topology(topo, cfg.n);
  if (topo.contains("weights")) {
    const auto& wv = topo.at("weights");
    if (!wv.is_string())
      throw ConfigError("config: 'topology.weights' must be a string");
    const std::string scheme = wv.get<std::string>();
    if (scheme == "metropolis") {
      cfg.weights = WeightScheme::metropolis;
    } else if (scheme == "uniform") {
      if (cfg.topology.kind != TopologyKind::complete)
        throw ConfigError(
            "config: uniform weights require the complete topology");
      cfg.weights = WeightScheme::uniform;
    } else {
      throw ConfigError("config: unknown weight scheme '" + scheme + "'");
    }
  }

  if (!j.contains("variants") || !j.at("variants").is_array() ||
      j.at("variants").empty())
    throw ConfigError("config: 'variants' must be a non-empty array");
  for (const auto& v : j.at("variants")) {
    if (!v.is_string())
      throw ConfigError("config: every variant must be a string");
    try {
      cfg.variants.push_back(parse_variant(v.get<std::string>()));
    } catch (const ParseError& e) {
      throw ConfigError("config: bad variant '" + v.get<std::string>() +
                        "': " + e.what());
    }
  }

  if (!j.contains("alpha"))
    throw ConfigError("config: missing 'alpha' ('auto' or a number)");
  const auto& alpha = j.at("alpha");
  if (alpha.is_string()) {
    if (alpha.get<std::string>() != "auto")
      throw ConfigError("config: 'alpha' must be 'auto' or a number");
  } else if (alpha.is_number()) {
    const double a = alpha.get<double>();
    if (!(a > 0.0)) throw ConfigError("config: 'alpha' must be positive");
    cfg.alpha = a;
  } else {
    throw ConfigError("config: 'alpha' must be 'auto' or a number");
  }
  cfg.unsafe_alpha =
      detail::get_bool(j, "the config root", "unsafe_alpha_override", false);

  cfg.horizon = detail::get_integer(j, "the config root", "horizon", 1,
                                    100'000'000L);

  if (j.contains("cost_models")) {
    if (!j.at("cost_models").is_array())
      throw ConfigError("config: 'cost_models' must be an array");
    for (const auto& c : j.at("cost_models")) {
      if (!c.is_object())
        throw ConfigError("config: every cost model must be an object");
      detail::reject_unknown_keys(c, "'cost_models'", {"c_c", "c_g"});
      CostModel m;
      m.c_c = detail::get_number(c, "'cost_models'", "c_c");
      m.c_g = detail::get_number(c, "'cost_models'", "c_g");
      if (m.c_c < 0.0 || m.c_g < 0.0)
        throw ConfigError("config: cost coefficients must be non-negative");
      cfg.cost_models.push_back(m);
    }
  }
  if (cfg.cost_models.empty()) cfg.cost_models.push_back(CostModel{});

  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string())
      throw ConfigError("config: 'output_dir' must be a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }

  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    if (!v.is_object()) throw ConfigError("config: 'verify' must be an object");
    detail::reject_unknown_keys(
        v, "'verify'", {"theorem1", "theorem2", "lemma3", "counters",
                        "slack"});
    cfg.verify.theorem1 = detail::get_bool(v, "'verify'", "theorem1", false);
    cfg.verify.theorem2 = detail::get_bool(v, "'verify'", "theorem2", false);
    cfg.verify.lemma3 = detail::get_bool(v, "'verify'", "lemma3", false);
    cfg.verify.counters = detail::get_bool(v, "'verify'", "counters", false);
    if (v.contains("slack")) {
      cfg.verify.slack = detail::get_number(v, "'verify'", "slack");
      if (!(cfg.verify.slack >= 0.0))
        throw ConfigError("config: 'verify.slack' must be non-negative");
    }
  }

  if (j.contains("plots")) {
    const auto& p = j.at("plots");
    if (!p.is_object()) throw ConfigError("config: 'plots' must be an object");
    detail::reject_unknown_keys(p, "'plots'",
                                {"enabled", "axes", "marker_every"});
    cfg.plots.enabled = detail::get_bool(p, "'plots'", "enabled", true);
    if (p.contains("axes")) {
      if (!p.at("axes").is_array() || p.at("axes").empty())
        throw ConfigError("config: 'plots.axes' must be a non-empty array");
      cfg.plots.axes.clear();
      std::set<std::string> seen;
      for (const auto& a : p.at("axes")) {
        if (!a.is_string())
          throw ConfigError("config: every plot axis must be a string");
        const std::string axis = a.get<std::string>();
        if (axis != "iters" && axis != "grads" && axis != "comms" &&
            axis != "cost")
          throw ConfigError("config: unknown plot axis '" + axis + "'");
        if (!seen.insert(axis).second)
          throw ConfigError("config: duplicate plot axis '" + axis + "'");
        cfg.plots.axes.push_back(axis);
      }
    }
    if (p.contains("marker_every"))
      cfg.plots.marker_every =
          detail::get_integer(p, "'plots'", "marker_every", 1, 1'000'000'000L);
  }

  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " +
                      e.what());
  }
  return parse_run_config(j);
}

// Materializes the network side of a config.
inline ConsensusMatrix build_consensus(const RunConfig& cfg) {
  if (cfg.weights == WeightScheme::uniform) return uniform_weights(cfg.n);
  return metropolis_weights(cfg.topology);
}

}  // namespace neardgd
