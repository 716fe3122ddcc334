#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "neardgd/harness.hpp"

using namespace neardgd;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("neardgd_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("variant notation round trips") {
  for (const std::string s :
       {"dgd", "((1,-),(1,-))", "((3,k),(1,k))", "((2,10-),(1,500+))",
        "((5,-),(3,2+))", "((4,7-),(2,-))"}) {
    const VariantSpec v = parse_variant(s);
    REQUIRE(to_string(v) == s);
    REQUIRE(v.name == s);
  }
  REQUIRE(parse_variant("DGD").name == "dgd");
}

TEST_CASE("variant notation maps onto schedule families") {
  const VariantSpec a = parse_variant("((3,k),(1,k))");
  REQUIRE_FALSE(a.is_dgd);
  REQUIRE(a.tg == Schedule::decrease_to_one(3));
  REQUIRE(a.tc == Schedule::linear_in_k());

  const VariantSpec b = parse_variant("((2,10-),(4,500+))");
  REQUIRE(b.tg == Schedule::decrease_every(2, 10));
  REQUIRE(b.tc == Schedule::increase_every(4, 500));

  const VariantSpec c = parse_variant("((5,-),(2,-))");
  REQUIRE(c.tg == Schedule::constant(5));
  REQUIRE(c.tc == Schedule::constant(2));

  const VariantSpec d = parse_variant("dgd");
  REQUIRE(d.is_dgd);
}

TEST_CASE("variant parser reports the offending position") {
  const auto position_of = [](const std::string& text) {
    try {
      parse_variant(text);
    } catch (const ParseError& e) {
      return static_cast<long>(e.position);
    }
    return -1L;
  };
  REQUIRE(position_of("") == 0);
  REQUIRE(position_of("((1,-)") == 6);          // missing second pair
  REQUIRE(position_of("((0,-),(1,-))") == 2);   // zero count
  REQUIRE(position_of("((1,-),(2,k))") == 10);  // growth must start at 1
  REQUIRE(position_of("((1,-),(1,-))x") == 13); // trailing characters
  REQUIRE(position_of("((1,x),(1,-))") == 4);   // unknown rule
  REQUIRE(position_of("((1,-),(1,0+))") == 10); // zero period
  REQUIRE(position_of("((1,9999999999-),(1,-))") == 4);  // number too large
  REQUIRE(position_of("near-dgd") == 0);
}

TEST_CASE("unrepresentable schedules refuse to serialize") {
  VariantSpec v;
  v.tg = Schedule::linear_in_k();  // no gradient-side notation for this
  REQUIRE_THROWS_AS(to_string(v), InvalidParameterError);
}

TEST_CASE("run_experiment summarizes a trajectory") {
  const ProblemInstance inst = generate_quadratic(5, 4, 10.0, 3);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(5, 1));
  const VariantSpec v = parse_variant("((2,-),(2,-))");
  const CostModel cost{3.0, 2.0};
  const double alpha = default_alpha(inst);
  const TrajectoryRecord rec = run_experiment(inst, w, v, alpha, cost, 50);

  REQUIRE(rec.rows.size() == 51);
  REQUIRE(rec.meta.variant == "((2,-),(2,-))");
  REQUIRE(rec.meta.alpha == alpha);
  REQUIRE(rec.meta.beta == w.beta);
  REQUIRE(rec.meta.topology == "cyclic(n=5,c=1)");
  REQUIRE(rec.meta.kappa == 10.0);

  // Start row: all agents at the origin.
  REQUIRE(rec.rows[0].k == 0);
  REQUIRE(rec.rows[0].rel_error == 1.0);  // |0 - opt| / |opt| exactly
  REQUIRE(rec.rows[0].consensus_error == 0.0);
  REQUIRE(rec.rows[0].cum_cost == 0.0);

  long prev_comm = -1;
  for (const auto& r : rec.rows) {
    REQUIRE(r.cum_comm > prev_comm);
    prev_comm = r.cum_comm;
    REQUIRE(r.cum_cost == 3.0 * double(r.cum_comm) + 2.0 * double(r.cum_grad));
  }
  REQUIRE(rec.rows.back().cum_comm == 100);
  REQUIRE(rec.rows.back().cum_grad == 100);
  // Fixed schedules settle into a strictly positive plateau below the start.
  REQUIRE(rec.rows.back().rel_error > 0.0);
  REQUIRE(rec.rows.back().rel_error < 0.5);
  REQUIRE(rec.rows.back().rel_error < rec.rows[2].rel_error);
}

TEST_CASE("run_experiment with growing consensus converges to the optimum") {
  const ProblemInstance inst = generate_quadratic(5, 4, 10.0, 3);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(5, 1));
  const TrajectoryRecord rec =
      run_experiment(inst, w, parse_variant("((3,k),(1,k))"),
                     default_alpha(inst), CostModel{}, 150);
  REQUIRE(rec.rows.back().rel_error < 1e-9);
}

TEST_CASE("sweep enumerates variant x alpha x cost with stable ids") {
  const ProblemInstance inst = generate_quadratic(4, 4, 10.0, 5);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(4, 1));
  const std::vector<VariantSpec> variants = {parse_variant("dgd"),
                                             parse_variant("((1,-),(1,-))")};
  const double a0 = 0.5 * default_alpha(inst);
  const double a1 = default_alpha(inst);
  const std::vector<CostModel> costs = {{1.0, 1.0}, {100.0, 1.0}};

  const SweepResult res = sweep(inst, w, variants, {a0, a1}, costs, 30);
  REQUIRE(res.failures.empty());
  REQUIRE(res.records.size() == 8);
  for (int i = 0; i < 8; ++i) REQUIRE(res.records[std::size_t(i)].meta.run_id == i);

  // Nested order: variant, then alpha, then cost model.
  REQUIRE(res.records[0].meta.variant == "dgd");
  REQUIRE(res.records[0].meta.alpha == a0);
  REQUIRE(res.records[0].meta.c_c == 1.0);
  REQUIRE(res.records[1].meta.c_c == 100.0);
  REQUIRE(res.records[2].meta.alpha == a1);
  REQUIRE(res.records[4].meta.variant == "((1,-),(1,-))");

  // Cost models share one trajectory: identical error columns, scaled cost.
  for (std::size_t r = 0; r < res.records[0].rows.size(); ++r) {
    REQUIRE(res.records[0].rows[r].rel_error == res.records[1].rows[r].rel_error);
    REQUIRE(res.records[0].rows[r].consensus_error ==
            res.records[1].rows[r].consensus_error);
    REQUIRE(res.records[1].rows[r].cum_cost ==
            100.0 * double(res.records[1].rows[r].cum_comm) +
                double(res.records[1].rows[r].cum_grad));
  }
}

TEST_CASE("sweep defaults alpha when none is given") {
  const ProblemInstance inst = generate_quadratic(4, 4, 10.0, 5);
  const ConsensusMatrix w = uniform_weights(4);
  const SweepResult res =
      sweep(inst, w, {parse_variant("((1,-),(1,-))")}, {}, {}, 10);
  REQUIRE(res.records.size() == 1);
  REQUIRE(res.records[0].meta.alpha == default_alpha(inst));
  REQUIRE(res.records[0].meta.c_c == 1.0);
  REQUIRE(res.records[0].meta.c_g == 1.0);
}

TEST_CASE("parallel sweep is a pure reordering of the serial one") {
  const ProblemInstance inst = generate_quadratic(6, 5, 100.0, 2);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(6, 2));
  const std::vector<VariantSpec> variants = {
      parse_variant("dgd"), parse_variant("((1,-),(1,-))"),
      parse_variant("((2,-),(2,-))"), parse_variant("((3,k),(1,k))")};
  const SweepResult serial = sweep(inst, w, variants, {}, {}, 60, 1);
  const SweepResult parallel = sweep(inst, w, variants, {}, {}, 60, 4);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    const auto& a = serial.records[i];
    const auto& b = parallel.records[i];
    REQUIRE(a.meta.run_id == b.meta.run_id);
    REQUIRE(a.meta.variant == b.meta.variant);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
      REQUIRE(a.rows[r].rel_error == b.rows[r].rel_error);  // bitwise
      REQUIRE(a.rows[r].consensus_error == b.rows[r].consensus_error);
      REQUIRE(a.rows[r].cum_cost == b.rows[r].cum_cost);
    }
  }
}

TEST_CASE("csv export and import round trip bit-exactly") {
  const ProblemInstance inst = generate_quadratic(5, 4, 100.0, 9);
  const ConsensusMatrix w = metropolis_weights(star_topology(5, 1));
  const std::vector<VariantSpec> variants = {parse_variant("((2,-),(1,k))"),
                                             parse_variant("dgd")};
  const SweepResult res = sweep(inst, w, variants, {}, {{2.5, 0.5}}, 40);

  TempDir dir("harness_roundtrip");
  export_csv(res.records, dir.path);
  REQUIRE(fs::exists(dir.path / "manifest.csv"));
  REQUIRE(fs::exists(dir.path / "run_000.csv"));
  REQUIRE(fs::exists(dir.path / "run_001.csv"));

  const auto back = import_csv(dir.path);
  REQUIRE(back.size() == res.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = res.records[i];
    const auto& b = back[i];
    REQUIRE(b.meta.run_id == a.meta.run_id);
    REQUIRE(b.meta.variant == a.meta.variant);  // commas survive quoting
    REQUIRE(b.meta.topology == a.meta.topology);
    REQUIRE(b.meta.kappa == a.meta.kappa);
    REQUIRE(b.meta.alpha == a.meta.alpha);
    REQUIRE(b.meta.beta == a.meta.beta);
    REQUIRE(b.meta.c_c == a.meta.c_c);
    REQUIRE(b.meta.c_g == a.meta.c_g);
    REQUIRE(b.meta.horizon == a.meta.horizon);
    REQUIRE(b.rows.size() == a.rows.size());
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
      REQUIRE(b.rows[r].k == a.rows[r].k);
      REQUIRE(b.rows[r].rel_error == a.rows[r].rel_error);
      REQUIRE(b.rows[r].consensus_error == a.rows[r].consensus_error);
      REQUIRE(b.rows[r].cum_comm == a.rows[r].cum_comm);
      REQUIRE(b.rows[r].cum_grad == a.rows[r].cum_grad);
      REQUIRE(b.rows[r].cum_cost == a.rows[r].cum_cost);
    }
  }
}

TEST_CASE("csv export is byte-deterministic") {
  const ProblemInstance inst = generate_quadratic(4, 4, 10.0, 11);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(4, 1));
  const SweepResult res =
      sweep(inst, w, {parse_variant("((1,-),(1,k))")}, {}, {}, 25);

  TempDir a("harness_bytes_a");
  TempDir b("harness_bytes_b");
  export_csv(res.records, a.path);
  export_csv(res.records, b.path);
  REQUIRE(read_bytes(a.path / "manifest.csv") ==
          read_bytes(b.path / "manifest.csv"));
  REQUIRE(read_bytes(a.path / "run_000.csv") ==
          read_bytes(b.path / "run_000.csv"));

  const auto lines = csv::read_lines(a.path / "run_000.csv");
  REQUIRE(lines[0] == std::string(kTrajectoryHeader));
  REQUIRE(lines.size() == 27);  // header + 26 rows
}

TEST_CASE("import rejects tampered layouts") {
  TempDir dir("harness_bad");
  csv::write_text(dir.path / "manifest.csv", "wrong,header\n");
  REQUIRE_THROWS_AS(import_csv(dir.path), IoError);
  REQUIRE_THROWS_AS(import_csv(dir.path / "missing"), IoError);
}
