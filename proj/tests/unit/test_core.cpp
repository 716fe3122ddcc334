#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "neardgd/core.hpp"

using namespace neardgd;

namespace {

std::vector<long> first_values(const Schedule& s, long count) {
  std::vector<long> v;
  for (long k = 1; k <= count; ++k) v.push_back(s.at(k));
  return v;
}

}  // namespace

TEST_CASE("schedule families produce their documented sequences") {
  REQUIRE(first_values(Schedule::constant(3), 5) ==
          std::vector<long>{3, 3, 3, 3, 3});
  REQUIRE(first_values(Schedule::linear_in_k(), 5) ==
          std::vector<long>{1, 2, 3, 4, 5});
  REQUIRE(first_values(Schedule::decrease_to_one(3), 6) ==
          std::vector<long>{3, 2, 1, 1, 1, 1});

  const Schedule inc = Schedule::increase_every(1, 500);
  REQUIRE(inc.at(1) == 1);
  REQUIRE(inc.at(499) == 1);
  REQUIRE(inc.at(500) == 2);
  REQUIRE(inc.at(999) == 2);
  REQUIRE(inc.at(1000) == 3);

  const Schedule dec = Schedule::decrease_every(5, 10);
  REQUIRE(dec.at(1) == 5);
  REQUIRE(dec.at(9) == 5);
  REQUIRE(dec.at(10) == 4);
  REQUIRE(dec.at(39) == 2);
  REQUIRE(dec.at(40) == 1);
  REQUIRE(dec.at(100000) == 1);  // floor at one, never zero
}

TEST_CASE("schedule validation") {
  REQUIRE_THROWS_AS(Schedule::constant(0), InvalidParameterError);
  REQUIRE_THROWS_AS(Schedule::decrease_to_one(0), InvalidParameterError);
  REQUIRE_THROWS_AS(Schedule::increase_every(1, 0), InvalidParameterError);
  REQUIRE_THROWS_AS(Schedule::decrease_every(0, 5), InvalidParameterError);
  REQUIRE_THROWS_AS(Schedule::constant(2).at(0), InvalidParameterError);
  REQUIRE(Schedule::constant(2) == Schedule::constant(2));
  REQUIRE_FALSE(Schedule::constant(2) == Schedule::constant(3));
  REQUIRE(Schedule::decrease_to_one(4).describe() == "decrease_to_one(4)");
}

TEST_CASE("gradient phase matches a row-wise Eigen oracle") {
  const ProblemInstance inst = generate_quadratic(4, 5, 10.0, 7);
  const double alpha = default_alpha(inst);
  Rng rng(21);
  lin::Matrix x(inst.n, inst.p);
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.p; ++j) x(i, j) = rng.uniform(-1.0, 1.0);

  const auto phase = gradient_phase(inst, x, 3, alpha, true);

  lin::Matrix ref = x;
  lin::Vector g_sum_ref = lin::Vector::Zero(inst.p);
  for (int step = 0; step < 3; ++step) {
    lin::Matrix g(inst.n, inst.p);
    for (int i = 0; i < inst.n; ++i) {
      const lin::Vector gi =
          inst.local(i).a() * ref.row(i).transpose() + inst.local(i).b();
      g.row(i) = gi.transpose();
    }
    g_sum_ref += g.colwise().mean().transpose();
    ref -= alpha * g;
  }
  REQUIRE((phase.y - ref).cwiseAbs().maxCoeff() < 1e-13);
  REQUIRE((phase.g_sum - g_sum_ref).cwiseAbs().maxCoeff() < 1e-13);
  REQUIRE(phase.inner.size() == 4);
  REQUIRE(phase.inner.front() == x);
  REQUIRE(phase.inner.back() == phase.y);
}

TEST_CASE("gradient phase composes sequentially") {
  const ProblemInstance inst = generate_quadratic(3, 4, 5.0, 2);
  const double alpha = default_alpha(inst);
  lin::Matrix x = lin::Matrix::Constant(3, 4, 0.5);
  const auto whole = gradient_phase(inst, x, 5, alpha);
  const auto first = gradient_phase(inst, x, 2, alpha);
  const auto second = gradient_phase(inst, first.y, 3, alpha);
  REQUIRE(whole.y == second.y);  // identical arithmetic, identical bits
  REQUIRE((whole.g_sum - (first.g_sum + second.g_sum)).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("nested step separates gradient and consensus phases") {
  const ProblemInstance inst = generate_quadratic(5, 4, 10.0, 3);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(5, 2));
  SolverConfig cfg;
  cfg.alpha = default_alpha(inst);
  cfg.tc = Schedule::constant(2);
  cfg.tg = Schedule::constant(3);
  cfg.max_iters = 4;
  const Trajectory traj = run(inst, w, cfg);
  REQUIRE(traj.size() == 5);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const Snapshot& prev = traj[k - 1];
    const Snapshot& cur = traj[k];
    REQUIRE(cur.k == static_cast<long>(k));
    REQUIRE(cur.tc == 2);
    REQUIRE(cur.tg == 3);
    // Replay both phases independently; all bits must agree.
    const auto phase = gradient_phase(inst, prev.x, cur.tg, cfg.alpha);
    REQUIRE(cur.y == phase.y);
    REQUIRE(cur.x == apply_consensus(w, cur.y, cur.tc));
    REQUIRE(cur.x_mean == lin::column_mean(cur.x));
  }
  REQUIRE(traj.back().comm_rounds == 8);
  REQUIRE(traj.back().grad_rounds == 12);
}

TEST_CASE("snapshot zero replicates the start point") {
  const ProblemInstance inst = generate_quadratic(4, 3, 2.0, 5);
  const ConsensusMatrix w = uniform_weights(4);
  SolverConfig cfg;
  cfg.alpha = default_alpha(inst);
  cfg.max_iters = 0;
  lin::Vector x0(3);
  x0 << 1.0, -2.0, 0.25;
  cfg.x0 = x0;
  const Trajectory traj = run(inst, w, cfg);
  REQUIRE(traj.size() == 1);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(traj[0].x(i, j) == x0[j]);
  REQUIRE(traj[0].y == traj[0].x);
  REQUIRE(traj[0].comm_rounds == 0);
  REQUIRE(traj[0].grad_rounds == 0);
}

TEST_CASE("single agent run reproduces standalone gradient descent bitwise") {
  const ProblemInstance inst = generate_quadratic(1, 10, 100.0, 1);
  const ConsensusMatrix w = metropolis_weights(complete_topology(1));
  for (const long tg : {1L, 2L, 5L}) {
    SolverConfig cfg;
    cfg.alpha = default_alpha(inst);
    cfg.tc = Schedule::constant(1);
    cfg.tg = Schedule::constant(tg);
    cfg.max_iters = 40;
    const Trajectory traj = run(inst, w, cfg);

    // Standalone oracle: plain per-coordinate descent on the only local
    // objective, sharing no code with the stacked implementation.
    const auto& f = inst.local(0);
    std::vector<double> x(static_cast<std::size_t>(inst.p), 0.0);
    for (const Snapshot& s : traj) {
      if (s.k > 0) {
        for (long step = 0; step < tg; ++step) {
          std::vector<double> g(x.size());
          for (std::size_t j = 0; j < x.size(); ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < x.size(); ++c)
              acc += f.a()(static_cast<long>(j), static_cast<long>(c)) * x[c];
            g[j] = acc + f.b()[static_cast<long>(j)];
          }
          for (std::size_t j = 0; j < x.size(); ++j) x[j] -= cfg.alpha * g[j];
        }
      }
      for (int j = 0; j < inst.p; ++j)
        REQUIRE(s.x(0, j) == x[static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("network started at the common optimum stays there") {
  // With one agent the local and global minimizers coincide, so the iteration
  // has an exact fixed point.
  const ProblemInstance inst = generate_quadratic(1, 6, 10.0, 4);
  const ConsensusMatrix w = metropolis_weights(complete_topology(1));
  SolverConfig cfg;
  cfg.alpha = default_alpha(inst);
  cfg.tg = Schedule::constant(2);
  cfg.max_iters = 100;
  cfg.x0 = inst.x_star;
  const Trajectory traj = run(inst, w, cfg);
  const double scale = lin::norm(inst.x_star);
  for (const Snapshot& s : traj) {
    lin::Vector d = s.x_mean;
    for (int j = 0; j < inst.p; ++j) d[j] -= inst.x_star[j];
    REQUIRE(lin::norm(d) <= 1e-12 * scale);
  }
}

TEST_CASE("dgd with zero gradients is pure averaging") {
  // b_i = -A_i x0 row-wise makes every gradient vanish at the start state, so
  // one step must equal one exact mixing round.
  const int n = 5, p = 3;
  Rng rng(77);
  lin::Matrix x0(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x0(i, j) = rng.uniform(-1.0, 1.0);
  std::vector<LocalQuadratic> locals;
  for (int i = 0; i < n; ++i) {
    lin::Vector diag(p);
    for (int j = 0; j < p; ++j) diag[j] = rng.uniform(1.0, 2.0);
    lin::Vector b(p);
    for (int j = 0; j < p; ++j) b[j] = -diag[j] * x0(i, j);
    locals.push_back(LocalQuadratic::from_diagonal(diag, b));
  }
  const ProblemInstance inst = make_instance(std::move(locals));
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(n, 1));

  Snapshot prev;
  prev.k = 0;
  prev.x = x0;
  prev.y = x0;
  const Snapshot s = dgd_step(prev, inst, w, 0.01);
  REQUIRE(s.x == apply_consensus(w, x0, 1));
}

TEST_CASE("dgd step uses the pre-mix state for its gradient") {
  const ProblemInstance inst = generate_quadratic(4, 3, 5.0, 9);
  const ConsensusMatrix w = metropolis_weights(star_topology(4, 0));
  const double alpha = default_alpha(inst);
  Rng rng(5);
  Snapshot prev;
  prev.k = 0;
  prev.x.resize(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) prev.x(i, j) = rng.uniform(-1.0, 1.0);
  prev.y = prev.x;

  const Snapshot s = dgd_step(prev, inst, w, alpha);
  const lin::Matrix expected =
      apply_consensus(w, prev.x, 1) - alpha * inst.stacked_gradient(prev.x);
  REQUIRE((s.x - expected).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s.y == s.x);
  REQUIRE(s.comm_rounds == 1);
  REQUIRE(s.grad_rounds == 1);
}

TEST_CASE("alpha validation guards the admissible region") {
  const ProblemInstance inst = generate_quadratic(4, 4, 10.0, 6);
  const double bound = alpha_bound(inst);
  REQUIRE(bound == Catch::Approx(std::min(1.0 / inst.l_max,
                                          2.0 / (inst.mu_bar + inst.l_bar)))
                       .epsilon(1e-15));
  REQUIRE(default_alpha(inst) < bound);
  REQUIRE_NOTHROW(validate_alpha(inst, bound, false));
  REQUIRE_THROWS_AS(validate_alpha(inst, bound * 1.5, false),
                    InvalidParameterError);
  REQUIRE_THROWS_AS(validate_alpha(inst, 0.0, false), InvalidParameterError);
  REQUIRE_NOTHROW(validate_alpha(inst, bound * 1.5, true));
}

TEST_CASE("oversized steps trip the divergence guard") {
  const ProblemInstance inst = generate_quadratic(4, 4, 100.0, 6);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(4, 1));
  SolverConfig cfg;
  cfg.alpha = 50.0 * alpha_bound(inst);
  cfg.unsafe_alpha = true;
  cfg.max_iters = 500;
  lin::Vector x0(4);
  x0 << 1.0, 1.0, 1.0, 1.0;
  cfg.x0 = x0;
  try {
    run(inst, w, cfg);
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    REQUIRE(e.iteration >= 1);
    REQUIRE(e.iteration <= 500);
  }
}

TEST_CASE("early stopping truncates the trajectory") {
  const ProblemInstance inst = generate_quadratic(5, 4, 10.0, 12);
  const ConsensusMatrix w = metropolis_weights(complete_topology(5));
  SolverConfig cfg;
  cfg.alpha = default_alpha(inst);
  cfg.max_iters = 100000;
  cfg.early_stop_tol = 1e-6;
  const Trajectory traj = run(inst, w, cfg);
  REQUIRE(traj.size() < 100000);
  lin::Vector d = traj.back().x_mean;
  for (int j = 0; j < inst.p; ++j) d[j] -= inst.x_star[j];
  REQUIRE(lin::squared_norm(d) / lin::squared_norm(inst.x_star) < 1e-6);
}

TEST_CASE("run validates dimensions") {
  const ProblemInstance inst = generate_quadratic(4, 4, 10.0, 6);
  const ConsensusMatrix w = metropolis_weights(cyclic_topology(5, 1));
  SolverConfig cfg;
  cfg.alpha = default_alpha(inst);
  cfg.max_iters = 1;
  REQUIRE_THROWS_AS(run(inst, w, cfg), DimensionError);

  const ConsensusMatrix ok = metropolis_weights(cyclic_topology(4, 1));
  cfg.x0 = lin::Vector::Zero(3);
  REQUIRE_THROWS_AS(run(inst, ok, cfg), DimensionError);
}
