#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neardgd/errors.hpp"
#include "neardgd/graph.hpp"
#include "neardgd/linalg.hpp"
#include "neardgd/objective.hpp"

namespace neardgd {

// Per-iteration count of consensus rounds or gradient steps. Iterations are
// numbered k = 1, 2, ...; values are always >= 1.
class Schedule {
 public:
  enum class Kind {
    constant,        // t
    linear_in_k,     // k
    increase_every,  // init + floor(k / period)
    decrease_to_one, // max(init - (k - 1), 1): iteration 1 uses init
    decrease_every,  // max(init - floor(k / period), 1)
  };

  static Schedule constant(long t) {
    if (t < 1) throw InvalidParameterError("schedule: constant needs t >= 1");
    return Schedule(Kind::constant, t, 0);
  }
  static Schedule linear_in_k() { return Schedule(Kind::linear_in_k, 1, 0); }
  static Schedule increase_every(long init, long period) {
    if (init < 1 || period < 1)
      throw InvalidParameterError("schedule: increase_every needs init, period >= 1");
    return Schedule(Kind::increase_every, init, period);
  }
  static Schedule decrease_to_one(long init) {
    if (init < 1)
      throw InvalidParameterError("schedule: decrease_to_one needs init >= 1");
    return Schedule(Kind::decrease_to_one, init, 0);
  }
  static Schedule decrease_every(long init, long period) {
    if (init < 1 || period < 1)
      throw InvalidParameterError("schedule: decrease_every needs init, period >= 1");
    return Schedule(Kind::decrease_every, init, period);
  }

  long at(long k) const {
    if (k < 1) throw InvalidParameterError("schedule: iterations start at k = 1");
    switch (kind_) {
      case Kind::constant:
        return init_;
      case Kind::linear_in_k:
        return k;
      case Kind::increase_every:
        return init_ + k / period_;
      case Kind::decrease_to_one:
        return std::max(init_ - (k - 1), 1L);
      case Kind::decrease_every:
        return std::max(init_ - k / period_, 1L);
    }
    return 1;
  }

  Kind kind() const { return kind_; }
  long init() const { return init_; }
  long period() const { return period_; }

  bool is_constant() const { return kind_ == Kind::constant; }
  bool is_linear_in_k() const { return kind_ == Kind::linear_in_k; }
  bool is_decrease_to_one() const { return kind_ == Kind::decrease_to_one; }

  friend bool operator==(const Schedule& a, const Schedule& b) {
    return a.kind_ == b.kind_ && a.init_ == b.init_ && a.period_ == b.period_;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::constant:
        return "constant(" + std::to_string(init_) + ")";
      case Kind::linear_in_k:
        return "linear_in_k";
      case Kind::increase_every:
        return "increase_every(" + std::to_string(init_) + "," +
               std::to_string(period_) + ")";
      case Kind::decrease_to_one:
        return "decrease_to_one(" + std::to_string(init_) + ")";
      case Kind::decrease_every:
        return "decrease_every(" + std::to_string(init_) + "," +
               std::to_string(period_) + ")";
    }
    return "?";
  }

 private:
  Schedule(Kind kind, long init, long period)
      : kind_(kind), init_(init), period_(period) {}
  Kind kind_;
  long init_;
  long period_;
};

enum class Method { near_dgd, dgd };

struct SolverConfig {
  double alpha = 0.0;
  Schedule tc = Schedule::constant(1);
  Schedule tg = Schedule::constant(1);
  long max_iters = 0;
  lin::Vector x0;  // common start point for all agents; empty means origin
  Method method = Method::near_dgd;
  bool record_inner = false;
  std::optional<double> early_stop_tol;  // on squared relative error
  bool unsafe_alpha = false;  // accept alpha above the admissible bound
};

// Largest step length admitted by the analysis: min(1/L, 2/(mu_bar+l_bar)).
inline double alpha_bound(const ProblemInstance& inst) {
  return std::min(1.0 / inst.l_max, 2.0 / (inst.mu_bar + inst.l_bar));
}

// Default step length: just inside the admissible region.
inline double default_alpha(const ProblemInstance& inst) {
  return 0.999 * alpha_bound(inst);
}

inline void validate_alpha(const ProblemInstance& inst, double alpha,
                           bool unsafe_override) {
  if (!(alpha > 0.0))
    throw InvalidParameterError("step length must be positive");
  if (unsafe_override) return;
  const double bound = alpha_bound(inst);
  if (alpha > bound * (1.0 + 1e-12))
    throw InvalidParameterError(
        "step length exceeds the admissible bound min(1/L, 2/(mu+L) "
        "averages); pass the unsafe override to force it");
}

// One recorded outer iteration. Iteration k runs the gradient phase on the
// previous outer state and the consensus phase on its output:
//   y_k = gradient_phase(x_{k-1}, t_g(k)),  x_k = consensus(y_k, t_c(k)).
struct Snapshot {
  long k = 0;
  lin::Matrix x;       // n-by-p outer state, after the consensus phase
  lin::Matrix y;       // n-by-p intermediate, after the gradient phase
  lin::Vector x_mean;  // network average of x
  lin::Vector g_sum;   // sum over the phase of the mean gradient (zero at k=0)
  long tc = 0;         // schedule values consumed by this iteration
  long tg = 0;
  long comm_rounds = 0;  // cumulative counters up to and including k
  long grad_rounds = 0;
  std::vector<lin::Matrix> inner;  // phase iterates x^0..x^tg when recorded
};

using Trajectory = std::vector<Snapshot>;

struct GradientPhaseResult {
  lin::Matrix y;
  lin::Vector g_sum;
  std::vector<lin::Matrix> inner;
};

// t_g plain gradient steps applied agent-wise from the given stacked state.
// g_sum accumulates the network-mean gradient of every step, which is exactly
// the quantity steering the evolution of the network average.
inline GradientPhaseResult gradient_phase(const ProblemInstance& inst,
                                          const lin::Matrix& x, long t_g,
                                          double alpha,
                                          bool record_inner = false) {
  if (t_g < 1) throw InvalidParameterError("gradient_phase: need t_g >= 1");
  GradientPhaseResult r;
  r.y = x;
  r.g_sum = lin::Vector::Zero(inst.p);
  if (record_inner) r.inner.push_back(r.y);
  for (long j = 0; j < t_g; ++j) {
    const lin::Matrix g = inst.stacked_gradient(r.y);
    const lin::Vector g_mean = lin::column_mean(g);
    for (int c = 0; c < inst.p; ++c) r.g_sum[c] += g_mean[c];
    for (int i = 0; i < inst.n; ++i)
      for (int c = 0; c < inst.p; ++c) r.y(i, c) -= alpha * g(i, c);
    if (record_inner) r.inner.push_back(r.y);
  }
  return r;
}

// One nested iteration: gradient phase applied to the previous outer state,
// then the consensus phase. Schedules are evaluated at k = prev.k + 1.
inline Snapshot near_dgd_step(const Snapshot& prev,
                              const ProblemInstance& inst,
                              const ConsensusMatrix& w,
                              const SolverConfig& cfg) {
  Snapshot s;
  s.k = prev.k + 1;
  s.tc = cfg.tc.at(s.k);
  s.tg = cfg.tg.at(s.k);
  auto phase = gradient_phase(inst, prev.x, s.tg, cfg.alpha, cfg.record_inner);
  s.y = std::move(phase.y);
  s.g_sum = std::move(phase.g_sum);
  s.inner = std::move(phase.inner);
  s.x = apply_consensus(w, s.y, s.tc);
  s.x_mean = lin::column_mean(s.x);
  s.comm_rounds = prev.comm_rounds + s.tc;
  s.grad_rounds = prev.grad_rounds + s.tg;
  return s;
}

// Classic decentralized gradient descent: one mixing round and one gradient
// step applied simultaneously to the same input state.
inline Snapshot dgd_step(const Snapshot& prev, const ProblemInstance& inst,
                         const ConsensusMatrix& w, double alpha) {
  Snapshot s;
  s.k = prev.k + 1;
  s.tc = 1;
  s.tg = 1;
  const lin::Matrix mixed = apply_consensus(w, prev.x, 1);
  const lin::Matrix g = inst.stacked_gradient(prev.x);
  s.x = mixed;
  for (int i = 0; i < inst.n; ++i)
    for (int c = 0; c < inst.p; ++c) s.x(i, c) -= alpha * g(i, c);
  s.y = s.x;
  s.g_sum = lin::column_mean(g);
  s.x_mean = lin::column_mean(s.x);
  s.comm_rounds = prev.comm_rounds + 1;
  s.grad_rounds = prev.grad_rounds + 1;
  return s;
}

namespace detail {
constexpr double kDivergenceGuard = 1e24;  // on squared Frobenius norms
}

// Runs the configured method for max_iters iterations (or until the optional
// early-stop tolerance on the squared relative error of the network average
// is met) and records every outer iterate.
inline Trajectory run(const ProblemInstance& inst, const ConsensusMatrix& w,
                      const SolverConfig& cfg) {
  if (w.n() != inst.n)
    throw DimensionError("run: consensus matrix does not match instance");
  if (cfg.max_iters < 0)
    throw InvalidParameterError("run: max_iters must be >= 0");
  validate_alpha(inst, cfg.alpha, cfg.unsafe_alpha);

  lin::Vector x0 = cfg.x0;
  if (x0.size() == 0) x0 = lin::Vector::Zero(inst.p);
  if (x0.size() != inst.p)
    throw DimensionError("run: x0 has wrong dimension");

  Snapshot s0;
  s0.k = 0;
  s0.x = lin::replicate_rows(x0, inst.n);
  s0.y = s0.x;
  s0.x_mean = x0;
  s0.g_sum = lin::Vector::Zero(inst.p);

  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  traj.push_back(std::move(s0));

  const double x_star_sq = lin::squared_norm(inst.x_star);
  for (long k = 1; k <= cfg.max_iters; ++k) {
    Snapshot next = (cfg.method == Method::near_dgd)
                        ? near_dgd_step(traj.back(), inst, w, cfg)
                        : dgd_step(traj.back(), inst, w, cfg.alpha);
    if (lin::squared_frobenius(next.x) > detail::kDivergenceGuard ||
        lin::squared_frobenius(next.y) > detail::kDivergenceGuard)
      throw DivergedError("iterates exceeded the divergence guard", k);
    traj.push_back(std::move(next));
    if (cfg.early_stop_tol && x_star_sq > 0.0) {
      lin::Vector d = traj.back().x_mean;
      for (int c = 0; c < inst.p; ++c) d[c] -= inst.x_star[c];
      if (lin::squared_norm(d) / x_star_sq < *cfg.early_stop_tol) break;
    }
  }
  return traj;
}

}  // namespace neardgd
