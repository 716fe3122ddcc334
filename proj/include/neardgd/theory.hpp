#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "neardgd/core.hpp"
#include "neardgd/csv.hpp"
#include "neardgd/errors.hpp"
#include "neardgd/graph.hpp"
#include "neardgd/linalg.hpp"
#include "neardgd/objective.hpp"

namespace neardgd {

// Integer power by squaring: deterministic operation order, no libm pow.
inline double pow_int(double base, long e) {
  if (e < 0) throw InvalidParameterError("pow_int: negative exponent");
  double result = 1.0;
  double b = base;
  long n = e;
  while (n > 0) {
    if (n & 1L) result *= b;
    b *= b;
    n >>= 1;
  }
  return result;
}

// Every constant appearing in the convergence analysis, for one fixed
// problem/network/step-length/initial-phase-length combination.
//
// Naming follows the roles the constants play:
//   gamma            worst local condition combination min_i mu_i L_i/(mu_i+L_i)
//   nu               2*alpha*gamma, the contraction margin of one local step
//   eta              1 + alpha*L, growth factor of one gradient step
//   d_big            uniform bound on the stacked iterate norms
//   d_hat            uniform bound on distances of averaged phase iterates
//   m_big            uniform bound on gradient disagreement
//   c1               per-gradient-step contraction sqrt(1 - alpha*c2)
//   c2               2*mu_bar*l_bar/(mu_bar+l_bar)
//   c3, c5           neighborhood scale factors (alpha*D*L/(eta-1), alpha*M/(eta-1))
//   c4               admissible step bound 2/(mu_bar+l_bar)
//   t_seq            T_i = eta^{t_g(i)} - 1 - t_g(i)*(eta-1) along the
//                    decreasing phase schedule t_g(i) = max(tg0 - i, 1)
//   tau              largest decay ratio T_{i+1}/T_i
//   rho              rate of the diminishing-phase scheme
//   c_big            prefactor of the diminishing-phase bound
struct TheoryConstants {
  double alpha = 0.0;
  double beta = 0.0;
  long tg0 = 1;
  int n = 0;

  double l_max = 0.0, mu_bar = 0.0, l_bar = 0.0;
  double gamma = 0.0, nu = 0.0, eta = 0.0;
  double d_big = 0.0, d_hat = 0.0, m_big = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
  double nu_bar = 0.0;
  double c3_hat = 0.0, c5_hat = 0.0;
  std::vector<double> t_seq;  // T_0 .. T_tg0
  double tau = 0.0, rho = 0.0, c_big = 0.0;
  double dist0 = 0.0;  // distance from the start point to the optimum
};

// Computes the full constant set. tg0 is the gradient-phase length of the
// first iteration (the constant value for fixed schedules). x0 is the common
// start point; empty means the origin.
inline TheoryConstants compute_constants(const ProblemInstance& inst,
                                         const ConsensusMatrix& w,
                                         double alpha, long tg0,
                                         lin::Vector x0 = lin::Vector()) {
  if (w.n() != inst.n)
    throw DimensionError("compute_constants: matrix does not match instance");
  if (tg0 < 1)
    throw InvalidParameterError("compute_constants: need tg0 >= 1");
  validate_alpha(inst, alpha, /*unsafe_override=*/false);
  if (x0.size() == 0) x0 = lin::Vector::Zero(inst.p);
  if (x0.size() != inst.p)
    throw DimensionError("compute_constants: x0 has wrong dimension");

  TheoryConstants t;
  t.alpha = alpha;
  t.beta = w.beta;
  t.tg0 = tg0;
  t.n = inst.n;

  const CurvatureConstants cc = curvature_constants(inst);
  t.l_max = cc.l_max;
  t.mu_bar = cc.mu_bar;
  t.l_bar = cc.l_bar;
  t.gamma = cc.gamma;
  t.nu = 2.0 * alpha * t.gamma;
  t.eta = 1.0 + alpha * t.l_max;

  // First intermediate state: one full gradient phase from the start point.
  const lin::Matrix x0_stacked = lin::replicate_rows(x0, inst.n);
  const lin::Matrix y0 = gradient_phase(inst, x0_stacked, tg0, alpha).y;
  lin::Matrix y0_minus_u = y0;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.p; ++j) y0_minus_u(i, j) -= inst.u_star(i, j);
  t.d_big = lin::frobenius(y0_minus_u) +
            ((t.nu + 4.0) / t.nu) * lin::frobenius(inst.u_star);
  t.d_hat = lin::norm(inst.x_star) +
            t.d_big / std::sqrt(static_cast<double>(inst.n));

  double grad_disagreement = 0.0;
  for (int i = 0; i < inst.n; ++i)
    grad_disagreement += lin::norm(inst.local_gradient(i, inst.x_star));
  t.m_big = 2.0 * t.l_max * t.d_hat + grad_disagreement;

  t.c2 = 2.0 * t.mu_bar * t.l_bar / (t.mu_bar + t.l_bar);
  t.c1 = std::sqrt(1.0 - alpha * t.c2);
  t.c3 = alpha * t.d_big * t.l_max / (t.eta - 1.0);
  t.c4 = 2.0 / (t.mu_bar + t.l_bar);
  t.c5 = alpha * t.m_big / (t.eta - 1.0);
  t.nu_bar = alpha * t.c2;

  t.t_seq.resize(static_cast<std::size_t>(tg0) + 1);
  for (long i = 0; i <= tg0; ++i) {
    const long tg_i = std::max(tg0 - i, 1L);
    t.t_seq[static_cast<std::size_t>(i)] =
        pow_int(t.eta, tg_i) - 1.0 - static_cast<double>(tg_i) * (t.eta - 1.0);
  }
  t.tau = 0.0;
  for (long i = 0; i + 1 <= tg0; ++i) {
    const double ti = t.t_seq[static_cast<std::size_t>(i)];
    const double tn = t.t_seq[static_cast<std::size_t>(i + 1)];
    if (ti > 0.0) t.tau = std::max(t.tau, tn / ti);
  }

  t.c3_hat = t.c3 * (pow_int(t.eta, tg0) - 1.0);
  t.c5_hat = t.c5 * t.t_seq[0];
  t.rho = std::max({t.beta, t.tau, 1.0 - alpha * t.c2 / 2.0});

  lin::Vector d0 = x0;
  for (int j = 0; j < inst.p; ++j) d0[j] -= inst.x_star[j];
  t.dist0 = lin::norm(d0);
  const double denom = alpha * t.c2;
  t.c_big = std::max(t.dist0, 8.0 * (t.c3_hat + t.c5_hat) / (denom * denom));
  return t;
}

// Steady-state neighborhood of the fixed-schedule bound, split into the
// consensus-error and gradient-disagreement contributions.
inline std::pair<double, double> theorem1_neighborhood(
    const TheoryConstants& t, long tc, long tg) {
  if (tc < 1 || tg < 1)
    throw InvalidParameterError("theorem1_neighborhood: need tc, tg >= 1");
  const double denom = 1.0 - pow_int(t.c1, tg);
  const double comm = t.c3 * pow_int(t.beta, tc) *
                      (pow_int(t.eta, tg) - 1.0) / denom;
  const double grad =
      t.c5 *
      (pow_int(t.eta, tg) - 1.0 - static_cast<double>(tg) * (t.eta - 1.0)) /
      denom;
  return {comm, grad};
}

// Fixed-schedule bound on the distance of the network average at outer
// iteration k.
inline double theorem1_bound(const TheoryConstants& t, long k, long tc,
                             long tg) {
  if (k < 0) throw InvalidParameterError("theorem1_bound: need k >= 0");
  const auto [comm, grad] = theorem1_neighborhood(t, tc, tg);
  return pow_int(t.c1, k * tg) * t.dist0 + comm + grad;
}

// Diminishing-phase bound (consensus rounds growing linearly, gradient steps
// decreasing to one) on the distance of the network average at iteration k.
inline double theorem2_bound(const TheoryConstants& t, long k) {
  if (k < 0) throw InvalidParameterError("theorem2_bound: need k >= 0");
  return t.c_big * pow_int(t.rho, k);
}

struct Corollary1Bounds {
  double x_bound = 0.0;  // on max_i distance of agent states x_{i,k}
  double y_bound = 0.0;  // on max_i distance of intermediates y_{i,k}
};

// Per-agent fixed-schedule bounds. The index k refers to the process in
// which y_k is one gradient phase ahead of x_k, hence the extra phase factor
// in the y bound.
inline Corollary1Bounds corollary1_bounds(const TheoryConstants& t, long k,
                                          long tc, long tg) {
  if (k < 0) throw InvalidParameterError("corollary1_bounds: need k >= 0");
  const auto [comm, grad] = theorem1_neighborhood(t, tc, tg);
  const double delta = comm / pow_int(t.beta, tc) + t.d_big;
  Corollary1Bounds b;
  b.x_bound = pow_int(t.c1, k * tg) * t.dist0 + pow_int(t.beta, tc) * delta +
              grad;
  b.y_bound = pow_int(t.c1, (k + 1) * tg) * t.dist0 +
              pow_int(t.beta, tc) * delta + grad + 2.0 * t.d_big;
  return b;
}

// --- measured-vs-bound reporting -------------------------------------------

struct CheckRow {
  long k = 0;
  std::string id;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = true;
};

struct CheckReport {
  std::vector<CheckRow> rows;
  long violations = 0;
  double max_violation = 0.0;  // largest lhs - rhs among violating rows
  double min_margin = 0.0;     // smallest rhs - lhs over all rows
  double slack = 0.0;

  void add(long k, std::string id, double lhs, double rhs) {
    CheckRow r;
    r.k = k;
    r.id = std::move(id);
    r.lhs = lhs;
    r.rhs = rhs;
    r.ok = lhs <= rhs + slack * std::max(1.0, std::abs(rhs));
    if (!r.ok) {
      ++violations;
      max_violation = std::max(max_violation, lhs - rhs);
    }
    if (rows.empty())
      min_margin = rhs - lhs;
    else
      min_margin = std::min(min_margin, rhs - lhs);
    rows.push_back(std::move(r));
  }

  // Equality row (used for integer counter checks): no slack either way.
  void add_exact(long k, std::string id, double lhs, double rhs) {
    CheckRow r;
    r.k = k;
    r.id = std::move(id);
    r.lhs = lhs;
    r.rhs = rhs;
    r.ok = lhs == rhs;
    if (!r.ok) {
      ++violations;
      max_violation = std::max(max_violation, std::abs(lhs - rhs));
    }
    if (rows.empty())
      min_margin = rhs - lhs;
    else
      min_margin = std::min(min_margin, rhs - lhs);
    rows.push_back(std::move(r));
  }

  void merge(const CheckReport& other) {
    for (const auto& r : other.rows) {
      if (rows.empty())
        min_margin = r.rhs - r.lhs;
      else
        min_margin = std::min(min_margin, r.rhs - r.lhs);
      if (!r.ok) {
        ++violations;
        max_violation = std::max(max_violation, r.lhs - r.rhs);
      }
      rows.push_back(r);
    }
  }
};

inline void write_check_csv(const CheckReport& report,
                            const std::filesystem::path& path) {
  std::string text = "k,inequality_id,lhs,rhs,satisfied\n";
  for (const auto& r : report.rows) {
    text += std::to_string(r.k);
    text += ',';
    text += csv::quote_field(r.id);
    text += ',';
    text += csv::format_double(r.lhs);
    text += ',';
    text += csv::format_double(r.rhs);
    text += ',';
    text += r.ok ? '1' : '0';
    text += '\n';
  }
  csv::write_text(path, text);
}

namespace detail {

inline lin::Vector snapshot_row(const lin::Matrix& m, int i) {
  lin::Vector v(m.cols());
  for (lin::Index j = 0; j < m.cols(); ++j) v[j] = m(i, j);
  return v;
}

inline double max_row_deviation(const lin::Matrix& state,
                                const lin::Vector& centre) {
  double worst = 0.0;
  for (lin::Index i = 0; i < state.rows(); ++i) {
    double s = 0.0;
    for (lin::Index j = 0; j < state.cols(); ++j) {
      const double d = state(i, j) - centre[j];
      s += d * d;
    }
    worst = std::max(worst, s);
  }
  return std::sqrt(worst);
}

inline void require_fixed_schedules(const Trajectory& traj, long tc, long tg) {
  for (const auto& s : traj) {
    if (s.k == 0) continue;
    if (s.tc != tc || s.tg != tg)
      throw InvalidParameterError(
          "diagnostics expect fixed consensus/gradient schedules");
  }
}

}  // namespace detail

// Pointwise audit of every per-iterate inequality backing the fixed-schedule
// analysis: agent deviations from the average (before and after the phase),
// inner phase iterates against the averaged phase, accumulated phase
// gradients against the averaged-phase gradients, and the uniform norm
// bounds. Needs a trajectory recorded with inner iterates.
inline CheckReport lemma_diagnostics(const ProblemInstance& inst,
                                     const Trajectory& traj,
                                     const TheoryConstants& t, long tc,
                                     long tg, double slack = 1e-9) {
  if (traj.empty()) throw InvalidParameterError("lemma_diagnostics: empty run");
  if (tc < 1 || tg < 1)
    throw InvalidParameterError("lemma_diagnostics: need tc, tg >= 1");
  if (t.tg0 != tg)
    throw InvalidParameterError(
        "lemma_diagnostics: constants were computed for a different phase "
        "length");
  detail::require_fixed_schedules(traj, tc, tg);

  CheckReport rep;
  rep.slack = slack;

  const double beta_tc = pow_int(t.beta, tc);
  const double eta1 = t.eta - 1.0;
  const double p3_rhs =
      beta_tc * t.d_big * t.l_max * (pow_int(t.eta, tg) - 1.0) / eta1 +
      t.m_big * ((pow_int(t.eta, tg) - 1.0) / eta1 - static_cast<double>(tg));

  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Snapshot& s = traj[k];
    rep.add(s.k, "lemma3_p1", detail::max_row_deviation(s.x, s.x_mean),
            beta_tc * t.d_big);
    if (s.k == 0) continue;

    const lin::Vector y_mean = lin::column_mean(s.y);
    rep.add(s.k, "lemma3_p4", detail::max_row_deviation(s.y, y_mean),
            beta_tc * t.d_big + 2.0 * t.d_big);
    rep.add(s.k, "lemma1_x", lin::frobenius(s.x), t.d_big);
    rep.add(s.k, "lemma1_y", lin::frobenius(s.y), t.d_big);

    if (s.inner.size() != static_cast<std::size_t>(tg) + 1)
      throw MissingDataError(
          "lemma_diagnostics: trajectory lacks recorded inner iterates");

    // Averaged phase: the same gradient recursion driven by the network
    // average of the previous outer state.
    const Snapshot& prev = traj[k - 1];
    lin::Vector x_hat = lin::column_mean(prev.x);
    lin::Vector g_hat_sum = lin::Vector::Zero(inst.p);
    double worst_xhat_dist = 0.0;
    double worst_grad_disagreement = 0.0;
    for (long j = 0; j <= tg; ++j) {
      const double p2_rhs =
          pow_int(t.eta, j) * beta_tc * t.d_big +
          t.alpha * t.m_big * (pow_int(t.eta, j) - 1.0) / eta1;
      rep.add(s.k, "lemma3_p2_j" + std::to_string(j),
              detail::max_row_deviation(s.inner[static_cast<std::size_t>(j)],
                                        x_hat),
              p2_rhs);

      lin::Vector dd = x_hat;
      for (int c = 0; c < inst.p; ++c) dd[c] -= inst.x_star[c];
      worst_xhat_dist = std::max(worst_xhat_dist, lin::norm(dd));

      lin::Vector g_mean = lin::Vector::Zero(inst.p);
      std::vector<lin::Vector> grads;
      grads.reserve(static_cast<std::size_t>(inst.n));
      for (int i = 0; i < inst.n; ++i) {
        grads.push_back(inst.local_gradient(i, x_hat));
        for (int c = 0; c < inst.p; ++c) g_mean[c] += grads.back()[c];
      }
      for (int c = 0; c < inst.p; ++c)
        g_mean[c] /= static_cast<double>(inst.n);
      for (int i = 0; i < inst.n; ++i) {
        lin::Vector d = grads[static_cast<std::size_t>(i)];
        for (int c = 0; c < inst.p; ++c) d[c] -= g_mean[c];
        worst_grad_disagreement =
            std::max(worst_grad_disagreement, lin::norm(d));
      }
      if (j < tg) {
        for (int c = 0; c < inst.p; ++c) {
          g_hat_sum[c] += g_mean[c];
          x_hat[c] -= t.alpha * g_mean[c];
        }
      }
    }
    rep.add(s.k, "lemma1_xhat", worst_xhat_dist, t.d_hat);
    rep.add(s.k, "lemma2", worst_grad_disagreement, t.m_big);

    lin::Vector g_diff = s.g_sum;
    for (int c = 0; c < inst.p; ++c) g_diff[c] -= g_hat_sum[c];
    rep.add(s.k, "lemma3_p3", lin::norm(g_diff), p3_rhs);
  }
  return rep;
}

// Checks the measured mean-distance trajectory against the fixed-schedule
// bound, and the per-agent states against the corresponding agent-wise
// bounds. The intermediate y_k is one phase ahead of x_{k-1}, hence the
// shifted index in its bound.
inline CheckReport theorem1_check(const ProblemInstance& inst,
                                  const Trajectory& traj,
                                  const TheoryConstants& t, long tc, long tg,
                                  double slack = 1e-9) {
  detail::require_fixed_schedules(traj, tc, tg);
  CheckReport rep;
  rep.slack = slack;
  for (const auto& s : traj) {
    lin::Vector d = s.x_mean;
    for (lin::Index c = 0; c < d.size(); ++c) d[c] -= inst.x_star[c];
    rep.add(s.k, "theorem1_mean", lin::norm(d),
            theorem1_bound(t, s.k, tc, tg));

    const auto b_x = corollary1_bounds(t, s.k, tc, tg);
    rep.add(s.k, "corollary1_x",
            detail::max_row_deviation(s.x, inst.x_star), b_x.x_bound);
    if (s.k >= 1) {
      const auto b_y = corollary1_bounds(t, s.k - 1, tc, tg);
      rep.add(s.k, "corollary1_y",
              detail::max_row_deviation(s.y, inst.x_star), b_y.y_bound);
    }
  }
  return rep;
}

// Checks the measured mean-distance trajectory against the diminishing-phase
// bound C * rho^k.
inline CheckReport theorem2_check(const ProblemInstance& inst,
                                  const Trajectory& traj,
                                  const TheoryConstants& t,
                                  double slack = 1e-9) {
  CheckReport rep;
  rep.slack = slack;
  for (const auto& s : traj) {
    lin::Vector d = s.x_mean;
    for (lin::Index c = 0; c < d.size(); ++c) d[c] -= inst.x_star[c];
    rep.add(s.k, "theorem2_mean", lin::norm(d), theorem2_bound(t, s.k));
  }
  return rep;
}

// Verifies that the network average of the intermediates follows the exact
// recursion mean(y_k) = mean(y_{k-1}) - alpha * g_k, where g_k is the sum of
// the mean gradients accumulated by iteration k's phase. Tolerance is
// relative to the iterate scale.
inline CheckReport mean_evolution_check(const Trajectory& traj, double alpha,
                                        double tol = 1e-12) {
  CheckReport rep;
  rep.slack = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const lin::Vector prev_mean = lin::column_mean(traj[k - 1].y);
    const lin::Vector cur_mean = lin::column_mean(traj[k].y);
    double err = 0.0;
    double scale = 1.0;
    for (lin::Index c = 0; c < cur_mean.size(); ++c) {
      const double predicted = prev_mean[c] - alpha * traj[k].g_sum[c];
      err = std::max(err, std::abs(cur_mean[c] - predicted));
      scale = std::max(scale, std::abs(prev_mean[c]));
    }
    rep.add(traj[k].k, "mean_evolution", err, tol * scale);
  }
  return rep;
}

struct CounterReport {
  long iters = 0;
  long comm_expected = 0;
  long comm_actual = 0;
  long grad_direct = 0;       // authoritative: direct schedule summation
  long grad_closed_form = 0;  // valid once the phase length has hit 1
  long grad_actual = 0;
  bool ok = false;
};

// Validates cumulative communication and computation counters for the
// diminishing-phase schedule pair (consensus rounds k, phase length
// max(tg0-(k-1), 1)).
inline CounterReport work_counters_check(const Trajectory& traj,
                                         const Schedule& tc,
                                         const Schedule& tg) {
  if (!tc.is_linear_in_k() || !tg.is_decrease_to_one())
    throw InvalidParameterError(
        "work_counters_check: schedules are not the diminishing-phase pair");
  if (traj.empty())
    throw InvalidParameterError("work_counters_check: empty trajectory");
  CounterReport r;
  const long k_final = traj.back().k;
  r.iters = k_final;
  r.comm_expected = k_final * (k_final + 1) / 2;
  r.comm_actual = traj.back().comm_rounds;
  for (long k = 1; k <= k_final; ++k) r.grad_direct += tg.at(k);
  const long tg0 = tg.init();
  r.grad_closed_form =
      (k_final >= tg0) ? k_final + tg0 * (tg0 - 1) / 2 : r.grad_direct;
  r.grad_actual = traj.back().grad_rounds;
  r.ok = r.comm_actual == r.comm_expected && r.grad_actual == r.grad_direct &&
         r.grad_direct == r.grad_closed_form;
  return r;
}

}  // namespace neardgd
