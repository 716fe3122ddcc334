#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "neardgd/config.hpp"
#include "neardgd/core.hpp"
#include "neardgd/csv.hpp"
#include "neardgd/errors.hpp"
#include "neardgd/harness.hpp"
#include "neardgd/objective.hpp"
#include "neardgd/plot.hpp"
#include "neardgd/theory.hpp"

// Entry points behind the CLI subcommands. Exit codes:
//   0  success
//   1  configuration problem (bad file, bad key, bad variant, bad CLI value)
//   2  run failure (divergence, inadmissible parameters at run time, I/O)
//   3  at least one enabled verification found a violated bound

namespace neardgd {

// Output directory resolution: explicit flag, then the config file, then the
// NEARDGD_OUT environment variable, then a fixed fallback.
inline std::filesystem::path resolve_output_dir(
    const std::optional<std::string>& config_dir,
    const std::optional<std::filesystem::path>& override) {
  if (override) return *override;
  if (config_dir) return *config_dir;
  if (const char* env = std::getenv("NEARDGD_OUT"); env && *env)
    return std::filesystem::path(env);
  return std::filesystem::path("neardgd-out");
}

struct VerificationOutcome {
  CheckReport report;
  std::vector<std::string> notes;
};

// Runs every enabled bound verification that applies to each configured
// variant. Fixed schedules get the fixed-schedule checks, the
// diminishing-phase pair gets the rate and counter checks; the mean-evolution
// identity is audited on every variant.
inline VerificationOutcome run_verification(const RunConfig& cfg,
                                            const ProblemInstance& inst,
                                            const ConsensusMatrix& w) {
  VerificationOutcome out;
  out.report.slack = cfg.verify.slack;
  const double alpha = cfg.alpha ? *cfg.alpha : default_alpha(inst);

  for (const auto& v : cfg.variants) {
    const std::string& name = v.is_dgd ? "dgd" : v.name;
    const bool fixed =
        !v.is_dgd && v.tc.is_constant() && v.tg.is_constant();
    const bool diminishing =
        !v.is_dgd && v.tc.is_linear_in_k() && v.tg.is_decrease_to_one();

    SolverConfig run_cfg;
    run_cfg.alpha = alpha;
    run_cfg.max_iters = cfg.horizon;
    run_cfg.unsafe_alpha = cfg.unsafe_alpha;
    run_cfg.record_inner = cfg.verify.lemma3 && fixed;
    if (v.is_dgd) {
      run_cfg.method = Method::dgd;
    } else {
      run_cfg.method = Method::near_dgd;
      run_cfg.tc = v.tc;
      run_cfg.tg = v.tg;
    }
    const Trajectory traj = run(inst, w, run_cfg);

    {
      CheckReport mean = mean_evolution_check(traj, alpha);
      for (auto& r : mean.rows) r.id = name + ":" + r.id;
      out.report.merge(mean);
    }

    if (fixed) {
      const long tc = v.tc.at(1);
      const long tg = v.tg.at(1);
      const TheoryConstants t = compute_constants(inst, w, alpha, tg);
      if (cfg.verify.theorem1) {
        CheckReport rep =
            theorem1_check(inst, traj, t, tc, tg, cfg.verify.slack);
        for (auto& r : rep.rows) r.id = name + ":" + r.id;
        out.report.merge(rep);
      }
      if (cfg.verify.lemma3) {
        CheckReport rep =
            lemma_diagnostics(inst, traj, t, tc, tg, cfg.verify.slack);
        for (auto& r : rep.rows) r.id = name + ":" + r.id;
        out.report.merge(rep);
      }
      if (cfg.verify.theorem2)
        out.notes.push_back(name +
                            ": diminishing-phase rate check skipped (fixed "
                            "schedules)");
      if (cfg.verify.counters)
        out.notes.push_back(name +
                            ": counter check skipped (fixed schedules)");
    } else if (diminishing) {
      if (cfg.verify.theorem2) {
        const TheoryConstants t =
            compute_constants(inst, w, alpha, v.tg.init());
        CheckReport rep = theorem2_check(inst, traj, t, cfg.verify.slack);
        for (auto& r : rep.rows) r.id = name + ":" + r.id;
        out.report.merge(rep);
      }
      if (cfg.verify.counters) {
        const CounterReport c = work_counters_check(traj, v.tc, v.tg);
        out.report.add_exact(c.iters, name + ":counters_comm",
                             static_cast<double>(c.comm_actual),
                             static_cast<double>(c.comm_expected));
        out.report.add_exact(c.iters, name + ":counters_grad",
                             static_cast<double>(c.grad_actual),
                             static_cast<double>(c.grad_direct));
        out.report.add_exact(c.iters, name + ":counters_grad_closed_form",
                             static_cast<double>(c.grad_closed_form),
                             static_cast<double>(c.grad_direct));
      }
      if (cfg.verify.theorem1)
        out.notes.push_back(
            name + ": fixed-schedule bound check skipped (schedules vary)");
      if (cfg.verify.lemma3)
        out.notes.push_back(
            name + ": per-iterate audit skipped (schedules vary)");
    } else {
      if (cfg.verify.any())
        out.notes.push_back(
            name + ": no bound checks apply to this schedule combination");
    }
  }
  return out;
}

inline std::string verification_summary(const VerificationOutcome& v) {
  struct Agg {
    long rows = 0;
    long violations = 0;
    double min_margin = 0.0;
    bool first = true;
  };
  std::map<std::string, Agg> by_id;
  for (const auto& r : v.report.rows) {
    Agg& a = by_id[r.id];
    ++a.rows;
    if (!r.ok) ++a.violations;
    const double margin = r.rhs - r.lhs;
    if (a.first || margin < a.min_margin) a.min_margin = margin;
    a.first = false;
  }
  std::ostringstream os;
  for (const auto& [id, a] : by_id)
    os << id << ": " << a.rows << " rows, " << a.violations
       << " violations, min margin " << csv::format_double(a.min_margin)
       << "\n";
  for (const auto& n : v.notes) os << "note: " << n << "\n";
  os << (v.report.violations == 0 ? "all enabled checks satisfied"
                                  : "VIOLATIONS FOUND")
     << " (" << v.report.rows.size() << " inequalities)\n";
  return os.str();
}

namespace detail {

template <typename Fn>
int guard_command(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace detail

// `run` subcommand: generate the instance and network, run every configured
// variant, export trajectory CSVs (plus the instance and mixing matrix for
// replay), then optionally verify bounds and emit plots.
inline int cmd_run(const std::filesystem::path& config_path,
                   const std::optional<std::filesystem::path>& out_override,
                   int jobs = 1) {
  return detail::guard_command([&]() -> int {
    const RunConfig cfg = load_run_config(config_path);
    const ProblemInstance inst =
        generate_quadratic(cfg.n, cfg.p, cfg.kappa, cfg.seed);
    const ConsensusMatrix w = build_consensus(cfg);
    const auto outdir = resolve_output_dir(cfg.output_dir, out_override);

    std::vector<double> alphas;
    if (cfg.alpha) alphas.push_back(*cfg.alpha);
    const SweepResult result =
        sweep(inst, w, cfg.variants, alphas, cfg.cost_models, cfg.horizon,
              jobs, cfg.unsafe_alpha);

    export_csv(result.records, outdir);
    save_instance(inst, outdir / "instance.json");
    write_matrix_csv(w.w, outdir / "consensus_matrix.csv");

    if (!result.failures.empty()) {
      for (const auto& f : result.failures)
        std::cerr << "run failed: " << f << "\n";
      return 2;
    }

    int rc = 0;
    if (cfg.verify.any()) {
      const VerificationOutcome v = run_verification(cfg, inst, w);
      write_check_csv(v.report, outdir / "verify_report.csv");
      const std::string summary = verification_summary(v);
      csv::write_text(outdir / "verify_summary.txt", summary);
      std::cout << summary;
      if (v.report.violations > 0) rc = 3;
    }

    if (cfg.plots.enabled) {
      PlotOptions opt;
      opt.axes = cfg.plots.axes;
      opt.marker_every = cfg.plots.marker_every;
      emit_plots(result.records, outdir, opt);
    }

    std::cout << "wrote " << result.records.size() << " records to "
              << outdir.string() << "\n";
    return rc;
  });
}

// `verify` subcommand: run the configured variants and audit every enabled
// bound, writing a row-per-inequality report.
inline int cmd_verify(
    const std::filesystem::path& config_path,
    const std::optional<std::filesystem::path>& out_override) {
  return detail::guard_command([&]() -> int {
    const RunConfig cfg = load_run_config(config_path);
    const ProblemInstance inst =
        generate_quadratic(cfg.n, cfg.p, cfg.kappa, cfg.seed);
    const ConsensusMatrix w = build_consensus(cfg);
    const auto outdir = resolve_output_dir(cfg.output_dir, out_override);

    VerifyOptions effective = cfg.verify;
    if (!effective.any()) {
      // verify with nothing enabled checks everything applicable
      effective.theorem1 = effective.theorem2 = true;
      effective.lemma3 = effective.counters = true;
    }
    RunConfig cfg_eff = cfg;
    cfg_eff.verify = effective;

    const VerificationOutcome v = run_verification(cfg_eff, inst, w);
    std::error_code ec;
    std::filesystem::create_directories(outdir, ec);
    if (ec) throw IoError("cannot create directory " + outdir.string());
    write_check_csv(v.report, outdir / "verify_report.csv");
    const std::string summary = verification_summary(v);
    csv::write_text(outdir / "verify_summary.txt", summary);
    std::cout << summary;
    return v.report.violations > 0 ? 3 : 0;
  });
}

// `plot` subcommand: re-render plots from exported records.
inline int cmd_plot(const std::filesystem::path& records_dir,
                    const std::string& axes_list, long marker_every,
                    const std::optional<std::filesystem::path>& out_override) {
  return detail::guard_command([&]() -> int {
    PlotOptions opt;
    opt.axes.clear();
    std::string cur;
    for (const char c : axes_list + ",") {
      if (c == ',') {
        if (!cur.empty()) {
          if (cur != "iters" && cur != "grads" && cur != "comms" &&
              cur != "cost")
            throw ConfigError("plot: unknown axis '" + cur + "'");
          opt.axes.push_back(cur);
          cur.clear();
        }
      } else {
        cur.push_back(c);
      }
    }
    if (opt.axes.empty()) throw ConfigError("plot: no axes requested");
    if (marker_every < 1)
      throw ConfigError("plot: --marker-every must be at least 1");
    opt.marker_every = marker_every;

    const auto records = import_csv(records_dir);
    const auto dir = out_override ? *out_override : records_dir;
    const auto written = emit_plots(records, dir, opt);
    std::cout << "wrote " << written.size() << " plot files to "
              << dir.string() << "\n";
    return 0;
  });
}

}  // namespace neardgd
