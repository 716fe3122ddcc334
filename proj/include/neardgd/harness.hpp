#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <future>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "neardgd/core.hpp"
#include "neardgd/csv.hpp"
#include "neardgd/errors.hpp"
#include "neardgd/graph.hpp"
#include "neardgd/linalg.hpp"
#include "neardgd/objective.hpp"

namespace neardgd {

struct CostModel {
  double c_c = 1.0;  // price of one consensus round
  double c_g = 1.0;  // price of one gradient step
};

// A method variant in the schedule-pair notation
//   ((g1,g2),(c1,c2))
// where the first pair describes the gradient phase and the second the
// consensus phase: "-" keeps the count constant, "<p>-" decreases it by one
// every p iterations (floor 1), "<p>+" increases it by one every p
// iterations, and "k" ties it to the iteration counter (decrease-to-one for
// the gradient side, one-round-per-iteration growth for the consensus side).
// The literal "dgd" selects the classic baseline.
struct VariantSpec {
  std::string name;  // canonical notation, round-trips through parse_variant
  bool is_dgd = false;
  Schedule tg = Schedule::constant(1);
  Schedule tc = Schedule::constant(1);
};

namespace detail {

class VariantParser {
 public:
  explicit VariantParser(std::string_view text) : text_(text) {}

  VariantSpec parse() {
    if (text_ == "dgd" || text_ == "DGD") {
      VariantSpec v;
      v.is_dgd = true;
      v.name = "dgd";
      return v;
    }
    VariantSpec v;
    expect('(');
    expect('(');
    const long g1 = parse_count("gradient");
    expect(',');
    v.tg = parse_gradient_rule(g1);
    expect(')');
    expect(',');
    expect('(');
    const long c1 = parse_count("consensus");
    expect(',');
    v.tc = parse_consensus_rule(c1);
    expect(')');
    expect(')');
    if (pos_ != text_.size())
      throw ParseError("variant: trailing characters", pos_);
    return v;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c)
      throw ParseError(std::string("variant: expected '") + c + "'", pos_);
    ++pos_;
  }

  long parse_int() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ == start) throw ParseError("variant: expected a number", pos_);
    if (pos_ - start > 9) throw ParseError("variant: number too large", start);
    long v = 0;
    for (std::size_t i = start; i < pos_; ++i)
      v = v * 10 + (text_[i] - '0');
    return v;
  }

  long parse_count(const char* what) {
    const std::size_t start = pos_;
    const long v = parse_int();
    if (v < 1)
      throw ParseError(std::string("variant: ") + what +
                           " count must be at least 1",
                       start);
    return v;
  }

  Schedule parse_gradient_rule(long g1) {
    if (peek() == '-') {
      ++pos_;
      return Schedule::constant(g1);
    }
    if (peek() == 'k') {
      ++pos_;
      return Schedule::decrease_to_one(g1);
    }
    const std::size_t start = pos_;
    const long period = parse_int();
    if (period < 1)
      throw ParseError("variant: period must be at least 1", start);
    expect('-');
    return Schedule::decrease_every(g1, period);
  }

  Schedule parse_consensus_rule(long c1) {
    if (peek() == '-') {
      ++pos_;
      return Schedule::constant(c1);
    }
    if (peek() == 'k') {
      const std::size_t start = pos_;
      ++pos_;
      if (c1 != 1)
        throw ParseError(
            "variant: iteration-linked consensus growth requires the count "
            "to start at 1",
            start);
      return Schedule::linear_in_k();
    }
    const std::size_t start = pos_;
    const long period = parse_int();
    if (period < 1)
      throw ParseError("variant: period must be at least 1", start);
    expect('+');
    return Schedule::increase_every(c1, period);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string gradient_rule_text(const Schedule& s) {
  switch (s.kind()) {
    case Schedule::Kind::constant:
      return std::to_string(s.init()) + ",-";
    case Schedule::Kind::decrease_to_one:
      return std::to_string(s.init()) + ",k";
    case Schedule::Kind::decrease_every:
      return std::to_string(s.init()) + "," + std::to_string(s.period()) +
             "-";
    default:
      throw InvalidParameterError(
          "variant: gradient schedule has no notation");
  }
}

inline std::string consensus_rule_text(const Schedule& s) {
  switch (s.kind()) {
    case Schedule::Kind::constant:
      return std::to_string(s.init()) + ",-";
    case Schedule::Kind::linear_in_k:
      return "1,k";
    case Schedule::Kind::increase_every:
      return std::to_string(s.init()) + "," + std::to_string(s.period()) +
             "+";
    default:
      throw InvalidParameterError(
          "variant: consensus schedule has no notation");
  }
}

}  // namespace detail

inline std::string to_string(const VariantSpec& v) {
  if (v.is_dgd) return "dgd";
  return "((" + detail::gradient_rule_text(v.tg) + "),(" +
         detail::consensus_rule_text(v.tc) + "))";
}

inline VariantSpec parse_variant(std::string_view text) {
  VariantSpec v = detail::VariantParser(text).parse();
  if (!v.is_dgd) v.name = to_string(v);
  return v;
}

struct RunMetadata {
  int run_id = 0;
  std::string variant;
  int n = 0;
  int p = 0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double c_c = 1.0;
  double c_g = 1.0;
  long horizon = 0;
  std::string topology;
};

struct TrajectoryRow {
  long k = 0;
  double rel_error = 0.0;        // |mean - optimum| / |optimum|
  double consensus_error = 0.0;  // rms agent deviation from the mean
  long cum_comm = 0;
  long cum_grad = 0;
  double cum_cost = 0.0;
};

struct TrajectoryRecord {
  RunMetadata meta;
  std::vector<TrajectoryRow> rows;
};

namespace detail {

struct BaseRow {
  long k = 0;
  double rel_error = 0.0;
  double consensus_error = 0.0;
  long cum_comm = 0;
  long cum_grad = 0;
};

inline std::vector<BaseRow> fold_trajectory(const ProblemInstance& inst,
                                            const Trajectory& traj) {
  std::vector<BaseRow> rows;
  rows.reserve(traj.size());
  const double x_star_norm = lin::norm(inst.x_star);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(inst.n));
  for (const auto& s : traj) {
    BaseRow r;
    r.k = s.k;
    lin::Vector d = s.x_mean;
    for (lin::Index c = 0; c < d.size(); ++c) d[c] -= inst.x_star[c];
    const double dist = lin::norm(d);
    r.rel_error = x_star_norm > 0.0 ? dist / x_star_norm : dist;
    double dev = 0.0;
    for (lin::Index i = 0; i < s.x.rows(); ++i)
      for (lin::Index j = 0; j < s.x.cols(); ++j) {
        const double e = s.x(i, j) - s.x_mean[j];
        dev += e * e;
      }
    r.consensus_error = std::sqrt(dev) * inv_sqrt_n;
    r.cum_comm = s.comm_rounds;
    r.cum_grad = s.grad_rounds;
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<TrajectoryRow> price_rows(const std::vector<BaseRow>& base,
                                             const CostModel& cost) {
  std::vector<TrajectoryRow> rows;
  rows.reserve(base.size());
  for (const auto& b : base) {
    TrajectoryRow r;
    r.k = b.k;
    r.rel_error = b.rel_error;
    r.consensus_error = b.consensus_error;
    r.cum_comm = b.cum_comm;
    r.cum_grad = b.cum_grad;
    r.cum_cost = cost.c_c * static_cast<double>(b.cum_comm) +
                 cost.c_g * static_cast<double>(b.cum_grad);
    rows.push_back(r);
  }
  return rows;
}

inline SolverConfig variant_config(const VariantSpec& variant, double alpha,
                                   long horizon, bool record_inner,
                                   bool unsafe_alpha = false) {
  SolverConfig cfg;
  cfg.alpha = alpha;
  cfg.max_iters = horizon;
  cfg.record_inner = record_inner;
  cfg.unsafe_alpha = unsafe_alpha;
  if (variant.is_dgd) {
    cfg.method = Method::dgd;
  } else {
    cfg.method = Method::near_dgd;
    cfg.tc = variant.tc;
    cfg.tg = variant.tg;
  }
  return cfg;
}

}  // namespace detail

// Runs one variant for `horizon` outer iterations and prices its counters
// under the given cost model.
inline TrajectoryRecord run_experiment(const ProblemInstance& inst,
                                       const ConsensusMatrix& w,
                                       const VariantSpec& variant,
                                       double alpha, const CostModel& cost,
                                       long horizon) {
  const Trajectory traj =
      run(inst, w, detail::variant_config(variant, alpha, horizon, false));
  TrajectoryRecord rec;
  rec.rows = detail::price_rows(detail::fold_trajectory(inst, traj), cost);
  rec.meta.variant = variant.is_dgd ? "dgd" : variant.name;
  rec.meta.n = inst.n;
  rec.meta.p = inst.p;
  rec.meta.kappa = inst.kappa_requested > 0.0 ? inst.kappa_requested
                                              : inst.kappa;
  rec.meta.seed = inst.seed;
  rec.meta.alpha = alpha;
  rec.meta.beta = w.beta;
  rec.meta.c_c = cost.c_c;
  rec.meta.c_g = cost.c_g;
  rec.meta.horizon = horizon;
  rec.meta.topology = w.topology;
  return rec;
}

struct SweepResult {
  std::vector<TrajectoryRecord> records;
  std::vector<std::string> failures;  // one line per failed run
};

// Runs every (variant, alpha) combination, prices each trajectory under
// every cost model, and assigns stable run ids in nested order (variant
// outermost, then alpha, then cost model). An empty alpha list means the
// default step length. Trajectories are shared across cost models; jobs > 1
// distributes the runs over threads without affecting ids or results.
inline SweepResult sweep(const ProblemInstance& inst, const ConsensusMatrix& w,
                         const std::vector<VariantSpec>& variants,
                         std::vector<double> alphas,
                         std::vector<CostModel> cost_models, long horizon,
                         int jobs = 1, bool unsafe_alpha = false) {
  if (alphas.empty()) alphas.push_back(default_alpha(inst));
  if (cost_models.empty()) cost_models.push_back(CostModel{});
  if (jobs < 1) jobs = 1;

  struct Task {
    const VariantSpec* variant = nullptr;
    double alpha = 0.0;
    std::vector<detail::BaseRow> base;
    bool failed = false;
    std::string error;
  };
  std::vector<Task> tasks;
  for (const auto& v : variants)
    for (const double a : alphas) tasks.push_back(Task{&v, a, {}, false, {}});

  const auto run_task = [&](Task& t) {
    try {
      const Trajectory traj =
          run(inst, w,
              detail::variant_config(*t.variant, t.alpha, horizon, false,
                                     unsafe_alpha));
      t.base = detail::fold_trajectory(inst, traj);
    } catch (const std::exception& e) {
      t.failed = true;
      t.error = (t.variant->is_dgd ? std::string("dgd") : t.variant->name) +
                " alpha=" + csv::format_double(t.alpha) + ": " + e.what();
    }
  };

  if (jobs == 1 || tasks.size() <= 1) {
    for (auto& t : tasks) run_task(t);
  } else {
    std::vector<std::future<void>> workers;
    std::size_t next = 0;
    const int width = std::min<int>(jobs, static_cast<int>(tasks.size()));
    std::mutex m;
    for (int wi = 0; wi < width; ++wi) {
      workers.push_back(std::async(std::launch::async, [&]() {
        for (;;) {
          std::size_t idx;
          {
            std::lock_guard<std::mutex> lock(m);
            if (next >= tasks.size()) return;
            idx = next++;
          }
          run_task(tasks[idx]);
        }
      }));
    }
    for (auto& f : workers) f.get();
  }

  SweepResult out;
  int run_id = 0;
  for (auto& t : tasks) {
    if (t.failed) {
      out.failures.push_back(t.error);
      run_id += static_cast<int>(cost_models.size());
      continue;
    }
    for (const auto& cost : cost_models) {
      TrajectoryRecord rec;
      rec.rows = detail::price_rows(t.base, cost);
      rec.meta.run_id = run_id++;
      rec.meta.variant = t.variant->is_dgd ? "dgd" : t.variant->name;
      rec.meta.n = inst.n;
      rec.meta.p = inst.p;
      rec.meta.kappa =
          inst.kappa_requested > 0.0 ? inst.kappa_requested : inst.kappa;
      rec.meta.seed = inst.seed;
      rec.meta.alpha = t.alpha;
      rec.meta.beta = w.beta;
      rec.meta.c_c = cost.c_c;
      rec.meta.c_g = cost.c_g;
      rec.meta.horizon = horizon;
      rec.meta.topology = w.topology;
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

namespace detail {

inline std::string run_file_name(int run_id) {
  std::string digits = std::to_string(run_id);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return "run_" + digits + ".csv";
}

}  // namespace detail

inline const char* kTrajectoryHeader =
    "k,rel_error,consensus_error,cum_comm,cum_grad,cum_cost";
inline const char* kManifestHeader =
    "run_id,variant,n,p,kappa,seed,alpha,beta,c_c,c_g,horizon,topology";

// Writes one CSV per record plus a manifest tying run ids to their settings.
// Output is byte-deterministic: fixed row order and shortest round-trip
// number formatting.
inline void export_csv(const std::vector<TrajectoryRecord>& records,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());

  std::string manifest = std::string(kManifestHeader) + "\n";
  for (const auto& rec : records) {
    std::string text = std::string(kTrajectoryHeader) + "\n";
    for (const auto& r : rec.rows) {
      text += std::to_string(r.k);
      text += ',';
      text += csv::format_double(r.rel_error);
      text += ',';
      text += csv::format_double(r.consensus_error);
      text += ',';
      text += std::to_string(r.cum_comm);
      text += ',';
      text += std::to_string(r.cum_grad);
      text += ',';
      text += csv::format_double(r.cum_cost);
      text += '\n';
    }
    csv::write_text(dir / detail::run_file_name(rec.meta.run_id), text);

    manifest += std::to_string(rec.meta.run_id);
    manifest += ',';
    manifest += csv::quote_field(rec.meta.variant);
    manifest += ',';
    manifest += std::to_string(rec.meta.n);
    manifest += ',';
    manifest += std::to_string(rec.meta.p);
    manifest += ',';
    manifest += csv::format_double(rec.meta.kappa);
    manifest += ',';
    manifest += std::to_string(rec.meta.seed);
    manifest += ',';
    manifest += csv::format_double(rec.meta.alpha);
    manifest += ',';
    manifest += csv::format_double(rec.meta.beta);
    manifest += ',';
    manifest += csv::format_double(rec.meta.c_c);
    manifest += ',';
    manifest += csv::format_double(rec.meta.c_g);
    manifest += ',';
    manifest += std::to_string(rec.meta.horizon);
    manifest += ',';
    manifest += csv::quote_field(rec.meta.topology);
    manifest += '\n';
  }
  csv::write_text(dir / "manifest.csv", manifest);
}

// Reads back a directory written by export_csv. Doubles survive bit-exactly.
inline std::vector<TrajectoryRecord> import_csv(
    const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.csv";
  const auto lines = csv::read_lines(manifest_path);
  if (lines.empty() || lines[0] != kManifestHeader)
    throw IoError("manifest has an unexpected header: " +
                  manifest_path.string());
  std::vector<TrajectoryRecord> records;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = csv::split_line(lines[li]);
    if (f.size() != 12)
      throw IoError("manifest row has wrong field count: " + lines[li]);
    TrajectoryRecord rec;
    rec.meta.run_id = static_cast<int>(csv::parse_int(f[0]));
    rec.meta.variant = f[1];
    rec.meta.n = static_cast<int>(csv::parse_int(f[2]));
    rec.meta.p = static_cast<int>(csv::parse_int(f[3]));
    rec.meta.kappa = csv::parse_double(f[4]);
    rec.meta.seed = csv::parse_u64(f[5]);
    rec.meta.alpha = csv::parse_double(f[6]);
    rec.meta.beta = csv::parse_double(f[7]);
    rec.meta.c_c = csv::parse_double(f[8]);
    rec.meta.c_g = csv::parse_double(f[9]);
    rec.meta.horizon = csv::parse_int(f[10]);
    rec.meta.topology = f[11];

    const auto run_path = dir / detail::run_file_name(rec.meta.run_id);
    const auto rl = csv::read_lines(run_path);
    if (rl.empty() || rl[0] != kTrajectoryHeader)
      throw IoError("run file has an unexpected header: " + run_path.string());
    for (std::size_t ri = 1; ri < rl.size(); ++ri) {
      if (rl[ri].empty()) continue;
      const auto rf = csv::split_line(rl[ri]);
      if (rf.size() != 6)
        throw IoError("run row has wrong field count: " + rl[ri]);
      TrajectoryRow row;
      row.k = csv::parse_int(rf[0]);
      row.rel_error = csv::parse_double(rf[1]);
      row.consensus_error = csv::parse_double(rf[2]);
      row.cum_comm = csv::parse_int(rf[3]);
      row.cum_grad = csv::parse_int(rf[4]);
      row.cum_cost = csv::parse_double(rf[5]);
      rec.rows.push_back(row);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace neardgd
