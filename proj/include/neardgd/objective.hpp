#pragma once

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "neardgd/errors.hpp"
#include "neardgd/linalg.hpp"
#include "neardgd/rng.hpp"

namespace neardgd {

// One agent's objective: value, gradient and curvature constants.
class LocalFunction {
 public:
  virtual ~LocalFunction() = default;
  virtual double value(const lin::Vector& x) const = 0;
  virtual lin::Vector gradient(const lin::Vector& x) const = 0;
  virtual double mu() const = 0;        // strong convexity constant
  virtual double lipschitz() const = 0; // gradient Lipschitz constant
};

// f_i(x) = 0.5 x'Ax + b'x with A symmetric positive definite.
class LocalQuadratic final : public LocalFunction {
 public:
  LocalQuadratic(lin::Matrix a, lin::Vector b)
      : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() != a_.cols())
      throw DimensionError("LocalQuadratic: A must be square");
    if (a_.rows() != b_.size())
      throw DimensionError("LocalQuadratic: A and b sizes differ");
    diagonal_ = true;
    for (lin::Index i = 0; i < a_.rows(); ++i) {
      for (lin::Index j = 0; j < a_.cols(); ++j) {
        if (std::abs(a_(i, j) - a_(j, i)) > 1e-12)
          throw InvalidParameterError("LocalQuadratic: A is not symmetric");
        if (i != j && a_(i, j) != 0.0) diagonal_ = false;
      }
    }
    if (diagonal_) {
      mu_ = a_(0, 0);
      l_ = a_(0, 0);
      for (lin::Index i = 1; i < a_.rows(); ++i) {
        mu_ = std::min(mu_, a_(i, i));
        l_ = std::max(l_, a_(i, i));
      }
    } else {
      const auto ev = lin::symmetric_eigenvalues(a_);
      mu_ = ev.front();
      l_ = ev.back();
    }
    if (!(mu_ > 0.0))
      throw InvalidParameterError("LocalQuadratic: A is not positive definite");
  }

  // Diagonal fast path used by the generator; mu and L are exact entries.
  static LocalQuadratic from_diagonal(const lin::Vector& diag,
                                      lin::Vector b) {
    lin::Matrix a = lin::Matrix::Zero(diag.size(), diag.size());
    for (lin::Index i = 0; i < diag.size(); ++i) a(i, i) = diag[i];
    return LocalQuadratic(std::move(a), std::move(b));
  }

  double value(const lin::Vector& x) const override {
    return 0.5 * lin::dot(x, lin::matvec(a_, x)) + lin::dot(b_, x);
  }

  lin::Vector gradient(const lin::Vector& x) const override {
    lin::Vector g = lin::matvec(a_, x);
    for (lin::Index i = 0; i < g.size(); ++i) g[i] += b_[i];
    return g;
  }

  double mu() const override { return mu_; }
  double lipschitz() const override { return l_; }

  const lin::Matrix& a() const { return a_; }
  const lin::Vector& b() const { return b_; }
  bool is_diagonal() const { return diagonal_; }

  // Solves A u = -b.
  lin::Vector minimizer() const {
    lin::Vector u(b_.size());
    if (diagonal_) {
      for (lin::Index i = 0; i < b_.size(); ++i) u[i] = -b_[i] / a_(i, i);
      return u;
    }
    Eigen::LLT<lin::Matrix> llt(a_);
    if (llt.info() != Eigen::Success)
      throw InvalidParameterError("LocalQuadratic: singular system");
    u = llt.solve(-b_);
    return u;
  }

 private:
  lin::Matrix a_;
  lin::Vector b_;
  double mu_ = 0.0;
  double l_ = 0.0;
  bool diagonal_ = false;
};

struct CurvatureConstants {
  double l_max = 0.0;   // max_i L_i
  double mu_bar = 0.0;  // average of mu_i
  double l_bar = 0.0;   // average of L_i
  double gamma = 0.0;   // min_i mu_i L_i / (mu_i + L_i)
};

// Minimizer of the averaged objective (1/n) sum_i f_i for quadratic locals:
// solves (sum_i A_i) x = -(sum_i b_i). Diagonal systems use an exact
// per-coordinate divide; dense ones go through a Cholesky factorization.
inline lin::Vector optimal_solution(const std::vector<LocalQuadratic>& locals) {
  if (locals.empty())
    throw InvalidParameterError("optimal_solution: no local objectives");
  const lin::Index p = locals.front().b().size();
  bool all_diagonal = true;
  for (const auto& f : locals) {
    if (f.b().size() != p)
      throw DimensionError("optimal_solution: mixed dimensions");
    all_diagonal = all_diagonal && f.is_diagonal();
  }
  lin::Vector b_sum = lin::Vector::Zero(p);
  for (lin::Index j = 0; j < p; ++j)
    for (const auto& f : locals) b_sum[j] += f.b()[j];
  if (all_diagonal) {
    lin::Vector x(p);
    for (lin::Index j = 0; j < p; ++j) {
      double aj = 0.0;
      for (const auto& f : locals) aj += f.a()(j, j);
      if (aj == 0.0)
        throw InvalidParameterError("optimal_solution: singular system");
      x[j] = -b_sum[j] / aj;
    }
    return x;
  }
  lin::Matrix a_sum = lin::Matrix::Zero(p, p);
  for (const auto& f : locals) a_sum += f.a();
  Eigen::LLT<lin::Matrix> llt(a_sum);
  if (llt.info() != Eigen::Success)
    throw InvalidParameterError("optimal_solution: singular system");
  return llt.solve(-b_sum);
}

// A network objective: n local quadratics over R^p plus everything derived
// from them that the solver and the theory engine need.
struct ProblemInstance {
  std::vector<LocalQuadratic> locals;
  int n = 0;
  int p = 0;
  std::uint64_t seed = 0;
  double kappa_requested = 0.0;  // 0 for hand-built instances

  // derived
  double l_max = 0.0;
  double mu_bar = 0.0;
  double l_bar = 0.0;
  double kappa = 0.0;  // realized l_bar / mu_bar
  lin::Vector x_star;  // minimizer of the averaged objective
  lin::Matrix u_star;  // n-by-p, row i = minimizer of f_i

  const LocalQuadratic& local(int i) const {
    return locals[static_cast<std::size_t>(i)];
  }

  lin::Vector local_gradient(int i, const lin::Vector& x) const {
    return local(i).gradient(x);
  }

  // Row i of the result is agent i's gradient at row i of the state.
  lin::Matrix stacked_gradient(const lin::Matrix& state) const {
    if (state.rows() != n || state.cols() != p)
      throw DimensionError("stacked_gradient: state must be n-by-p");
    lin::Matrix g(n, p);
    lin::Vector xi(p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) xi[j] = state(i, j);
      const lin::Vector gi = local(i).gradient(xi);
      for (int j = 0; j < p; ++j) g(i, j) = gi[j];
    }
    return g;
  }

  double average_value(const lin::Vector& x) const {
    double s = 0.0;
    for (const auto& f : locals) s += f.value(x);
    return s / static_cast<double>(n);
  }
};

inline CurvatureConstants curvature_constants(const ProblemInstance& inst) {
  CurvatureConstants c;
  c.l_max = inst.l_max;
  c.mu_bar = inst.mu_bar;
  c.l_bar = inst.l_bar;
  bool first = true;
  for (const auto& f : inst.locals) {
    const double g = f.mu() * f.lipschitz() / (f.mu() + f.lipschitz());
    c.gamma = first ? g : std::min(c.gamma, g);
    first = false;
  }
  return c;
}

// Assembles an instance from explicit locals and fills every derived field.
// Validates optimality residuals so a corrupted instance cannot propagate.
inline ProblemInstance make_instance(std::vector<LocalQuadratic> locals,
                                     std::uint64_t seed = 0,
                                     double kappa_requested = 0.0) {
  if (locals.empty())
    throw InvalidParameterError("make_instance: no local objectives");
  ProblemInstance inst;
  inst.n = static_cast<int>(locals.size());
  inst.p = static_cast<int>(locals.front().b().size());
  inst.seed = seed;
  inst.kappa_requested = kappa_requested;
  inst.locals = std::move(locals);

  double mu_sum = 0.0, l_sum = 0.0;
  inst.l_max = 0.0;
  for (const auto& f : inst.locals) {
    if (f.b().size() != inst.p)
      throw DimensionError("make_instance: mixed dimensions");
    mu_sum += f.mu();
    l_sum += f.lipschitz();
    inst.l_max = std::max(inst.l_max, f.lipschitz());
  }
  inst.mu_bar = mu_sum / static_cast<double>(inst.n);
  inst.l_bar = l_sum / static_cast<double>(inst.n);
  inst.kappa = inst.l_bar / inst.mu_bar;

  inst.x_star = optimal_solution(inst.locals);
  inst.u_star.resize(inst.n, inst.p);
  for (int i = 0; i < inst.n; ++i) {
    const lin::Vector ui = inst.local(i).minimizer();
    for (int j = 0; j < inst.p; ++j) inst.u_star(i, j) = ui[j];
  }

  // Optimality residuals, relative to the data scale.
  lin::Vector g_sum = lin::Vector::Zero(inst.p);
  double b_scale = 1.0;
  for (int i = 0; i < inst.n; ++i) {
    const lin::Vector gi = inst.local_gradient(i, inst.x_star);
    for (int j = 0; j < inst.p; ++j) g_sum[j] += gi[j];
    b_scale = std::max(b_scale, lin::norm(inst.local(i).b()));
    lin::Vector ui(inst.p);
    for (int j = 0; j < inst.p; ++j) ui[j] = inst.u_star(i, j);
    const lin::Vector ri = inst.local_gradient(i, ui);
    if (lin::norm(ri) > 1e-10 * std::max(1.0, lin::norm(inst.local(i).b())))
      throw InvalidParameterError("make_instance: local minimizer residual");
  }
  if (lin::norm(g_sum) > 1e-10 * b_scale * static_cast<double>(inst.n))
    throw InvalidParameterError("make_instance: global minimizer residual");

  if (kappa_requested > 0.0 &&
      std::abs(inst.kappa - kappa_requested) > 0.05 * kappa_requested)
    throw InvalidParameterError(
        "make_instance: realized condition number misses the request");
  return inst;
}

// Seeded synthetic family of diagonal quadratics with average condition
// number exactly kappa.
//
// Agent i pins diagonal entry (2i mod p) at kappa and entry (2i+1 mod p) at 1;
// the remaining entries are log-uniform on [1, kappa]. Every agent therefore
// has mu_i = 1 and L_i = kappa, which fixes l_bar/mu_bar = kappa, and the
// rotation spreads the extreme curvatures across coordinates so the averaged
// Hessian stays comparably conditioned instead of degenerating. Linear terms
// are uniform on [0, 1). Draw order is fixed: per agent, diagonal entries in
// coordinate order, then the linear term.
inline ProblemInstance generate_quadratic(int n, int p, double kappa,
                                          std::uint64_t seed) {
  if (n < 1) throw InvalidParameterError("generate_quadratic: need n >= 1");
  if (p < 2)
    throw InvalidParameterError(
        "generate_quadratic: need p >= 2 to place both curvature extremes");
  if (!(kappa >= 1.0))
    throw InvalidParameterError("generate_quadratic: need kappa >= 1");

  Rng rng(seed);
  std::vector<LocalQuadratic> locals;
  locals.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int j_hi = (2 * i) % p;
    const int j_lo = (2 * i + 1) % p;
    lin::Vector diag(p);
    for (int j = 0; j < p; ++j) {
      if (j == j_hi)
        diag[j] = kappa;
      else if (j == j_lo)
        diag[j] = 1.0;
      else
        diag[j] = rng.log_uniform(1.0, kappa);
    }
    lin::Vector b(p);
    for (int j = 0; j < p; ++j) b[j] = rng.uniform01();
    locals.push_back(LocalQuadratic::from_diagonal(diag, std::move(b)));
  }
  return make_instance(std::move(locals), seed, kappa);
}

// --- instance (de)serialization -------------------------------------------
//
// Plain JSON with a format tag. Only diagonal instances are stored (the
// generated family); numbers survive the round trip bit-exactly because
// nlohmann prints shortest round-trip doubles.

inline nlohmann::json instance_to_json(const ProblemInstance& inst) {
  nlohmann::json j;
  j["format"] = "neardgd-instance-v1";
  j["n"] = inst.n;
  j["p"] = inst.p;
  j["seed"] = inst.seed;
  j["kappa_requested"] = inst.kappa_requested;
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& f : inst.locals) {
    if (!f.is_diagonal())
      throw InvalidParameterError(
          "instance_to_json: only diagonal instances are serializable");
    nlohmann::json a;
    std::vector<double> diag, b;
    for (lin::Index k = 0; k < f.b().size(); ++k) {
      diag.push_back(f.a()(k, k));
      b.push_back(f.b()[k]);
    }
    a["a_diag"] = diag;
    a["b"] = b;
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  return j;
}

inline ProblemInstance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "neardgd-instance-v1")
    throw IoError("instance_from_json: unrecognized format");
  const int n = j.at("n").get<int>();
  const int p = j.at("p").get<int>();
  const auto seed = j.at("seed").get<std::uint64_t>();
  const double kappa_requested = j.at("kappa_requested").get<double>();
  const auto& agents = j.at("agents");
  if (!agents.is_array() || static_cast<int>(agents.size()) != n)
    throw IoError("instance_from_json: agent count mismatch");
  std::vector<LocalQuadratic> locals;
  locals.reserve(agents.size());
  for (const auto& a : agents) {
    const auto diag = a.at("a_diag").get<std::vector<double>>();
    const auto b = a.at("b").get<std::vector<double>>();
    if (static_cast<int>(diag.size()) != p || static_cast<int>(b.size()) != p)
      throw IoError("instance_from_json: dimension mismatch");
    lin::Vector dv(p), bv(p);
    for (int k = 0; k < p; ++k) {
      dv[k] = diag[static_cast<std::size_t>(k)];
      bv[k] = b[static_cast<std::size_t>(k)];
    }
    locals.push_back(LocalQuadratic::from_diagonal(dv, std::move(bv)));
  }
  return make_instance(std::move(locals), seed, kappa_requested);
}

inline void save_instance(const ProblemInstance& inst,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << instance_to_json(inst).dump(2) << '\n';
  if (!out.good()) throw IoError("write failed: " + path.string());
}

inline ProblemInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid instance file " + path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace neardgd
