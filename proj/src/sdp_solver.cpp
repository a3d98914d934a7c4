// Dense-block primal-dual interior point method for
//
//   min <C, X> + c'x   s.t.  A(X) + A_lp x = b,  X >= 0 (blockwise), x >= 0
//
// Scalar variables, inequality slacks and split free scalars all live in
// the nonnegative orthant `x`. The Schur complement is assembled with the
// sparsity induced by which constraints share a block or scalar and
// factored with a sparse Cholesky; all per-block algebra is dense.

#include "evmpc/error.hpp"
#include "evmpc/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace evmpc::sdp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Directed {
  int p;
  int q;
  double a;
};

struct RowInBlock {
  int row;
  std::vector<Directed> entries;
};

struct StandardForm {
  std::vector<int> dims;
  int n_lp = 0;
  int m = 0;
  std::vector<std::vector<RowInBlock>> block_rows;           // per block
  std::vector<std::vector<std::pair<int, double>>> lp_rows;  // per row
  std::vector<std::vector<std::pair<int, double>>> lp_cols;  // per lp var
  VectorXd b;
  std::vector<MatrixXd> C;
  VectorXd c;
  std::vector<int> pos_index;
  std::vector<int> neg_index;
  VectorXd row_norm;
  double b_scale = 1.0;
  double c_scale = 1.0;
};

using BlockKey = std::tuple<int, int, int>;

void accumulate_matrix_terms(const LinearFunctional& f,
                             std::map<BlockKey, double>& out) {
  for (const auto& t : f.matrix_terms()) {
    const int r = std::min(t.row, t.col);
    const int c = std::max(t.row, t.col);
    out[{t.block, r, c}] += (r == c) ? t.coeff : 0.5 * t.coeff;
  }
}

StandardForm to_standard_form(const SdpProblem& problem) {
  StandardForm sf;
  sf.dims = problem.block_dims();
  sf.m = problem.num_constraints();

  for (auto kind : problem.scalar_kinds()) {
    sf.pos_index.push_back(sf.n_lp++);
    sf.neg_index.push_back(kind == ScalarKind::free ? sf.n_lp++ : -1);
  }
  int slack_base = sf.n_lp;
  for (const auto& c : problem.constraints())
    if (c.sense == Sense::less_equal) ++sf.n_lp;

  sf.block_rows.assign(sf.dims.size(), {});
  sf.lp_rows.assign(sf.m, {});
  sf.lp_cols.assign(sf.n_lp, {});
  sf.b.resize(sf.m);
  sf.row_norm.resize(sf.m);

  auto scalar_entries = [&](const LinearFunctional& f) {
    std::map<int, double> lp;
    for (const auto& t : f.scalar_terms()) {
      lp[sf.pos_index[t.index]] += t.coeff;
      if (sf.neg_index[t.index] >= 0) lp[sf.neg_index[t.index]] -= t.coeff;
    }
    return lp;
  };

  int slack = slack_base;
  for (int i = 0; i < sf.m; ++i) {
    const auto& con = problem.constraints()[i];
    std::map<BlockKey, double> sym;
    accumulate_matrix_terms(con.lhs, sym);
    auto lp = scalar_entries(con.lhs);
    if (con.sense == Sense::less_equal) lp[slack++] += 1.0;

    double norm2 = 0.0;
    std::map<int, std::vector<Directed>> per_block;
    for (const auto& [key, a] : sym) {
      if (a == 0.0) continue;
      const auto [blk, r, c] = key;
      auto& e = per_block[blk];
      e.push_back({r, c, a});
      norm2 += a * a;
      if (r != c) {
        e.push_back({c, r, a});
        norm2 += a * a;
      }
    }
    for (const auto& [j, a] : lp) {
      if (a != 0.0) {
        sf.lp_rows[i].push_back({j, a});
        norm2 += a * a;
      }
    }
    if (norm2 == 0.0)
      throw InputError("constraint " + std::to_string(i) + " has no nonzero coefficient");
    const double norm = std::sqrt(norm2);
    sf.row_norm(i) = norm;
    for (auto& [blk, entries] : per_block) {
      for (auto& d : entries) d.a /= norm;
      sf.block_rows[blk].push_back({i, std::move(entries)});
    }
    for (auto& [j, a] : sf.lp_rows[i]) {
      a /= norm;
      sf.lp_cols[j].push_back({i, a});
    }
    sf.b(i) = con.rhs / norm;
  }

  sf.C.reserve(sf.dims.size());
  for (int d : sf.dims) sf.C.push_back(MatrixXd::Zero(d, d));
  std::map<BlockKey, double> obj;
  accumulate_matrix_terms(problem.objective(), obj);
  for (const auto& [key, a] : obj) {
    const auto [blk, r, c] = key;
    sf.C[blk](r, c) += a;
    if (r != c) sf.C[blk](c, r) += a;
  }
  sf.c = VectorXd::Zero(sf.n_lp);
  for (const auto& [j, a] : scalar_entries(problem.objective())) sf.c(j) += a;

  sf.b_scale = std::max(1.0, sf.b.size() ? sf.b.cwiseAbs().maxCoeff() : 0.0);
  double cmax = sf.c.size() ? sf.c.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& cb : sf.C) cmax = std::max(cmax, cb.cwiseAbs().maxCoeff());
  sf.c_scale = std::max(1.0, cmax);
  sf.b /= sf.b_scale;
  for (auto& cb : sf.C) cb /= sf.c_scale;
  sf.c /= sf.c_scale;
  return sf;
}

// Sparse Schur complement with a fixed pattern; `slots` map every
// accumulation in assembly order onto the compressed value array.
struct Schur {
  Eigen::SparseMatrix<double> M;
  std::vector<std::vector<int>> block_slots;
  std::vector<std::vector<int>> lp_slots;
  std::vector<int> diag_slots;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
  bool analyzed = false;
};

int slot_of(const Eigen::SparseMatrix<double>& M, int i, int j) {
  // lower triangle: column j, row i >= j
  const int* inner = M.innerIndexPtr();
  const int begin = M.outerIndexPtr()[j];
  const int end = M.outerIndexPtr()[j + 1];
  const int* it = std::lower_bound(inner + begin, inner + end, i);
  return static_cast<int>(it - inner);
}

void build_schur(const StandardForm& sf, Schur& s) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < sf.m; ++i) trip.emplace_back(i, i, 0.0);
  for (const auto& rows : sf.block_rows)
    for (const auto& ri : rows)
      for (const auto& rj : rows)
        if (ri.row >= rj.row) trip.emplace_back(ri.row, rj.row, 0.0);
  for (const auto& col : sf.lp_cols)
    for (const auto& [i, ai] : col)
      for (const auto& [j, aj] : col)
        if (i >= j) trip.emplace_back(i, j, 0.0);
  s.M.resize(sf.m, sf.m);
  s.M.setFromTriplets(trip.begin(), trip.end());
  s.M.makeCompressed();

  s.block_slots.resize(sf.block_rows.size());
  for (std::size_t b = 0; b < sf.block_rows.size(); ++b) {
    const auto& rows = sf.block_rows[b];
    for (const auto& rj : rows)
      for (const auto& ri : rows)
        if (ri.row >= rj.row) s.block_slots[b].push_back(slot_of(s.M, ri.row, rj.row));
  }
  s.lp_slots.resize(sf.lp_cols.size());
  for (std::size_t v = 0; v < sf.lp_cols.size(); ++v)
    for (const auto& [i, ai] : sf.lp_cols[v])
      for (const auto& [j, aj] : sf.lp_cols[v])
        if (i >= j) s.lp_slots[v].push_back(slot_of(s.M, i, j));
  for (int i = 0; i < sf.m; ++i) s.diag_slots.push_back(slot_of(s.M, i, i));
}

struct Iterate {
  std::vector<MatrixXd> X;
  std::vector<MatrixXd> Z;
  VectorXd x;
  VectorXd z;
  VectorXd y;
};

struct Direction {
  std::vector<MatrixXd> dX;
  std::vector<MatrixXd> dZ;
  VectorXd dx;
  VectorXd dz;
  VectorXd dy;
};

double inner(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

// A(G) for (possibly nonsymmetric) block matrices G and lp vector g.
VectorXd apply_A(const StandardForm& sf, const std::vector<MatrixXd>& G,
                 const VectorXd& g) {
  VectorXd out = VectorXd::Zero(sf.m);
  for (std::size_t b = 0; b < sf.block_rows.size(); ++b)
    for (const auto& r : sf.block_rows[b]) {
      double s = 0.0;
      for (const auto& d : r.entries) s += d.a * G[b](d.p, d.q);
      out(r.row) += s;
    }
  for (int i = 0; i < sf.m; ++i)
    for (const auto& [j, a] : sf.lp_rows[i]) out(i) += a * g(j);
  return out;
}

void apply_AT(const StandardForm& sf, const VectorXd& y,
              std::vector<MatrixXd>& blocks, VectorXd& lp) {
  blocks.resize(sf.dims.size());
  for (std::size_t b = 0; b < sf.dims.size(); ++b) {
    blocks[b] = MatrixXd::Zero(sf.dims[b], sf.dims[b]);
    for (const auto& r : sf.block_rows[b])
      for (const auto& d : r.entries) blocks[b](d.p, d.q) += y(r.row) * d.a;
  }
  lp = VectorXd::Zero(sf.n_lp);
  for (int i = 0; i < sf.m; ++i)
    for (const auto& [j, a] : sf.lp_rows[i]) lp(j) += a * y(i);
}

// Largest alpha with M + alpha dM >= 0, given the Cholesky factor of M.
double max_step(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& dM) {
  const auto L = llt.matrixL();
  MatrixXd t = L.solve(dM);
  MatrixXd s = L.solve(t.transpose());
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step_lp(const VectorXd& v, const VectorXd& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

class Engine {
 public:
  Engine(const StandardForm& sf, const SolverOptions& opt)
      : sf_(sf), opt_(opt) {
    build_schur(sf, schur_);
    nu_ = sf.n_lp;
    for (int d : sf.dims) nu_ += d;
  }

  SdpSolution run(double objective_constant);

 private:
  void initialize();
  bool factor_schur();
  VectorXd solve_schur(const VectorXd& rhs);
  void direction(double sigma_mu, const Direction* predictor, Direction& out);

  const StandardForm& sf_;
  const SolverOptions& opt_;
  Schur schur_;
  int nu_ = 0;
  Iterate it_;
  std::vector<MatrixXd> zinv_;
  std::vector<Eigen::LLT<MatrixXd>> xchol_;
  std::vector<Eigen::LLT<MatrixXd>> zchol_;
  std::vector<MatrixXd> Rd_;
  VectorXd rd_;
};

void Engine::initialize() {
  double bmax = 0.0;
  for (int i = 0; i < sf_.m; ++i) bmax = std::max(bmax, std::abs(sf_.b(i)));
  double cnorm = 0.0;
  for (const auto& cb : sf_.C) cnorm = std::max(cnorm, cb.norm());
  if (sf_.c.size()) cnorm = std::max(cnorm, sf_.c.norm());
  it_.X.clear();
  it_.Z.clear();
  for (int d : sf_.dims) {
    const double n = d;
    const double xi = std::max({10.0, std::sqrt(n), n * (1.0 + bmax) / 2.0});
    const double eta = std::max({10.0, std::sqrt(n), 1.0 + cnorm});
    it_.X.push_back(xi * MatrixXd::Identity(d, d));
    it_.Z.push_back(eta * MatrixXd::Identity(d, d));
  }
  const double xi = std::max(10.0, 1.0 + bmax);
  const double eta = std::max(10.0, 1.0 + cnorm);
  it_.x = VectorXd::Constant(sf_.n_lp, xi);
  it_.z = VectorXd::Constant(sf_.n_lp, eta);
  it_.y = VectorXd::Zero(sf_.m);
}

bool Engine::factor_schur() {
  auto& M = schur_.M;
  double* val = M.valuePtr();
  std::fill(val, val + M.nonZeros(), 0.0);

  const std::size_t nb = sf_.dims.size();
  for (std::size_t b = 0; b < nb; ++b) {
    const auto& rows = sf_.block_rows[b];
    const MatrixXd& Zi = zinv_[b];
    const MatrixXd& X = it_.X[b];
    const int n = sf_.dims[b];
    const auto& slots = schur_.block_slots[b];
    std::size_t k = 0;
    MatrixXd G(n, n);
    for (std::size_t jj = 0; jj < rows.size(); ++jj) {
      // G = Zinv A_j X
      G.setZero();
      for (const auto& d : rows[jj].entries)
        G.noalias() += d.a * Zi.col(d.p) * X.row(d.q);
      const int j = rows[jj].row;
      for (std::size_t ii = 0; ii < rows.size(); ++ii) {
        if (rows[ii].row < j) continue;
        double s = 0.0;
        for (const auto& d : rows[ii].entries) s += d.a * G(d.q, d.p);
        val[slots[k++]] += s;
      }
    }
  }
  for (int v = 0; v < sf_.n_lp; ++v) {
    const double w = it_.x(v) / it_.z(v);
    const auto& col = sf_.lp_cols[v];
    const auto& slots = schur_.lp_slots[v];
    std::size_t k = 0;
    for (const auto& [i, ai] : col)
      for (const auto& [j, aj] : col)
        if (i >= j) val[slots[k++]] += ai * aj * w;
  }

  if (!schur_.analyzed) {
    schur_.llt.analyzePattern(M);
    schur_.analyzed = true;
  }
  schur_.llt.factorize(M);
  if (schur_.llt.info() == Eigen::Success) return true;

  double dmax = 0.0;
  for (int s : schur_.diag_slots) dmax = std::max(dmax, val[s]);
  for (double reg = 1e-14; reg <= 1e-6; reg *= 100.0) {
    for (int s : schur_.diag_slots) val[s] += reg * std::max(dmax, 1.0);
    schur_.llt.factorize(M);
    if (schur_.llt.info() == Eigen::Success) return true;
  }
  return false;
}

VectorXd Engine::solve_schur(const VectorXd& rhs) {
  VectorXd dy = schur_.llt.solve(rhs);
  const VectorXd r = rhs - schur_.M.selfadjointView<Eigen::Lower>() * dy;
  dy += schur_.llt.solve(r);
  return dy;
}

void Engine::direction(double sigma_mu, const Direction* pred, Direction& out) {
  const std::size_t nb = sf_.dims.size();
  std::vector<MatrixXd> G(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    G[b] = zinv_[b] * Rd_[b] * it_.X[b] - sigma_mu * zinv_[b];
    if (pred) G[b] += zinv_[b] * pred->dZ[b] * pred->dX[b];
  }
  VectorXd g = (it_.x.array() * rd_.array() - sigma_mu) / it_.z.array();
  if (pred) g.array() += pred->dx.array() * pred->dz.array() / it_.z.array();

  const VectorXd rhs = sf_.b + apply_A(sf_, G, g);
  out.dy = solve_schur(rhs);

  std::vector<MatrixXd> aty;
  VectorXd aty_lp;
  apply_AT(sf_, out.dy, aty, aty_lp);
  out.dZ.resize(nb);
  out.dX.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    out.dZ[b] = Rd_[b] - aty[b];
    MatrixXd t = sigma_mu * zinv_[b] - it_.X[b] - zinv_[b] * out.dZ[b] * it_.X[b];
    if (pred) t -= zinv_[b] * pred->dZ[b] * pred->dX[b];
    out.dX[b] = 0.5 * (t + t.transpose());
  }
  out.dz = rd_ - aty_lp;
  out.dx = (sigma_mu - it_.x.array() * out.dz.array()) / it_.z.array() - it_.x.array();
  if (pred) out.dx.array() -= pred->dx.array() * pred->dz.array() / it_.z.array();
}

SdpSolution Engine::run(double objective_constant) {
  SdpSolution sol;
  initialize();
  const std::size_t nb = sf_.dims.size();
  const double scale = sf_.b_scale * sf_.c_scale;
  double bnorm = sf_.b.norm();
  double cnorm = std::sqrt(inner(sf_.C, sf_.C) + sf_.c.squaredNorm());

  zinv_.resize(nb);
  xchol_.resize(nb);
  zchol_.resize(nb);
  Rd_.resize(nb);

  auto finish = [&](SolveStatus status, int iters) {
    sol.status = status;
    sol.iterations = iters;
    sol.blocks.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      MatrixXd x = sf_.b_scale * it_.X[b];
      sol.blocks[b] = 0.5 * (x + x.transpose());
    }
    const int ns = static_cast<int>(sf_.pos_index.size());
    sol.scalars.resize(ns);
    for (int k = 0; k < ns; ++k) {
      double v = it_.x(sf_.pos_index[k]);
      if (sf_.neg_index[k] >= 0) v -= it_.x(sf_.neg_index[k]);
      sol.scalars(k) = sf_.b_scale * v;
    }
    sol.duals = sf_.c_scale * it_.y.array() / sf_.row_norm.array();
    sol.primal_objective += objective_constant;
    sol.dual_objective += objective_constant;
    return sol;
  };

  for (int iter = 0;; ++iter) {
    std::vector<MatrixXd> aty;
    VectorXd aty_lp;
    apply_AT(sf_, it_.y, aty, aty_lp);
    for (std::size_t b = 0; b < nb; ++b) Rd_[b] = sf_.C[b] - it_.Z[b] - aty[b];
    rd_ = sf_.c - it_.z - aty_lp;
    const VectorXd Rp = sf_.b - apply_A(sf_, it_.X, it_.x);

    const double pobj = inner(sf_.C, it_.X) + sf_.c.dot(it_.x);
    const double dobj = sf_.b.dot(it_.y);
    sol.primal_objective = scale * pobj;
    sol.dual_objective = scale * dobj;
    sol.gap = std::abs(sol.primal_objective - sol.dual_objective) /
              (1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective));
    sol.primal_residual = Rp.norm() / (1.0 + bnorm);
    sol.dual_residual = std::sqrt(inner(Rd_, Rd_) + rd_.squaredNorm()) / (1.0 + cnorm);
    sol.history.push_back({sol.primal_objective + objective_constant,
                           sol.dual_objective + objective_constant,
                           sol.primal_residual, sol.dual_residual});

    if (sol.gap <= opt_.gap_tol && sol.primal_residual <= opt_.feas_tol &&
        sol.dual_residual <= opt_.feas_tol) {
      for (std::size_t b = 0; b < nb; ++b) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(it_.X[b], Eigen::EigenvaluesOnly);
        if (es.eigenvalues()(0) < -opt_.psd_tol)
          return finish(SolveStatus::numerical_failure, iter);
      }
      return finish(SolveStatus::optimal, iter);
    }
    if (dobj > opt_.infeasibility_bound || pobj < -opt_.infeasibility_bound)
      return finish(SolveStatus::infeasible, iter);
    if (iter >= opt_.max_iter) return finish(SolveStatus::max_iter, iter);

    for (std::size_t b = 0; b < nb; ++b) {
      xchol_[b].compute(it_.X[b]);
      zchol_[b].compute(it_.Z[b]);
      if (xchol_[b].info() != Eigen::Success || zchol_[b].info() != Eigen::Success)
        return finish(SolveStatus::numerical_failure, iter);
      zinv_[b] = zchol_[b].solve(MatrixXd::Identity(sf_.dims[b], sf_.dims[b]));
      zinv_[b] = 0.5 * (zinv_[b] + zinv_[b].transpose());
    }
    if (!factor_schur()) return finish(SolveStatus::numerical_failure, iter);

    const double mu = (inner(it_.X, it_.Z) + it_.x.dot(it_.z)) / nu_;

    auto step_lengths = [&](const Direction& d) {
      double ap = max_step_lp(it_.x, d.dx);
      double ad = max_step_lp(it_.z, d.dz);
      for (std::size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, max_step(xchol_[b], d.dX[b]));
        ad = std::min(ad, max_step(zchol_[b], d.dZ[b]));
      }
      return std::pair{ap, ad};
    };

    Direction pred;
    direction(0.0, nullptr, pred);
    auto [ap_max, ad_max] = step_lengths(pred);
    const double ap = std::min(1.0, ap_max);
    const double ad = std::min(1.0, ad_max);
    double mu_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b)
      mu_aff += (it_.X[b] + ap * pred.dX[b]).cwiseProduct(it_.Z[b] + ad * pred.dZ[b]).sum();
    mu_aff += (it_.x + ap * pred.dx).dot(it_.z + ad * pred.dz);
    mu_aff /= nu_;
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    Direction corr;
    direction(sigma * mu, &pred, corr);
    auto [cp_max, cd_max] = step_lengths(corr);
    const double gamma = opt_.step_fraction;
    const double step_p = std::min(1.0, gamma * cp_max);
    const double step_d = std::min(1.0, gamma * cd_max);
    if (!std::isfinite(step_p) || !std::isfinite(step_d) ||
        !corr.dy.allFinite())
      return finish(SolveStatus::numerical_failure, iter);

    for (std::size_t b = 0; b < nb; ++b) {
      it_.X[b] += step_p * corr.dX[b];
      it_.X[b] = 0.5 * (it_.X[b] + it_.X[b].transpose());
      it_.Z[b] += step_d * corr.dZ[b];
      it_.Z[b] = 0.5 * (it_.Z[b] + it_.Z[b].transpose());
    }
    it_.x += step_p * corr.dx;
    it_.z += step_d * corr.dz;
    it_.y += step_d * corr.dy;
  }
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) {
  options.validate();
  problem.validate();
  const StandardForm sf = to_standard_form(problem);
  if (sf.m == 0) throw InputError("solve: problem has no constraints");
  Engine engine(sf, options);
  return engine.run(problem.objective_constant());
}

}  // namespace evmpc::sdp
