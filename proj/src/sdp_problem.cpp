#include "evmpc/sdp.hpp"

#include "evmpc/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <ostream>

namespace evmpc::sdp {

LinearFunctional& LinearFunctional::add(int block, int row, int col,
                                        double coeff) {
  if (coeff != 0.0) matrix_terms_.push_back({block, row, col, coeff});
  return *this;
}

LinearFunctional& LinearFunctional::add_scalar(int index, double coeff) {
  if (coeff != 0.0) scalar_terms_.push_back({index, coeff});
  return *this;
}

LinearFunctional& LinearFunctional::operator+=(const LinearFunctional& other) {
  matrix_terms_.insert(matrix_terms_.end(), other.matrix_terms_.begin(),
                       other.matrix_terms_.end());
  scalar_terms_.insert(scalar_terms_.end(), other.scalar_terms_.begin(),
                       other.scalar_terms_.end());
  return *this;
}

double LinearFunctional::evaluate(const std::vector<Eigen::MatrixXd>& blocks,
                                  const Eigen::VectorXd& scalars) const {
  double value = 0.0;
  for (const auto& t : matrix_terms_)
    value += t.coeff * blocks.at(t.block)(t.row, t.col);
  for (const auto& t : scalar_terms_) value += t.coeff * scalars(t.index);
  return value;
}

int SdpProblem::add_block(int dim) {
  if (dim < 1) throw InputError("block dimension must be >= 1");
  block_dims_.push_back(dim);
  return static_cast<int>(block_dims_.size()) - 1;
}

int SdpProblem::add_scalar(ScalarKind kind) {
  scalar_kinds_.push_back(kind);
  return static_cast<int>(scalar_kinds_.size()) - 1;
}

int SdpProblem::add_constraint(LinearFunctional lhs, Sense sense, double rhs,
                               std::string label) {
  constraints_.push_back({std::move(lhs), sense, rhs, std::move(label)});
  return static_cast<int>(constraints_.size()) - 1;
}

namespace {

void check_functional(const LinearFunctional& f,
                      const std::vector<int>& dims, int num_scalars,
                      const std::string& where) {
  for (const auto& t : f.matrix_terms()) {
    if (t.block < 0 || t.block >= static_cast<int>(dims.size()))
      throw InputError(where + ": undeclared block " + std::to_string(t.block));
    const int n = dims[t.block];
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
      throw InputError(where + ": entry outside block " +
                       std::to_string(t.block));
    if (!std::isfinite(t.coeff)) throw InputError(where + ": non-finite coefficient");
  }
  for (const auto& t : f.scalar_terms()) {
    if (t.index < 0 || t.index >= num_scalars)
      throw InputError(where + ": undeclared scalar " + std::to_string(t.index));
    if (!std::isfinite(t.coeff)) throw InputError(where + ": non-finite coefficient");
  }
}

}  // namespace

void SdpProblem::validate() const {
  check_functional(objective_, block_dims_, num_scalars(), "objective");
  if (!std::isfinite(objective_constant_))
    throw InputError("objective: non-finite constant");
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const auto& c = constraints_[i];
    const std::string where =
        "constraint " + std::to_string(i) +
        (c.label.empty() ? std::string() : " (" + c.label + ")");
    check_functional(c.lhs, block_dims_, num_scalars(), where);
    if (c.lhs.empty()) throw InputError(where + ": empty functional");
    if (!std::isfinite(c.rhs)) throw InputError(where + ": non-finite rhs");
  }
}

void SdpProblem::dump(std::ostream& os) const {
  os << "# blocks";
  for (int d : block_dims_) os << ' ' << d;
  os << "\n# scalars " << num_scalars() << '\n';
  os.precision(17);
  auto emit = [&os](int index, const LinearFunctional& f) {
    for (const auto& t : f.matrix_terms())
      os << index << ' ' << t.block + 1 << ' ' << t.row + 1 << ' ' << t.col + 1
         << ' ' << t.coeff << '\n';
    for (const auto& t : f.scalar_terms())
      os << index << " 0 " << t.index + 1 << " 1 " << t.coeff << '\n';
  };
  emit(0, objective_);
  for (std::size_t i = 0; i < constraints_.size(); ++i) {
    const auto& c = constraints_[i];
    emit(static_cast<int>(i) + 1, c.lhs);
    os << i + 1 << " rhs " << (c.sense == Sense::equal ? "=" : "<=") << ' '
       << c.rhs << '\n';
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

void SolverOptions::validate() const {
  if (!(gap_tol > 0 && feas_tol > 0 && psd_tol > 0 && max_iter > 0 &&
        infeasibility_bound > 0))
    throw InputError("solver options must be positive");
  if (!(step_fraction > 0 && step_fraction < 1))
    throw InputError("step_fraction must lie in (0, 1)");
}

EigenPair max_eigpair(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError("max_eigpair: matrix must be square and nonempty");
  if (!m.allFinite()) throw InputError("max_eigpair: non-finite input");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const auto last = m.rows() - 1;
  Eigen::VectorXd v = es.eigenvectors().col(last);
  Eigen::Index pivot = 0;
  v.cwiseAbs().maxCoeff(&pivot);
  if (v(pivot) < 0) v = -v;
  return {es.eigenvalues()(last), v};
}

HermitianEigenPair max_eigpair(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw InputError("max_eigpair: matrix must be square and nonempty");
  if (!m.allFinite()) throw InputError("max_eigpair: non-finite input");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const auto last = m.rows() - 1;
  Eigen::VectorXcd v = es.eigenvectors().col(last);
  Eigen::Index pivot = 0;
  v.cwiseAbs().maxCoeff(&pivot);
  const std::complex<double> phase = v(pivot) / std::abs(v(pivot));
  v /= phase;
  v(pivot) = std::abs(v(pivot));
  return {es.eigenvalues()(last), v};
}

HermitianEmbedding::HermitianEmbedding(int n, int block) : n_(n), block_(block) {
  if (n < 1) throw InputError("hermitian embedding: n must be >= 1");
}

HermitianEmbedding embed_hermitian(int n, int block) {
  return HermitianEmbedding(n, block);
}

void HermitianEmbedding::add_real(LinearFunctional& f, int k, int m,
                                  double coeff) const {
  f.add(block_, k, m, 0.5 * coeff);
  f.add(block_, n_ + k, n_ + m, 0.5 * coeff);
}

void HermitianEmbedding::add_imag(LinearFunctional& f, int k, int m,
                                  double coeff) const {
  if (k == m) return;
  f.add(block_, n_ + k, m, 0.5 * coeff);
  f.add(block_, k, n_ + m, -0.5 * coeff);
}

void HermitianEmbedding::add_trace(LinearFunctional& f, double coeff) const {
  for (int k = 0; k < n_; ++k) add_real(f, k, k, coeff);
}

void HermitianEmbedding::add_quadratic(LinearFunctional& f,
                                       const Eigen::VectorXcd& w,
                                       double coeff) const {
  if (w.size() != n_) throw InputError("add_quadratic: dimension mismatch");
  // x^T X x with x = [Re w; Im w] equals w^H H w on the embedding pattern;
  // averaging with the rotated copy [-Im w; Re w] keeps the read symmetric.
  Eigen::VectorXd x(2 * n_), y(2 * n_);
  x << w.real(), w.imag();
  y << -w.imag(), w.real();
  for (int p = 0; p < 2 * n_; ++p) {
    for (int q = p; q < 2 * n_; ++q) {
      const double scale = (p == q) ? 0.5 : 1.0;
      const double c = scale * coeff * (x(p) * x(q) + y(p) * y(q));
      f.add(block_, p, q, c);
    }
  }
}

std::vector<LinearFunctional> HermitianEmbedding::structure_constraints() const {
  std::vector<LinearFunctional> rows;
  for (int k = 0; k < n_; ++k) {
    for (int m = k; m < n_; ++m) {
      LinearFunctional a;
      a.add(block_, k, m, 1.0).add(block_, n_ + k, n_ + m, -1.0);
      rows.push_back(std::move(a));
    }
  }
  for (int k = 0; k < n_; ++k) {
    for (int m = k; m < n_; ++m) {
      LinearFunctional b;
      b.add(block_, n_ + k, m, 1.0);
      if (m != k) b.add(block_, n_ + m, k, 1.0);
      rows.push_back(std::move(b));
    }
  }
  return rows;
}

Eigen::MatrixXd HermitianEmbedding::embed(const Eigen::MatrixXcd& h) const {
  if (h.rows() != n_ || h.cols() != n_)
    throw InputError("embed: dimension mismatch");
  Eigen::MatrixXd x(2 * n_, 2 * n_);
  const Eigen::MatrixXd a = h.real();
  const Eigen::MatrixXd b = h.imag();
  x << a, -b, b, a;
  return x;
}

Eigen::MatrixXcd HermitianEmbedding::extract(const Eigen::MatrixXd& x) const {
  if (x.rows() != 2 * n_ || x.cols() != 2 * n_)
    throw InputError("extract: dimension mismatch");
  const Eigen::MatrixXd a =
      0.5 * (x.topLeftCorner(n_, n_) + x.bottomRightCorner(n_, n_));
  const Eigen::MatrixXd lower = x.bottomLeftCorner(n_, n_);
  const Eigen::MatrixXd upper = x.topRightCorner(n_, n_);
  const Eigen::MatrixXd b = 0.5 * (lower - upper);
  Eigen::MatrixXcd h(n_, n_);
  h.real() = 0.5 * (a + a.transpose());
  h.imag() = 0.5 * (b - b.transpose());
  return h;
}

}  // namespace evmpc::sdp
