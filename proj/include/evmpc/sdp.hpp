#pragma once

#include <Eigen/Dense>

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace evmpc::sdp {

// coeff * X_block(row, col). Blocks are symmetric, so (row, col) and
// (col, row) address the same entry.
struct MatrixTerm {
  int block;
  int row;
  int col;
  double coeff;
};

struct ScalarTerm {
  int index;
  double coeff;
};

class LinearFunctional {
 public:
  LinearFunctional& add(int block, int row, int col, double coeff);
  LinearFunctional& add_scalar(int index, double coeff);
  LinearFunctional& operator+=(const LinearFunctional& other);

  const std::vector<MatrixTerm>& matrix_terms() const { return matrix_terms_; }
  const std::vector<ScalarTerm>& scalar_terms() const { return scalar_terms_; }
  bool empty() const { return matrix_terms_.empty() && scalar_terms_.empty(); }

  double evaluate(const std::vector<Eigen::MatrixXd>& blocks,
                  const Eigen::VectorXd& scalars) const;

 private:
  std::vector<MatrixTerm> matrix_terms_;
  std::vector<ScalarTerm> scalar_terms_;
};

enum class Sense { equal, less_equal };
enum class ScalarKind { nonnegative, free };

struct Constraint {
  LinearFunctional lhs;
  Sense sense = Sense::equal;
  double rhs = 0.0;
  std::string label;
};

/// Minimize a linear objective over symmetric PSD blocks and scalar
/// variables subject to linear equalities and `<=` inequalities.
class SdpProblem {
 public:
  int add_block(int dim);
  int add_scalar(ScalarKind kind = ScalarKind::nonnegative);
  int add_constraint(LinearFunctional lhs, Sense sense, double rhs,
                     std::string label = {});

  LinearFunctional& objective() { return objective_; }
  const LinearFunctional& objective() const { return objective_; }
  void set_objective_constant(double c) { objective_constant_ = c; }
  double objective_constant() const { return objective_constant_; }

  const std::vector<int>& block_dims() const { return block_dims_; }
  const std::vector<ScalarKind>& scalar_kinds() const { return scalar_kinds_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  int num_scalars() const { return static_cast<int>(scalar_kinds_.size()); }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }

  // Throws InputError if any functional references an undeclared variable,
  // a coefficient is non-finite, or a constraint is empty.
  void validate() const;

  // Plain-text sparse dump, one nonzero per line:
  //   <constraint> <block> <row> <col> <value>
  // Constraint 0 is the objective; constraints are numbered from 1. Blocks
  // are numbered from 1; block 0 holds scalar variables with row = scalar
  // index + 1 and col = 1. Right-hand sides are written as `<constraint> rhs
  // <sense> <value>` lines.
  void dump(std::ostream& os) const;

 private:
  std::vector<int> block_dims_;
  std::vector<ScalarKind> scalar_kinds_;
  std::vector<Constraint> constraints_;
  LinearFunctional objective_;
  double objective_constant_ = 0.0;
};

enum class SolveStatus { optimal, infeasible, max_iter, numerical_failure };

std::string to_string(SolveStatus status);

struct SolverOptions {
  double gap_tol = 1e-7;
  double feas_tol = 1e-7;
  double psd_tol = 1e-8;
  int max_iter = 100;
  double step_fraction = 0.98;
  double infeasibility_bound = 1e12;

  void validate() const;
};

struct IterationLog {
  double primal_objective;
  double dual_objective;
  double primal_residual;
  double dual_residual;
};

struct SdpSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::VectorXd scalars;
  // One multiplier per constraint, in the sign convention of the Lagrangian
  // objective - sum y_i (lhs_i - rhs_i).
  Eigen::VectorXd duals;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;              // |p - d| / (1 + |p| + |d|)
  double primal_residual = 0.0;  // scaled max-norm of constraint violation
  double dual_residual = 0.0;
  int iterations = 0;
  std::vector<IterationLog> history;
};

// Primal-dual path-following with HKM direction and Mehrotra
// predictor-corrector. Single-threaded and deterministic.
SdpSolution solve(const SdpProblem& problem, const SolverOptions& options = {});

struct EigenPair {
  double value;
  Eigen::VectorXd vector;
};

struct HermitianEigenPair {
  double value;
  Eigen::VectorXcd vector;
};

// Largest eigenvalue and a unit eigenvector. The vector's sign (phase, for
// the Hermitian overload) is fixed so its largest-magnitude component is
// real and positive. Throws InputError on non-finite input.
EigenPair max_eigpair(const Eigen::MatrixXd& m);
HermitianEigenPair max_eigpair(const Eigen::MatrixXcd& m);

// Real symmetric image of an n x n Hermitian H = A + jB as the 2n x 2n block
//   X = [[A, -B], [B, A]]
// stored in PSD block `block`. H >= 0 iff X >= 0.
class HermitianEmbedding {
 public:
  HermitianEmbedding(int n, int block);

  int size() const { return n_; }
  int real_dim() const { return 2 * n_; }
  int block() const { return block_; }

  // Append coeff * Re H(k, m) / coeff * Im H(k, m) to f. Reads average the
  // two copies in X, so the functional is invariant under the embedding's
  // symmetry.
  void add_real(LinearFunctional& f, int k, int m, double coeff) const;
  void add_imag(LinearFunctional& f, int k, int m, double coeff) const;
  // coeff * Trace(H)
  void add_trace(LinearFunctional& f, double coeff) const;
  // coeff * w^H H w
  void add_quadratic(LinearFunctional& f, const Eigen::VectorXcd& w,
                     double coeff) const;

  // Equalities (each == 0) forcing a free 2n x 2n symmetric block into the
  // [[A, -B], [B, A]] pattern: n(n+1)/2 for the diagonal copies and
  // n(n+1)/2 for antisymmetry of B.
  std::vector<LinearFunctional> structure_constraints() const;

  Eigen::MatrixXd embed(const Eigen::MatrixXcd& h) const;
  // Projects onto the pattern first, so slightly asymmetric solver output is
  // tolerated.
  Eigen::MatrixXcd extract(const Eigen::MatrixXd& x) const;

 private:
  int n_;
  int block_;
};

HermitianEmbedding embed_hermitian(int n, int block = 0);

}  // namespace evmpc::sdp
