#pragma once

// SDP instances with a known optimum.

#include "evmpc/sdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>

namespace fixtures {

using evmpc::sdp::LinearFunctional;
using evmpc::sdp::SdpProblem;
using evmpc::sdp::Sense;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  return qr.householderQ() * MatrixXd::Identity(n, n);
}

// Primal-dual pair (X*, Z*) with complementary ranges, random A and y*, so
// b = A(X*) and C = Z* + A^T y* have optimum <C, X*>.
struct Constructed {
  SdpProblem problem;
  double optimum;
};

inline Constructed constructed_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(2, 6);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  std::normal_distribution<double> g;

  const int nblocks = 1 + static_cast<int>(seed % 3);
  const int nlp = static_cast<int>(seed % 4);
  std::vector<int> dims;
  std::vector<MatrixXd> xs, zs;
  SdpProblem p;
  for (int k = 0; k < nblocks; ++k) {
    const int n = dim(rng);
    dims.push_back(n);
    p.add_block(n);
    const int r = 1 + static_cast<int>(rng() % (n - 1));
    MatrixXd q = random_orthogonal(n, rng);
    VectorXd lx = VectorXd::Zero(n), lz = VectorXd::Zero(n);
    for (int i = 0; i < r; ++i) lx(i) = pos(rng);
    for (int i = r; i < n; ++i) lz(i) = pos(rng);
    xs.push_back(q * lx.asDiagonal() * q.transpose());
    zs.push_back(q * lz.asDiagonal() * q.transpose());
  }
  VectorXd xl(nlp), zl(nlp);
  for (int j = 0; j < nlp; ++j) {
    p.add_scalar();
    if (j % 2 == 0) {
      xl(j) = pos(rng);
      zl(j) = 0.0;
    } else {
      xl(j) = 0.0;
      zl(j) = pos(rng);
    }
  }

  int dof = nlp;
  for (int n : dims) dof += n * (n + 1) / 2;
  const int m = std::max(1, dof / 2);
  VectorXd ystar(m);
  for (int i = 0; i < m; ++i) ystar(i) = g(rng);

  std::vector<MatrixXd> cblocks = zs;
  VectorXd cl = zl;
  for (int i = 0; i < m; ++i) {
    LinearFunctional f;
    double rhs = 0.0;
    for (int k = 0; k < nblocks; ++k) {
      const int n = dims[k];
      for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c) {
          const double a = g(rng);
          f.add(k, r, c, a);
          const double sym = (r == c) ? a : 0.5 * a;
          rhs += (r == c ? 1.0 : 2.0) * sym * xs[k](r, c);
          cblocks[k](r, c) += ystar(i) * sym;
          if (r != c) cblocks[k](c, r) += ystar(i) * sym;
        }
    }
    for (int j = 0; j < nlp; ++j) {
      const double a = g(rng);
      f.add_scalar(j, a);
      rhs += a * xl(j);
      cl(j) += ystar(i) * a;
    }
    p.add_constraint(std::move(f), Sense::equal, rhs);
  }
  double opt = 0.0;
  for (int k = 0; k < nblocks; ++k) {
    const int n = dims[k];
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c)
        p.objective().add(k, r, c, (r == c ? 1.0 : 2.0) * cblocks[k](r, c));
    opt += cblocks[k].cwiseProduct(xs[k]).sum();
  }
  for (int j = 0; j < nlp; ++j) {
    p.objective().add_scalar(j, cl(j));
    opt += cl(j) * xl(j);
  }
  return {std::move(p), opt};
}

}  // namespace fixtures
