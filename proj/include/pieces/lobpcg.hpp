#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace pieces {

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd vector;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Lowest eigenpair of a symmetric operator by single-vector LOBPCG.
// apply(x, y) sets y = A x; precondition(r, lambda, w) sets w ~ (A - lambda)^-1 r.
template <class Apply, class Precondition>
EigenPair lobpcg_lowest(Apply&& apply, Precondition&& precondition, Eigen::VectorXd x, double tol,
                        int max_iter) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const Eigen::Index n = x.size();
  EigenPair out;
  x.normalize();
  VectorXd ax(n), w(n), aw(n), p, ap;
  apply(x, ax);
  double lambda = x.dot(ax);
  for (int it = 1; it <= max_iter; ++it) {
    const VectorXd r = ax - lambda * x;
    out.residual = r.norm();
    out.iterations = it;
    if (out.residual <= tol * std::max(std::abs(lambda), 1e-300)) {
      out.converged = true;
      break;
    }
    precondition(r, lambda, w);
    // keep the new direction clean of x and p before applying A
    w -= x * x.dot(w);
    if (p.size()) w -= p * (p.dot(w) / p.squaredNorm());
    w -= x * x.dot(w);
    const double wn = w.norm();
    if (!(wn > 0.0)) break;
    w /= wn;
    apply(w, aw);

    const int k = p.size() ? 3 : 2;
    MatrixXd S(n, k), AS(n, k);
    S.col(0) = x;
    S.col(1) = w;
    AS.col(0) = ax;
    AS.col(1) = aw;
    if (k == 3) {
      S.col(2) = p;
      AS.col(2) = ap;
    }
    const MatrixXd G = S.transpose() * S;
    Eigen::SelfAdjointEigenSolver<MatrixXd> ge(G);
    const double gmax = ge.eigenvalues().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < k; ++i)
      if (ge.eigenvalues()(i) > 1e-13 * gmax) keep.push_back(i);
    MatrixXd T(k, keep.size());
    for (std::size_t c = 0; c < keep.size(); ++c)
      T.col(c) = ge.eigenvectors().col(keep[c]) / std::sqrt(ge.eigenvalues()(keep[c]));
    const MatrixXd Q = S * T, AQ = AS * T;
    MatrixXd H = Q.transpose() * AQ;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> he(H);
    const VectorXd y = T * he.eigenvectors().col(0);  // coefficients on S
    VectorXd yp = y;
    yp(0) = 0.0;
    p = S * yp;
    ap = AS * yp;
    x = S * y;
    ax = AS * y;
    const double xn = x.norm();
    x /= xn;
    ax /= xn;
    lambda = x.dot(ax);
    if (p.norm() < 1e-300) {
      p.resize(0);
      ap.resize(0);
    }
  }
  out.value = lambda;
  out.residual = (ax - lambda * x).norm();
  out.converged = out.residual <= tol * std::max(std::abs(lambda), 1e-300);
  out.vector = x;
  return out;
}

}  // namespace pieces
