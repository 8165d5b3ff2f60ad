// Reference implementations used only by the tests. Each one takes a
// different route from the library code it checks: dense Kronecker-built
// unitaries for the simulator, cyclic Jacobi for eigenproblems, projected
// gradient for the SVM dual, Gaussian elimination for linear solves.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline CMat kron(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Single-qubit gate g on qubit q (bit q of the index) of an n-qubit register.
inline CMat on_qubit(const CMat& g, int q, int n) {
  const auto hi = CMat::Identity(Eigen::Index{1} << (n - q - 1), Eigen::Index{1} << (n - q - 1));
  const auto lo = CMat::Identity(Eigen::Index{1} << q, Eigen::Index{1} << q);
  return kron(CMat(hi), kron(g, CMat(lo)));
}

inline CMat ry(double t) {
  CMat m(2, 2);
  m << std::cos(t / 2), -std::sin(t / 2), std::sin(t / 2), std::cos(t / 2);
  return m;
}

inline CMat hadamard() {
  CMat m(2, 2);
  const double r = 1.0 / std::sqrt(2.0);
  m << r, r, r, -r;
  return m;
}

inline CMat phase(double l) {
  CMat m = CMat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = std::polar(1.0, l);
  return m;
}

inline CMat pauli_z() {
  CMat m = CMat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

// e^{i l} on the odd-parity subspace of (j, k): built from the projectors
// (I +- Z_j Z_k) / 2.
inline CMat parity_phase(int j, int k, double l, int n) {
  const CMat zz = on_qubit(pauli_z(), j, n) * on_qubit(pauli_z(), k, n);
  const CMat id = CMat::Identity(zz.rows(), zz.cols());
  return 0.5 * (id + zz) + std::polar(1.0, l) * 0.5 * (id - zz);
}

inline CVec zero_state(int n) {
  CVec v = CVec::Zero(Eigen::Index{1} << n);
  v(0) = 1.0;
  return v;
}

// Dense U(x) for the ZZ map (H, P(2x), parity phase 2(pi-x_j)(pi-x_k)).
inline CMat zz_unitary(const std::vector<double>& x, int reps,
                       const std::vector<std::pair<int, int>>& pairs) {
  constexpr double pi = std::numbers::pi;
  const int n = static_cast<int>(x.size());
  CMat u = CMat::Identity(Eigen::Index{1} << n, Eigen::Index{1} << n);
  for (int r = 0; r < reps; ++r) {
    for (int q = 0; q < n; ++q) u = on_qubit(hadamard(), q, n) * u;
    for (int q = 0; q < n; ++q) u = on_qubit(phase(2 * x[q]), q, n) * u;
    for (auto [j, k] : pairs) u = parity_phase(j, k, 2 * (pi - x[j]) * (pi - x[k]), n) * u;
  }
  return u;
}

// Dense U(x) for the custom map (RY(2x), parity phase pi x_j x_k).
inline CMat custom_unitary(const std::vector<double>& x, int reps,
                           const std::vector<std::pair<int, int>>& pairs) {
  constexpr double pi = std::numbers::pi;
  const int n = static_cast<int>(x.size());
  CMat u = CMat::Identity(Eigen::Index{1} << n, Eigen::Index{1} << n);
  for (int r = 0; r < reps; ++r) {
    for (int q = 0; q < n; ++q) u = on_qubit(ry(2 * x[q]), q, n) * u;
    for (auto [j, k] : pairs) u = parity_phase(j, k, pi * x[j] * x[k], n) * u;
  }
  return u;
}

struct EigenResult {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns, matching values
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is <= tol.
inline EigenResult jacobi_eigen(Eigen::MatrixXd a, double tol = 1e-12) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  auto off = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  for (int sweep = 0; sweep < 100 && off() > tol; ++sweep) {
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  EigenResult r;
  r.values.resize(n);
  r.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    r.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return r;
}

// Solves A x = b by Gaussian elimination with partial pivoting.
inline Eigen::VectorXd gauss_solve(Eigen::MatrixXd a, Eigen::VectorXd b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index piv = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    a.row(col).swap(a.row(piv));
    std::swap(b(col), b(piv));
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      a.row(r) -= f * a.row(col);
      b(r) -= f * b(col);
    }
  }
  Eigen::VectorXd x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double s = b(r);
    for (Eigen::Index c = r + 1; c < n; ++c) s -= a(r, c) * x(c);
    x(r) = s / a(r, r);
  }
  return x;
}

// Euclidean projection onto {0 <= a <= C, y'a = 0}, by bisection on the
// multiplier of the equality constraint.
inline Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& v, const Eigen::VectorXd& y, double C) {
  auto proj = [&](double mu) {
    Eigen::VectorXd a = v - mu * y;
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = std::clamp(a(i), 0.0, C);
    return a;
  };
  double lo = -1.0, hi = 1.0;
  while (y.dot(proj(lo)) < 0) lo *= 2;
  while (y.dot(proj(hi)) > 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (y.dot(proj(mid)) > 0) lo = mid;
    else hi = mid;
  }
  return proj(0.5 * (lo + hi));
}

struct DualSolution {
  Eigen::VectorXd alpha;
  double bias = 0.0;
  double residual = 0.0;
  bool has_free = false;
};

// Accelerated projected gradient ascent on the SVM dual, run until the
// projected-gradient step residual is <= tol.
inline DualSolution svm_dual_pg(const Eigen::MatrixXd& K, const std::vector<int>& labels, double C,
                                double tol = 1e-10, long max_iter = 2'000'000) {
  const Eigen::Index n = K.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd Q = (y * y.transpose()).cwiseProduct(K);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
  const double L = std::max(es.eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / L;

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), z = a, prev = a;
  double t = 1.0;
  DualSolution out;
  for (long it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd grad = Eigen::VectorXd::Ones(n) - Q * z;
    prev = a;
    a = project_box_hyperplane(z + step * grad, y, C);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = a + ((t - 1.0) / tn) * (a - prev);
    t = tn;
    if (it % 50 == 0) {
      // Restart momentum periodically; check the fixed-point residual at a.
      const Eigen::VectorXd g = Eigen::VectorXd::Ones(n) - Q * a;
      out.residual = (project_box_hyperplane(a + step * g, y, C) - a).norm();
      if (out.residual <= tol) break;
      z = a;
      t = 1.0;
    }
  }
  out.alpha = a;
  const Eigen::VectorXd u = K * a.cwiseProduct(y);
  double sum = 0.0;
  int free = 0;
  const double edge = 1e-7 * C;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a(i) > edge && a(i) < C - edge) {
      sum += y(i) - u(i);
      ++free;
    }
  }
  out.has_free = free > 0;
  out.bias = free ? sum / free : 0.0;
  return out;
}

}  // namespace oracle
