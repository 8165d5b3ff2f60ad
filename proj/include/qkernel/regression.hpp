#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkernel/kernel.hpp"

namespace qkernel {

enum class BasisKind { AFFINE, POLY2 };

std::string to_string(BasisKind k);
BasisKind parse_basis(const std::string& s);

// AFFINE: (1, x_1..x_n). POLY2: AFFINE followed by x_j x_k for j <= k in
// lexicographic order.
std::size_t basis_size(BasisKind kind, std::size_t n_features);
std::vector<double> expand(BasisKind kind, std::span<const double> x);
Eigen::MatrixXd design_matrix(BasisKind kind, const FeatureMatrix& X);

struct RegModel {
  std::vector<double> coefficients;
  BasisKind basis = BasisKind::AFFINE;
  std::size_t n_features = 0;
  double threshold = 0.0;
  bool rank_deficient = false;

  double value(std::span<const double> x) const;
};

// ||Phi q - y||^2 + ridge ||q||^2
double regression_loss(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& q, double ridge);

// Orthogonal-factorization solve; minimum-norm solution (and the
// rank_deficient flag) when Phi is rank deficient and ridge == 0.
RegModel fit_least_squares(const FeatureMatrix& X, std::span<const double> y, BasisKind basis,
                           double ridge = 0.0);

struct AnnealSchedule {
  double t0 = 1.0;
  double cooling = 0.999;
  long iterations = 10000;
  double step = 0.5;  // proposal scale at t0; shrinks with sqrt(T / t0)

  void validate() const;
};

struct AnnealTrace {
  double initial_loss = 0.0;
  std::vector<double> best_loss;  // one entry per iteration
};

// Metropolis search over q starting from q = 0. Returns the best iterate seen.
RegModel fit_annealing(const FeatureMatrix& X, std::span<const double> y, BasisKind basis,
                       const AnnealSchedule& schedule, std::uint64_t seed, double ridge = 0.0,
                       AnnealTrace* trace = nullptr);

// f(x) >= threshold -> +1, else -1.
int predict_label(const RegModel& model, std::span<const double> x);

void save_reg(std::ostream& out, const RegModel& model);
RegModel load_reg(std::istream& in);

}  // namespace qkernel
