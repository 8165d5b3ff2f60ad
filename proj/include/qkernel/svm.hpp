#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qkernel/kernel.hpp"

namespace qkernel {

struct SvmConfig {
  double C = 1.0;
  double tol = 1e-3;  // KKT violation tolerance
  double eps = 1e-12; // smallest alpha step that counts as progress
  int max_passes = 10;
  long max_iters = 100000;  // pair updates

  void validate() const;
};

struct SvmModel {
  std::vector<double> alphas;
  double bias = 0.0;
  std::vector<int> labels;
  std::vector<std::size_t> support_indices;  // ascending, alpha > 0
  KernelConfig kernel;
  FeatureMatrix training_features;
  double C = 1.0;

  bool converged = true;
  long iterations = 0;
  // Dual objective sampled every 100 pair updates, plus the final value.
  std::vector<double> objective_trace;
};

// Solves max_a sum(a) - 1/2 a' (yy' o K) a, 0 <= a <= C, y'a = 0 with SMO.
// `features` may be empty when only Gram-based decisions are needed; when
// given, its digest must match gram.dataset_digest.
SvmModel train(const GramMatrix& gram, std::span<const int> y, const SvmConfig& cfg,
               FeatureMatrix features = {});

double dual_objective(const Eigen::MatrixXd& K, std::span<const int> y,
                      std::span<const double> alphas);

// sum_i a_i y_i K(x_i, x) + b, evaluated from the stored kernel config.
double decision_value(const SvmModel& model, std::span<const double> x);

// Same sum from a precomputed kernel row (entries K(x_i, x), i over training
// points). Summation runs over support indices in ascending order.
double decision_from_row(const SvmModel& model, std::span<const double> kernel_row);

// Batch decisions for queries, one cross-kernel evaluation.
std::vector<double> decision_values(const SvmModel& model, const FeatureMatrix& queries,
                                    unsigned workers = 1);

inline int sign_label(double v) { return v >= 0.0 ? +1 : -1; }

int predict(const SvmModel& model, std::span<const double> x);

void save_svm(std::ostream& out, const SvmModel& model);
SvmModel load_svm(std::istream& in);

}  // namespace qkernel
