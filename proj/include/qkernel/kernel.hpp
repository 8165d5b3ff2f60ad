#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qkernel/feature_map.hpp"

namespace qkernel {

using FeatureMatrix = std::vector<FeatureVector>;

enum class KernelKind { QUANTUM_EXACT, QUANTUM_SHOTS, LINEAR, POLY, RBF };

// Parameters are present exactly for the kinds that use them; validate()
// enforces that.
struct KernelConfig {
  KernelKind kind = KernelKind::LINEAR;
  std::optional<FeatureMapSpec> feature_map;  // quantum kinds
  std::optional<int> shots;                   // QUANTUM_SHOTS
  std::optional<std::uint64_t> seed;          // QUANTUM_SHOTS
  std::optional<double> jitter;               // QUANTUM_SHOTS, diagonal add, default 0
  std::optional<int> degree;                  // POLY
  std::optional<double> offset;               // POLY
  std::optional<double> gamma;                // RBF

  static KernelConfig linear();
  static KernelConfig poly(int degree, double offset);
  static KernelConfig rbf(double gamma);
  static KernelConfig quantum(FeatureMapSpec map);
  static KernelConfig quantum_shots(FeatureMapSpec map, int shots, std::uint64_t seed);

  bool is_quantum() const {
    return kind == KernelKind::QUANTUM_EXACT || kind == KernelKind::QUANTUM_SHOTS;
  }
  void validate() const;
  std::string describe() const;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

std::string to_string(KernelKind k);
KernelKind parse_kernel_kind(const std::string& s);
void to_json(nlohmann::json& j, const KernelConfig& cfg);
void from_json(const nlohmann::json& j, KernelConfig& cfg);

struct GramMatrix {
  Eigen::MatrixXd entries;
  KernelConfig kernel;
  std::string dataset_digest;

  Eigen::Index size() const { return entries.rows(); }
};

// K(x, x2). For QUANTUM_SHOTS the sampling stream is derived from the
// configured seed and the contents of both vectors, symmetrically.
double kernel_value(const KernelConfig& cfg, std::span<const double> x,
                    std::span<const double> x2);

// Binomial(shots, K_q(x, x2)) / shots, sampled with cfg.seed.
double shot_estimate(const KernelConfig& cfg, std::span<const double> x,
                     std::span<const double> x2);
// Same estimator with an explicit stream seed.
double shot_estimate(const KernelConfig& cfg, std::span<const double> x,
                     std::span<const double> x2, std::uint64_t stream_seed);
// Sampling step alone, for a known fidelity p.
double sample_fidelity(double p, int shots, std::uint64_t stream_seed);

// Stream seed for the unordered pair (i, j) of a Gram matrix.
std::uint64_t pair_seed(std::uint64_t seed, std::size_t i, std::size_t j);

// workers == 0 picks the hardware concurrency.
GramMatrix gram(const KernelConfig& cfg, const FeatureMatrix& X, unsigned workers = 1);

// rows: queries, cols: reference points. Entry (a, b) equals
// kernel_value(cfg, queries[a], reference[b]).
Eigen::MatrixXd cross_kernel(const KernelConfig& cfg, const FeatureMatrix& queries,
                             const FeatureMatrix& reference, unsigned workers = 1);

// SHA-256 hex digest of the row count, column count and IEEE-754 bit
// patterns of X (little-endian).
std::string dataset_digest(const FeatureMatrix& X);

void write_gram(std::ostream& out, const GramMatrix& g);
GramMatrix read_gram(std::istream& in);

// Minimum eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace qkernel
