#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/kernel.hpp"

using namespace qkernel;

namespace {

const FeatureMapSpec kZz2{MapFamily::ZZ, 2, 1, Entanglement::LINEAR};
const std::vector<double> kX{0.1, 0.2};
const std::vector<double> kX2{0.3, 0.4};

// |<phi(x)|phi(x2)>|^2 for the n=2, reps=1 ZZ map, evaluated in Python with
// explicit 4x4 matrices (independent of this library).
constexpr double kZzReference = 0.1507164787529231;

// Binomial draw for the pair above, seed 42, 10^5 shots. Frozen from the
// first verified run; tied to libstdc++'s binomial_distribution.
constexpr double kShotGolden = 0.14923;

FeatureMatrix random_rows(int n_rows, int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix X(static_cast<std::size_t>(n_rows), FeatureVector(static_cast<std::size_t>(dim)));
  for (auto& row : X)
    for (auto& v : row) v = u(rng);
  return X;
}

double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(KernelValue, SelfFidelityIsOne) {
  std::mt19937_64 rng(3);
  for (auto fam : {MapFamily::ZZ, MapFamily::CUSTOM}) {
    const auto cfg = KernelConfig::quantum({fam, 3, 2, Entanglement::FULL});
    for (const auto& x : random_rows(10, 3, rng)) EXPECT_NEAR(kernel_value(cfg, x, x), 1.0, 1e-12);
  }
}

TEST(KernelValue, ClassicalFormulas) {
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_DOUBLE_EQ(kernel_value(KernelConfig::poly(2, 1.0), ones, ones), 9.0);
  EXPECT_DOUBLE_EQ(kernel_value(KernelConfig::linear(), kX, kX2), 0.1 * 0.3 + 0.2 * 0.4);
  EXPECT_DOUBLE_EQ(kernel_value(KernelConfig::rbf(0.5), kX, kX2), std::exp(-0.5 * 0.08));
}

TEST(KernelValue, ZzMatchesDenseOracle) {
  const double k = kernel_value(KernelConfig::quantum(kZz2), kX, kX2);
  const oracle::CVec a = oracle::zz_unitary(kX, 1, {{0, 1}}) * oracle::zero_state(2);
  const oracle::CVec b = oracle::zz_unitary(kX2, 1, {{0, 1}}) * oracle::zero_state(2);
  EXPECT_NEAR(k, std::norm(a.dot(b)), 1e-10);
  EXPECT_NEAR(k, kZzReference, 1e-10);
}

TEST(KernelValue, Errors) {
  const auto cfg = KernelConfig::quantum(kZz2);
  EXPECT_THROW(kernel_value(cfg, kX, std::vector<double>{0.1}), InvalidArgument);
  KernelConfig bad = KernelConfig::linear();
  bad.gamma = 1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_THROW(KernelConfig::rbf(-1.0).validate(), InvalidArgument);
  EXPECT_THROW(KernelConfig::quantum_shots(kZz2, 0, 1).validate(), InvalidArgument);
}

TEST(ShotEstimate, Examples) {
  const auto cfg = KernelConfig::quantum_shots(kZz2, 1000, 9);
  EXPECT_EQ(shot_estimate(cfg, kX, kX), 1.0);
  const auto one = KernelConfig::quantum_shots(kZz2, 1, 9);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const double v = shot_estimate(one, kX, kX2, s);
    EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
}

TEST(ShotEstimate, FrozenGolden) {
  const auto cfg = KernelConfig::quantum_shots(kZz2, 100000, 42);
  const double v = shot_estimate(cfg, kX, kX2);
  const double p = kZzReference;
  EXPECT_LE(std::abs(v - p), 5.0 * std::sqrt(p * (1 - p) / 1e5));
  EXPECT_DOUBLE_EQ(v, kShotGolden);
  EXPECT_EQ(v, shot_estimate(cfg, kX2, kX));
}

TEST(ShotEstimate, StandardDeviationScales) {
  const double p = kZzReference;
  for (int shots : {100, 10000, 1000000}) {
    std::vector<double> draws;
    for (std::uint64_t s = 0; s < 100; ++s) draws.push_back(sample_fidelity(p, shots, s));
    const double expect = std::sqrt(p * (1 - p) / shots);
    const double sd = sample_sd(draws);
    EXPECT_LE(sd, 3 * expect) << shots;
    EXPECT_GE(sd, expect / 3) << shots;
  }
}

TEST(Gram, SmallExamples) {
  const auto one = gram(KernelConfig::quantum({MapFamily::ZZ, 2, 1, Entanglement::LINEAR}), {kX});
  ASSERT_EQ(one.size(), 1);
  EXPECT_EQ(one.entries(0, 0), 1.0);

  const auto basis = gram(KernelConfig::linear(), {{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_EQ(basis.entries, Eigen::Matrix2d::Identity());
  EXPECT_EQ(basis.dataset_digest, dataset_digest({{1.0, 0.0}, {0.0, 1.0}}));

  EXPECT_THROW(gram(KernelConfig::linear(), {}), InvalidArgument);
  EXPECT_THROW(gram(KernelConfig::linear(), {{1.0}, {1.0, 2.0}}), InvalidArgument);
}

TEST(Gram, EntrywiseAndPsd) {
  std::mt19937_64 rng(17);
  const auto X = random_rows(4, 3, rng);
  const auto cfg = KernelConfig::quantum({MapFamily::ZZ, 3, 2, Entanglement::FULL});
  const auto g = gram(cfg, X);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(g.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                  kernel_value(cfg, X[i], X[j]), 1e-12);
  EXPECT_GE(oracle::jacobi_eigen(g.entries).values.minCoeff(), -1e-9);
}

TEST(Gram, QuantumInvariantsOnRandomData) {
  std::mt19937_64 rng(2025);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const int N = 5 + (trial * 7) % 26;
    const auto fam = trial % 2 ? MapFamily::CUSTOM : MapFamily::ZZ;
    const auto cfg = KernelConfig::quantum({fam, n, 2, Entanglement::FULL});
    const auto g = gram(cfg, random_rows(N, n, rng));
    const auto& K = g.entries;
    EXPECT_LE((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((K.diagonal().array() - 1.0).abs().maxCoeff(), 1e-10);
    EXPECT_GE(K.minCoeff(), 0.0);
    EXPECT_LE(K.maxCoeff(), 1.0);
    EXPECT_GE(min_eigenvalue(K), -1e-9);
    EXPECT_NEAR(min_eigenvalue(K), oracle::jacobi_eigen(K).values.minCoeff(), 1e-9);
  }
}

TEST(Gram, ShotGramIsSymmetricWithUnitDiagonal) {
  std::mt19937_64 rng(5);
  const auto X = random_rows(6, 2, rng);
  const auto g = gram(KernelConfig::quantum_shots(kZz2, 500, 11), X);
  EXPECT_EQ(g.entries, g.entries.transpose());
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_EQ(g.entries(i, i), 1.0);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      const double k = g.entries(i, j) * 500.0;
      EXPECT_EQ(k, std::round(k));
    }
}

TEST(Gram, ParallelMatchesSerial) {
  std::mt19937_64 rng(8);
  const auto X = random_rows(17, 3, rng);
  for (const auto& cfg : {KernelConfig::quantum({MapFamily::ZZ, 3, 2, Entanglement::LINEAR}),
                          KernelConfig::quantum_shots({MapFamily::CUSTOM, 3, 1, Entanglement::LINEAR}, 300, 4)}) {
    const auto serial = gram(cfg, X, 1);
    EXPECT_EQ(serial.entries, gram(cfg, X, 4).entries);
    EXPECT_EQ(serial.entries, gram(cfg, X, 0).entries);
    const auto Q = random_rows(5, 3, rng);
    EXPECT_EQ(cross_kernel(cfg, Q, X, 1), cross_kernel(cfg, Q, X, 3));
  }
}

TEST(CrossKernel, MatchesKernelValue) {
  std::mt19937_64 rng(12);
  const auto X = random_rows(4, 2, rng);
  const auto Q = random_rows(3, 2, rng);
  const auto cfg = KernelConfig::quantum(kZz2);
  const auto C = cross_kernel(cfg, Q, X);
  ASSERT_EQ(C.rows(), 3);
  ASSERT_EQ(C.cols(), 4);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      EXPECT_EQ(C(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), kernel_value(cfg, Q[a], X[b]));
}

TEST(GramIo, RoundTrip) {
  std::mt19937_64 rng(21);
  const auto X = random_rows(5, 2, rng);
  const auto g = gram(KernelConfig::quantum_shots(kZz2, 1000, 77), X);
  std::stringstream ss;
  write_gram(ss, g);
  const auto back = read_gram(ss);
  EXPECT_EQ(back.entries, g.entries);
  EXPECT_EQ(back.kernel, g.kernel);
  EXPECT_EQ(back.dataset_digest, g.dataset_digest);

  std::istringstream truncated("3\n1 0 0\n0 1 0\n");
  EXPECT_THROW(read_gram(truncated), InvalidArgument);
}

TEST(DatasetDigest, SensitiveToContents) {
  const FeatureMatrix a{{0.1, 0.2}, {0.3, 0.4}};
  FeatureMatrix b = a;
  EXPECT_EQ(dataset_digest(a), dataset_digest(b));
  EXPECT_EQ(dataset_digest(a).size(), 64u);
  b[1][1] = std::nextafter(0.4, 1.0);
  EXPECT_NE(dataset_digest(a), dataset_digest(b));
  EXPECT_NE(dataset_digest({{1.0, 2.0}}), dataset_digest({{1.0}, {2.0}}));
}
