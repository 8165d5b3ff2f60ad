#include "qkernel/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#include "qkernel/errors.hpp"
#include "qkernel/util.hpp"

namespace qkernel {

namespace {

constexpr double kClampSlack = 1e-12;

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

void check_same_dim(std::span<const double> x, std::span<const double> x2) {
  if (x.size() != x2.size()) {
    throw InvalidArgument("kernel arguments differ in dimension (" + std::to_string(x.size()) +
                          " vs " + std::to_string(x2.size()) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double fidelity(const StateVector& a, const StateVector& b) {
  const double v = std::norm(inner_product(a, b));
  if (v > 1.0 + kClampSlack || !(v >= 0.0)) {
    throw InternalConsistency("fidelity " + format_double(v) + " outside [0,1]");
  }
  return std::min(v, 1.0);
}

std::uint64_t content_hash(std::span<const double> x) {
  std::uint64_t h = 0x51ED270B27D6A3F1ULL ^ x.size();
  for (double v : x) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

// Symmetric in (x, x2) so the shot kernel stays symmetric off the Gram path.
std::uint64_t content_pair_seed(std::uint64_t seed, std::span<const double> x,
                                std::span<const double> x2) {
  std::uint64_t a = content_hash(x);
  std::uint64_t b = content_hash(x2);
  if (a > b) std::swap(a, b);
  return splitmix64(splitmix64(seed ^ a) ^ b);
}

double classical_value(const KernelConfig& cfg, std::span<const double> x,
                       std::span<const double> x2) {
  switch (cfg.kind) {
    case KernelKind::LINEAR:
      return dot(x, x2);
    case KernelKind::POLY:
      return std::pow(dot(x, x2) + *cfg.offset, *cfg.degree);
    case KernelKind::RBF: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - x2[i]) * (x[i] - x2[i]);
      return std::exp(-*cfg.gamma * d2);
    }
    default:
      throw InternalConsistency("classical_value called with a quantum kernel");
  }
}

std::vector<StateVector> encode_all(const FeatureMapSpec& map, const FeatureMatrix& X,
                                    unsigned workers) {
  std::vector<std::optional<StateVector>> tmp(X.size());
  parallel_for(X.size(), workers, [&](std::size_t i) { tmp[i] = encode(map, X[i]); });
  std::vector<StateVector> out;
  out.reserve(X.size());
  for (auto& s : tmp) out.push_back(std::move(*s));
  return out;
}

void check_rows(const FeatureMatrix& X, const char* what) {
  if (X.empty()) throw InvalidArgument(std::string(what) + " dataset is empty");
  const std::size_t d = X.front().size();
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].size() != d) {
      throw InvalidArgument(std::string(what) + " row " + std::to_string(i) + " has " +
                            std::to_string(X[i].size()) + " features, expected " +
                            std::to_string(d));
    }
  }
}

template <typename T>
void require(const std::optional<T>& v, bool needed, const char* name, KernelKind kind) {
  if (needed && !v) {
    throw InvalidArgument(std::string("kernel ") + to_string(kind) + " requires '" + name + "'");
  }
  if (!needed && v) {
    throw InvalidArgument(std::string("kernel ") + to_string(kind) + " does not take '" + name +
                          "'");
  }
}

}  // namespace

KernelConfig KernelConfig::linear() { return KernelConfig{}; }

KernelConfig KernelConfig::poly(int degree, double offset) {
  KernelConfig c;
  c.kind = KernelKind::POLY;
  c.degree = degree;
  c.offset = offset;
  return c;
}

KernelConfig KernelConfig::rbf(double gamma) {
  KernelConfig c;
  c.kind = KernelKind::RBF;
  c.gamma = gamma;
  return c;
}

KernelConfig KernelConfig::quantum(FeatureMapSpec map) {
  KernelConfig c;
  c.kind = KernelKind::QUANTUM_EXACT;
  c.feature_map = map;
  return c;
}

KernelConfig KernelConfig::quantum_shots(FeatureMapSpec map, int shots, std::uint64_t seed) {
  KernelConfig c;
  c.kind = KernelKind::QUANTUM_SHOTS;
  c.feature_map = map;
  c.shots = shots;
  c.seed = seed;
  return c;
}

void KernelConfig::validate() const {
  const bool shot_kind = kind == KernelKind::QUANTUM_SHOTS;
  require(feature_map, is_quantum(), "feature_map", kind);
  require(shots, shot_kind, "shots", kind);
  require(seed, shot_kind, "seed", kind);
  if (jitter && !shot_kind) require(jitter, false, "jitter", kind);
  require(degree, kind == KernelKind::POLY, "degree", kind);
  require(offset, kind == KernelKind::POLY, "offset", kind);
  require(gamma, kind == KernelKind::RBF, "gamma", kind);

  if (feature_map) feature_map->validate();
  if (shots && *shots < 1) throw InvalidArgument("shots must be >= 1");
  if (jitter && !(*jitter >= 0.0)) throw InvalidArgument("jitter must be >= 0");
  if (degree && *degree < 1) throw InvalidArgument("poly degree must be >= 1");
  if (offset && !(*offset >= 0.0)) throw InvalidArgument("poly offset must be >= 0");
  if (gamma && !(*gamma > 0.0)) throw InvalidArgument("rbf gamma must be > 0");
}

std::string KernelConfig::describe() const {
  switch (kind) {
    case KernelKind::LINEAR:
      return "c | linear";
    case KernelKind::POLY:
      return "c | poly d=" + std::to_string(*degree) + " c=" + format_double(*offset);
    case KernelKind::RBF:
      return "c | rbf gamma=" + format_double(*gamma);
    case KernelKind::QUANTUM_EXACT:
      return "q | " + feature_map->describe();
    case KernelKind::QUANTUM_SHOTS:
      return "q | " + feature_map->describe() + " shots=" + std::to_string(*shots);
  }
  return {};
}

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::QUANTUM_EXACT: return "QUANTUM_EXACT";
    case KernelKind::QUANTUM_SHOTS: return "QUANTUM_SHOTS";
    case KernelKind::LINEAR: return "LINEAR";
    case KernelKind::POLY: return "POLY";
    case KernelKind::RBF: return "RBF";
  }
  return {};
}

KernelKind parse_kernel_kind(const std::string& s) {
  const auto u = upper(s);
  for (auto k : {KernelKind::QUANTUM_EXACT, KernelKind::QUANTUM_SHOTS, KernelKind::LINEAR,
                 KernelKind::POLY, KernelKind::RBF}) {
    if (to_string(k) == u) return k;
  }
  throw InvalidArgument("unknown kernel kind '" + s + "'");
}

void to_json(nlohmann::json& j, const KernelConfig& cfg) {
  j = nlohmann::json{{"kind", to_string(cfg.kind)}};
  if (cfg.feature_map) j["feature_map"] = *cfg.feature_map;
  if (cfg.shots) j["shots"] = *cfg.shots;
  if (cfg.seed) j["seed"] = *cfg.seed;
  if (cfg.jitter) j["jitter"] = *cfg.jitter;
  if (cfg.degree) j["degree"] = *cfg.degree;
  if (cfg.offset) j["offset"] = *cfg.offset;
  if (cfg.gamma) j["gamma"] = *cfg.gamma;
}

void from_json(const nlohmann::json& j, KernelConfig& cfg) {
  cfg = KernelConfig{};
  cfg.kind = parse_kernel_kind(j.at("kind").get<std::string>());
  if (j.contains("feature_map")) cfg.feature_map = j.at("feature_map").get<FeatureMapSpec>();
  if (j.contains("shots")) cfg.shots = j.at("shots").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("jitter")) cfg.jitter = j.at("jitter").get<double>();
  if (j.contains("degree")) cfg.degree = j.at("degree").get<int>();
  if (j.contains("offset")) cfg.offset = j.at("offset").get<double>();
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
}

double sample_fidelity(double p, int shots, std::uint64_t stream_seed) {
  if (shots < 1) throw InvalidArgument("shots must be >= 1");
  if (p >= 1.0) return 1.0;
  if (p <= 0.0) return 0.0;
  std::mt19937_64 rng(stream_seed);
  std::binomial_distribution<long long> draw(shots, p);
  return static_cast<double>(draw(rng)) / shots;
}

double shot_estimate(const KernelConfig& cfg, std::span<const double> x,
                     std::span<const double> x2, std::uint64_t stream_seed) {
  if (cfg.kind != KernelKind::QUANTUM_SHOTS) {
    throw InvalidArgument("shot_estimate requires a QUANTUM_SHOTS kernel");
  }
  cfg.validate();
  check_same_dim(x, x2);
  const double p = fidelity(encode(*cfg.feature_map, x), encode(*cfg.feature_map, x2));
  return sample_fidelity(p, *cfg.shots, stream_seed);
}

double shot_estimate(const KernelConfig& cfg, std::span<const double> x,
                     std::span<const double> x2) {
  if (cfg.kind != KernelKind::QUANTUM_SHOTS) {
    throw InvalidArgument("shot_estimate requires a QUANTUM_SHOTS kernel");
  }
  cfg.validate();
  return shot_estimate(cfg, x, x2, *cfg.seed);
}

double kernel_value(const KernelConfig& cfg, std::span<const double> x,
                    std::span<const double> x2) {
  cfg.validate();
  check_same_dim(x, x2);
  switch (cfg.kind) {
    case KernelKind::QUANTUM_EXACT:
      return fidelity(encode(*cfg.feature_map, x), encode(*cfg.feature_map, x2));
    case KernelKind::QUANTUM_SHOTS:
      return shot_estimate(cfg, x, x2, content_pair_seed(*cfg.seed, x, x2));
    default:
      return classical_value(cfg, x, x2);
  }
}

std::uint64_t pair_seed(std::uint64_t seed, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return splitmix64(splitmix64(splitmix64(seed) ^ i) ^ (j * 0xD1B54A32D192ED03ULL));
}

GramMatrix gram(const KernelConfig& cfg, const FeatureMatrix& X, unsigned workers) {
  cfg.validate();
  check_rows(X, "gram");
  const std::size_t n = X.size();
  if (cfg.is_quantum() && static_cast<int>(X.front().size()) != cfg.feature_map->n_qubits) {
    throw InvalidArgument("feature dimension " + std::to_string(X.front().size()) +
                          " does not match feature map qubit count " +
                          std::to_string(cfg.feature_map->n_qubits));
  }

  GramMatrix g;
  g.kernel = cfg;
  g.dataset_digest = dataset_digest(X);
  g.entries.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  auto& K = g.entries;

  std::vector<StateVector> states;
  if (cfg.is_quantum()) states = encode_all(*cfg.feature_map, X, workers);

  parallel_for(n, workers, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = i; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      double v;
      switch (cfg.kind) {
        case KernelKind::QUANTUM_EXACT:
          v = i == j ? 1.0 : fidelity(states[i], states[j]);
          break;
        case KernelKind::QUANTUM_SHOTS:
          v = i == j ? 1.0 + cfg.jitter.value_or(0.0)
                     : sample_fidelity(fidelity(states[i], states[j]), *cfg.shots,
                                       pair_seed(*cfg.seed, i, j));
          break;
        default:
          v = classical_value(cfg, X[i], X[j]);
      }
      K(ii, jj) = v;
      K(jj, ii) = v;
    }
  });
  return g;
}

Eigen::MatrixXd cross_kernel(const KernelConfig& cfg, const FeatureMatrix& queries,
                             const FeatureMatrix& reference, unsigned workers) {
  cfg.validate();
  check_rows(queries, "query");
  check_rows(reference, "reference");
  if (queries.front().size() != reference.front().size()) {
    throw InvalidArgument("query and reference feature dimensions differ");
  }
  Eigen::MatrixXd K(static_cast<Eigen::Index>(queries.size()),
                    static_cast<Eigen::Index>(reference.size()));

  std::vector<StateVector> qs, rs;
  if (cfg.is_quantum()) {
    qs = encode_all(*cfg.feature_map, queries, workers);
    rs = encode_all(*cfg.feature_map, reference, workers);
  }
  parallel_for(queries.size(), workers, [&](std::size_t a) {
    for (std::size_t b = 0; b < reference.size(); ++b) {
      double v;
      switch (cfg.kind) {
        case KernelKind::QUANTUM_EXACT:
          v = fidelity(qs[a], rs[b]);
          break;
        case KernelKind::QUANTUM_SHOTS:
          v = sample_fidelity(fidelity(qs[a], rs[b]), *cfg.shots,
                              content_pair_seed(*cfg.seed, queries[a], reference[b]));
          break;
        default:
          v = classical_value(cfg, queries[a], reference[b]);
      }
      K(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
    }
  });
  return K;
}

std::string dataset_digest(const FeatureMatrix& X) {
  std::vector<unsigned char> bytes;
  auto put = [&bytes](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<unsigned char>(v >> (8 * k)));
  };
  put(X.size());
  put(X.empty() ? 0 : X.front().size());
  for (const auto& row : X)
    for (double v : row) put(std::bit_cast<std::uint64_t>(v));

  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw InternalConsistency("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

void write_gram(std::ostream& out, const GramMatrix& g) {
  const auto n = g.size();
  out << n << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j) out << ' ';
      out << format_double(g.entries(i, j));
    }
    out << '\n';
  }
  out << "# digest=" << g.dataset_digest << " kernel=" << nlohmann::json(g.kernel).dump() << '\n';
}

GramMatrix read_gram(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("gram file is empty");
  const double nd = parse_double(line);
  if (!(nd >= 1) || nd != std::floor(nd)) throw InvalidArgument("bad gram size line: " + line);
  const auto n = static_cast<Eigen::Index>(nd);

  GramMatrix g;
  g.entries.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw InvalidArgument("gram file truncated at row " + std::to_string(i));
    const auto fields = split_ws(line);
    if (static_cast<Eigen::Index>(fields.size()) != n) {
      throw InvalidArgument("gram row " + std::to_string(i) + " has " +
                            std::to_string(fields.size()) + " values, expected " +
                            std::to_string(n));
    }
    for (Eigen::Index j = 0; j < n; ++j) g.entries(i, j) = parse_double(fields[j]);
  }
  if (!std::getline(in, line)) throw InvalidArgument("gram file is missing its footer");
  const std::string dkey = "# digest=";
  const std::string kkey = " kernel=";
  const auto kpos = line.find(kkey);
  if (line.rfind(dkey, 0) != 0 || kpos == std::string::npos) {
    throw InvalidArgument("malformed gram footer: " + line);
  }
  g.dataset_digest = line.substr(dkey.size(), kpos - dkey.size());
  try {
    g.kernel = nlohmann::json::parse(line.substr(kpos + kkey.size())).get<KernelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed kernel config in gram footer: ") + e.what());
  }
  g.kernel.validate();
  return g;
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace qkernel
