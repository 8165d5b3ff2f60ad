#include "qkernel/feature_map.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "qkernel/errors.hpp"

namespace qkernel {

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

void check_features(const FeatureMapSpec& spec, std::span<const double> x) {
  if (static_cast<int>(x.size()) != spec.n_qubits) {
    throw InvalidArgument("feature vector has length " + std::to_string(x.size()) +
                          " but the feature map uses " + std::to_string(spec.n_qubits) +
                          " qubits");
  }
  static std::atomic<bool> warned{false};
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
    if ((v < 0.0 || v > 1.0) && !warned.exchange(true)) {
      spdlog::warn("feature value {} outside [0,1]; encoding anyway", v);
    }
  }
}

}  // namespace

void FeatureMapSpec::validate() const {
  if (n_qubits < 1) throw InvalidArgument("feature map needs n_qubits >= 1");
  if (reps < 1) throw InvalidArgument("feature map needs reps >= 1");
}

std::string FeatureMapSpec::describe() const {
  return to_string(entanglement) + " " + to_string(family) + " r=" + std::to_string(reps);
}

std::vector<std::pair<int, int>> entanglement_pairs(Entanglement scheme, int n_qubits) {
  if (n_qubits < 1) throw InvalidArgument("n_qubits must be >= 1");
  std::vector<std::pair<int, int>> pairs;
  if (scheme == Entanglement::LINEAR) {
    for (int j = 0; j + 1 < n_qubits; ++j) pairs.emplace_back(j, j + 1);
  } else {
    for (int j = 0; j < n_qubits; ++j)
      for (int k = j + 1; k < n_qubits; ++k) pairs.emplace_back(j, k);
  }
  return pairs;
}

std::vector<GateOp> encoding_circuit(const FeatureMapSpec& spec, std::span<const double> x) {
  spec.validate();
  check_features(spec, x);
  constexpr double pi = std::numbers::pi;
  const auto pairs = entanglement_pairs(spec.entanglement, spec.n_qubits);
  const int n = spec.n_qubits;

  std::vector<GateOp> block;
  if (spec.family == MapFamily::ZZ) {
    for (int q = 0; q < n; ++q) block.push_back(GateOp::h(q));
    for (int q = 0; q < n; ++q) block.push_back(GateOp::phase(q, 2.0 * x[q]));
    for (auto [j, k] : pairs) {
      block.push_back(GateOp::parity_phase(j, k, 2.0 * (pi - x[j]) * (pi - x[k])));
    }
  } else {
    for (int q = 0; q < n; ++q) block.push_back(GateOp::ry(q, 2.0 * x[q]));
    for (auto [j, k] : pairs) {
      block.push_back(GateOp::parity_phase(j, k, pi * x[j] * x[k]));
    }
  }

  std::vector<GateOp> circuit;
  circuit.reserve(block.size() * spec.reps);
  for (int r = 0; r < spec.reps; ++r) circuit.insert(circuit.end(), block.begin(), block.end());
  return circuit;
}

StateVector encode(const FeatureMapSpec& spec, std::span<const double> x) {
  auto circuit = encoding_circuit(spec, x);
  StateVector state = new_zero_state(spec.n_qubits);
  for (const auto& g : circuit) state.apply(g);
  return state;
}

std::string to_string(MapFamily f) { return f == MapFamily::ZZ ? "ZZ" : "CUSTOM"; }

std::string to_string(Entanglement e) { return e == Entanglement::LINEAR ? "LINEAR" : "FULL"; }

MapFamily parse_family(const std::string& s) {
  const auto u = upper(s);
  if (u == "ZZ") return MapFamily::ZZ;
  if (u == "CUSTOM") return MapFamily::CUSTOM;
  throw InvalidArgument("unknown feature map family '" + s + "'");
}

Entanglement parse_entanglement(const std::string& s) {
  const auto u = upper(s);
  if (u == "LINEAR") return Entanglement::LINEAR;
  if (u == "FULL") return Entanglement::FULL;
  throw InvalidArgument("unknown entanglement scheme '" + s + "'");
}

void to_json(nlohmann::json& j, const FeatureMapSpec& spec) {
  j = nlohmann::json{{"family", to_string(spec.family)},
                     {"n_qubits", spec.n_qubits},
                     {"reps", spec.reps},
                     {"entanglement", to_string(spec.entanglement)}};
}

void from_json(const nlohmann::json& j, FeatureMapSpec& spec) {
  spec.family = parse_family(j.value("family", std::string("ZZ")));
  spec.n_qubits = j.value("n_qubits", 1);
  spec.reps = j.value("reps", 1);
  spec.entanglement = parse_entanglement(j.value("entanglement", std::string("LINEAR")));
}

}  // namespace qkernel
