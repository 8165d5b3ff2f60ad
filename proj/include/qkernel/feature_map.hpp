#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkernel/state.hpp"

namespace qkernel {

using FeatureVector = std::vector<double>;

enum class MapFamily { ZZ, CUSTOM };
enum class Entanglement { LINEAR, FULL };

// Fully determines the encoding unitary U(x). n_qubits equals the feature
// dimension.
struct FeatureMapSpec {
  MapFamily family = MapFamily::ZZ;
  int n_qubits = 1;
  int reps = 1;
  Entanglement entanglement = Entanglement::LINEAR;

  void validate() const;
  std::string describe() const;

  friend bool operator==(const FeatureMapSpec&, const FeatureMapSpec&) = default;
};

std::vector<std::pair<int, int>> entanglement_pairs(Entanglement scheme, int n_qubits);

// Gate list of U(x) in application order, all repetitions included.
std::vector<GateOp> encoding_circuit(const FeatureMapSpec& spec, std::span<const double> x);

// |phi(x)> = U(x)|0>^n.
StateVector encode(const FeatureMapSpec& spec, std::span<const double> x);

std::string to_string(MapFamily f);
std::string to_string(Entanglement e);
MapFamily parse_family(const std::string& s);
Entanglement parse_entanglement(const std::string& s);

void to_json(nlohmann::json& j, const FeatureMapSpec& spec);
void from_json(const nlohmann::json& j, FeatureMapSpec& spec);

}  // namespace qkernel
