#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qkernel {

using Complex = std::complex<double>;

inline constexpr int kDefaultQubitCap = 24;

enum class GateKind { RY, H, PHASE, PARITY_PHASE };

// One factor of an encoding circuit. RY/H/PHASE act on targets[0];
// PARITY_PHASE acts on (targets[0], targets[1]). `angle` is ignored for H.
struct GateOp {
  GateKind kind;
  std::vector<int> targets;
  double angle = 0.0;

  static GateOp ry(int q, double theta) { return {GateKind::RY, {q}, theta}; }
  static GateOp h(int q) { return {GateKind::H, {q}, 0.0}; }
  static GateOp phase(int q, double lambda) { return {GateKind::PHASE, {q}, lambda}; }
  static GateOp parity_phase(int j, int k, double lambda) {
    return {GateKind::PARITY_PHASE, {j, k}, lambda};
  }
};

// Dense n-qubit pure state. Qubit q is bit q of the amplitude index
// (qubit 0 is the least significant bit).
class StateVector {
 public:
  StateVector(int n_qubits, std::vector<Complex> amplitudes);

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amplitudes_.size(); }

  std::span<const Complex> amplitudes() const { return amplitudes_; }
  const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }

  double norm() const;

  // In-place gate application; validates the gate against this state.
  void apply(const GateOp& gate);

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  int n_qubits_;
  std::vector<Complex> amplitudes_;
};

// |0...0> on n qubits. Throws InvalidArgument for n < 1 and ResourceLimit
// for n > qubit_cap.
StateVector new_zero_state(int n_qubits, int qubit_cap = kDefaultQubitCap);

// Returns gate * state; the input is left untouched.
StateVector apply_gate(const StateVector& state, const GateOp& gate);

// <a|b> = sum_i conj(a_i) b_i.
Complex inner_product(const StateVector& a, const StateVector& b);

void validate_gate(const GateOp& gate, int n_qubits);

}  // namespace qkernel
