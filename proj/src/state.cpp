#include "qkernel/state.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "qkernel/errors.hpp"

namespace qkernel {

namespace {

void check_qubit(int q, int n_qubits) {
  if (q < 0 || q >= n_qubits) {
    throw InvalidArgument("qubit index " + std::to_string(q) + " out of range for " +
                          std::to_string(n_qubits) + "-qubit state");
  }
}

}  // namespace

StateVector::StateVector(int n_qubits, std::vector<Complex> amplitudes)
    : n_qubits_(n_qubits), amplitudes_(std::move(amplitudes)) {
  if (n_qubits < 1 || n_qubits >= 63 ||
      amplitudes_.size() != (std::size_t{1} << n_qubits)) {
    throw InvalidArgument("amplitude vector length does not match 2^n_qubits");
  }
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amplitudes_) s += std::norm(a);
  return std::sqrt(s);
}

void validate_gate(const GateOp& gate, int n_qubits) {
  const std::size_t arity = gate.kind == GateKind::PARITY_PHASE ? 2 : 1;
  if (gate.targets.size() != arity) {
    throw InvalidArgument("gate has " + std::to_string(gate.targets.size()) +
                          " targets, expected " + std::to_string(arity));
  }
  for (int q : gate.targets) check_qubit(q, n_qubits);
  if (arity == 2 && gate.targets[0] == gate.targets[1]) {
    throw InvalidArgument("parity-phase targets must be distinct");
  }
}

void StateVector::apply(const GateOp& gate) {
  validate_gate(gate, n_qubits_);
  const std::size_t dim = amplitudes_.size();
  auto& amp = amplitudes_;

  switch (gate.kind) {
    case GateKind::RY: {
      const std::size_t mask = std::size_t{1} << gate.targets[0];
      const double c = std::cos(gate.angle / 2.0);
      const double s = std::sin(gate.angle / 2.0);
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & mask) continue;
        const Complex a0 = amp[i];
        const Complex a1 = amp[i | mask];
        amp[i] = c * a0 - s * a1;
        amp[i | mask] = s * a0 + c * a1;
      }
      break;
    }
    case GateKind::H: {
      const std::size_t mask = std::size_t{1} << gate.targets[0];
      const double r = 1.0 / std::sqrt(2.0);
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & mask) continue;
        const Complex a0 = amp[i];
        const Complex a1 = amp[i | mask];
        amp[i] = r * (a0 + a1);
        amp[i | mask] = r * (a0 - a1);
      }
      break;
    }
    case GateKind::PHASE: {
      const std::size_t mask = std::size_t{1} << gate.targets[0];
      const Complex f = std::polar(1.0, gate.angle);
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & mask) amp[i] *= f;
      }
      break;
    }
    case GateKind::PARITY_PHASE: {
      const std::size_t mj = std::size_t{1} << gate.targets[0];
      const std::size_t mk = std::size_t{1} << gate.targets[1];
      const Complex f = std::polar(1.0, gate.angle);
      for (std::size_t i = 0; i < dim; ++i) {
        if (((i & mj) != 0) != ((i & mk) != 0)) amp[i] *= f;
      }
      break;
    }
  }
}

StateVector new_zero_state(int n_qubits, int qubit_cap) {
  if (n_qubits < 1) {
    throw InvalidArgument("n_qubits must be >= 1, got " + std::to_string(n_qubits));
  }
  if (n_qubits > qubit_cap) {
    throw ResourceLimit("n_qubits " + std::to_string(n_qubits) + " exceeds cap " +
                        std::to_string(qubit_cap));
  }
  std::vector<Complex> amps(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
  amps[0] = Complex{1.0, 0.0};
  return StateVector(n_qubits, std::move(amps));
}

StateVector apply_gate(const StateVector& state, const GateOp& gate) {
  StateVector out = state;
  out.apply(gate);
  return out;
}

Complex inner_product(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits()) {
    throw InvalidArgument("inner product of states with different qubit counts");
  }
  Complex acc{0.0, 0.0};
  const auto aa = a.amplitudes();
  const auto bb = b.amplitudes();
  for (std::size_t i = 0; i < aa.size(); ++i) acc += std::conj(aa[i]) * bb[i];
  return acc;
}

}  // namespace qkernel
