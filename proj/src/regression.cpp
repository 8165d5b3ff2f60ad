#include "qkernel/regression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "qkernel/errors.hpp"
#include "qkernel/util.hpp"

namespace qkernel {

namespace {

constexpr const char* kRegHeader = "qkernel-reg v1";

Eigen::VectorXd to_vector(std::span<const double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void check_problem(const FeatureMatrix& X, std::span<const double> y) {
  if (X.empty()) throw InvalidArgument("regression needs at least one row");
  if (X.size() != y.size()) {
    throw InvalidArgument("regression has " + std::to_string(X.size()) + " rows but " +
                          std::to_string(y.size()) + " targets");
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (X[i].size() != X.front().size()) {
      throw InvalidArgument("regression row " + std::to_string(i) + " has inconsistent dimension");
    }
  }
}

std::string line_value(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(key + " ", 0) != 0) {
    throw InvalidArgument("model file: expected '" + key + "'");
  }
  return line.substr(key.size() + 1);
}

}  // namespace

std::string to_string(BasisKind k) { return k == BasisKind::AFFINE ? "AFFINE" : "POLY2"; }

BasisKind parse_basis(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "AFFINE") return BasisKind::AFFINE;
  if (u == "POLY2") return BasisKind::POLY2;
  throw InvalidArgument("unknown basis '" + s + "'");
}

std::size_t basis_size(BasisKind kind, std::size_t n) {
  return kind == BasisKind::AFFINE ? n + 1 : n + 1 + n * (n + 1) / 2;
}

std::vector<double> expand(BasisKind kind, std::span<const double> x) {
  std::vector<double> phi;
  phi.reserve(basis_size(kind, x.size()));
  phi.push_back(1.0);
  phi.insert(phi.end(), x.begin(), x.end());
  if (kind == BasisKind::POLY2) {
    for (std::size_t j = 0; j < x.size(); ++j)
      for (std::size_t k = j; k < x.size(); ++k) phi.push_back(x[j] * x[k]);
  }
  return phi;
}

Eigen::MatrixXd design_matrix(BasisKind kind, const FeatureMatrix& X) {
  const std::size_t m = basis_size(kind, X.empty() ? 0 : X.front().size());
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto row = expand(kind, X[i]);
    for (std::size_t k = 0; k < m; ++k) phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
  }
  return phi;
}

double RegModel::value(std::span<const double> x) const {
  if (x.size() != n_features) {
    throw InvalidArgument("query has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(n_features));
  }
  const auto phi = expand(basis, x);
  double s = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) s += coefficients[k] * phi[k];
  return s;
}

double regression_loss(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& q, double ridge) {
  return (phi * q - y).squaredNorm() + ridge * q.squaredNorm();
}

RegModel fit_least_squares(const FeatureMatrix& X, std::span<const double> y, BasisKind basis,
                           double ridge) {
  check_problem(X, y);
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be >= 0");
  const Eigen::MatrixXd phi = design_matrix(basis, X);
  const Eigen::VectorXd target = to_vector(y);
  const Eigen::Index m = phi.cols();

  RegModel model;
  model.basis = basis;
  model.n_features = X.front().size();
  Eigen::VectorXd q;

  if (ridge == 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
    q = cod.solve(target);
    q += cod.solve(target - phi * q);  // one refinement step
    model.rank_deficient = cod.rank() < m;
  } else {
    // min ||[Phi; sqrt(ridge) I] q - [y; 0]||
    Eigen::MatrixXd aug(phi.rows() + m, m);
    aug << phi, std::sqrt(ridge) * Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(phi.rows() + m);
    rhs.head(phi.rows()) = target;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(aug);
    q = qr.solve(rhs);
    q += qr.solve(rhs - aug * q);
  }
  model.coefficients.assign(q.data(), q.data() + q.size());
  return model;
}

void AnnealSchedule::validate() const {
  if (!(t0 > 0.0)) throw InvalidArgument("annealing t0 must be > 0");
  if (!(cooling > 0.0 && cooling < 1.0)) throw InvalidArgument("annealing cooling must be in (0,1)");
  if (iterations < 1) throw InvalidArgument("annealing iterations must be >= 1");
  if (!(step > 0.0)) throw InvalidArgument("annealing step must be > 0");
}

RegModel fit_annealing(const FeatureMatrix& X, std::span<const double> y, BasisKind basis,
                       const AnnealSchedule& schedule, std::uint64_t seed, double ridge,
                       AnnealTrace* trace) {
  schedule.validate();
  check_problem(X, y);
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be >= 0");
  const Eigen::MatrixXd phi = design_matrix(basis, X);
  const Eigen::VectorXd target = to_vector(y);
  const Eigen::Index m = phi.cols();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd q = Eigen::VectorXd::Zero(m);
  double loss = regression_loss(phi, target, q, ridge);
  Eigen::VectorXd best = q;
  double best_loss = loss;
  if (trace) {
    trace->initial_loss = loss;
    trace->best_loss.clear();
    trace->best_loss.reserve(static_cast<std::size_t>(schedule.iterations));
  }

  double temperature = schedule.t0;
  Eigen::VectorXd proposal(m);
  for (long it = 0; it < schedule.iterations; ++it) {
    const double sigma = schedule.step * std::sqrt(temperature / schedule.t0);
    for (Eigen::Index k = 0; k < m; ++k) proposal(k) = q(k) + sigma * gauss(rng);
    const double cand = regression_loss(phi, target, proposal, ridge);
    const double delta = cand - loss;
    // The uniform draw happens on every step so the stream stays aligned.
    const double u = unif(rng);
    if (delta <= 0.0 || u < std::exp(-delta / temperature)) {
      q = proposal;
      loss = cand;
      if (loss < best_loss) {
        best_loss = loss;
        best = q;
      }
    }
    if (trace) trace->best_loss.push_back(best_loss);
    temperature *= schedule.cooling;
  }

  RegModel model;
  model.basis = basis;
  model.n_features = X.front().size();
  model.coefficients.assign(best.data(), best.data() + best.size());
  return model;
}

int predict_label(const RegModel& model, std::span<const double> x) {
  return model.value(x) >= model.threshold ? +1 : -1;
}

void save_reg(std::ostream& out, const RegModel& m) {
  out << kRegHeader << '\n';
  out << "basis " << to_string(m.basis) << '\n';
  out << "n_features " << m.n_features << '\n';
  out << "threshold " << format_double(m.threshold) << '\n';
  out << "rank_deficient " << (m.rank_deficient ? 1 : 0) << '\n';
  out << "coefficients";
  for (double q : m.coefficients) out << ' ' << format_double(q);
  out << '\n';
}

RegModel load_reg(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRegHeader) throw InvalidArgument("not a qkernel regression model file");
  RegModel m;
  m.basis = parse_basis(line_value(in, "basis"));
  m.n_features = static_cast<std::size_t>(parse_double(line_value(in, "n_features")));
  m.threshold = parse_double(line_value(in, "threshold"));
  m.rank_deficient = line_value(in, "rank_deficient") == "1";
  const auto coefficients = line_value(in, "coefficients");
  for (auto f : split_ws(coefficients)) m.coefficients.push_back(parse_double(f));
  if (m.coefficients.size() != basis_size(m.basis, m.n_features)) {
    throw InvalidArgument("model file: coefficient count does not match basis size");
  }
  return m;
}

}  // namespace qkernel
