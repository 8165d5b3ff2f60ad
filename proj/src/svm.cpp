#include "qkernel/svm.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "qkernel/errors.hpp"
#include "qkernel/util.hpp"

namespace qkernel {

namespace {

constexpr const char* kSvmHeader = "qkernel-svm v1";
constexpr long kTraceEvery = 100;

// Pairwise coordinate ascent on the SVM dual. Pair selection is fully
// deterministic: violators are visited in index order, the partner is the
// index maximizing |E_i - E_j| (lowest index on ties), falling back to a
// scan over all indices in order when that pair makes no progress.
class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& K, std::span<const int> y, const SvmConfig& cfg)
      : K_(K), y_(y), cfg_(cfg), n_(y.size()), alpha_(n_, 0.0), u_(n_, 0.0) {}

  void run() {
    double tol = cfg_.tol / 2.0;
    trace_.push_back(objective());
    while (true) {
      const bool settled = sweep(tol);
      recompute_u();
      bias_ = final_bias();
      if (kkt_satisfied(cfg_.tol)) {
        converged_ = true;
        break;
      }
      // Free-vector averaging can shift b by up to the internal tolerance;
      // tighten and resume from the current iterate.
      if (!settled || iters_ >= cfg_.max_iters || tol < 1e-14) break;
      tol /= 4.0;
    }
    trace_.push_back(objective());
  }

  std::vector<double> alphas() const { return alpha_; }
  double bias() const { return bias_; }
  bool converged() const { return converged_; }
  long iterations() const { return iters_; }
  std::vector<double> trace() const { return trace_; }

 private:
  double k(std::size_t i, std::size_t j) const {
    return K_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double err(std::size_t i) const { return u_[i] + b_ - y_[i]; }

  bool violates(std::size_t i, double tol) const {
    const double r = y_[i] * err(i);
    return (alpha_[i] < cfg_.C && r < -tol) || (alpha_[i] > 0.0 && r > tol);
  }

  // Returns true when no violator remains at `tol`; false when the pass
  // budget or the iteration budget ran out first.
  bool sweep(double tol) {
    int stalled = 0;
    while (iters_ < cfg_.max_iters) {
      std::size_t violators = 0;
      std::size_t changed = 0;
      for (std::size_t i = 0; i < n_ && iters_ < cfg_.max_iters; ++i) {
        if (!violates(i, tol)) continue;
        ++violators;
        if (examine(i)) ++changed;
      }
      if (violators == 0) return true;
      if (changed == 0) {
        if (++stalled >= cfg_.max_passes) return false;
      } else {
        stalled = 0;
      }
    }
    return false;
  }

  bool examine(std::size_t i) {
    const double ei = err(i);
    std::size_t best = n_;
    double gap = -1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const double g = std::abs(ei - err(j));
      if (g > gap) {
        gap = g;
        best = j;
      }
    }
    if (best < n_ && take_step(i, best)) return true;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i || j == best) continue;
      if (take_step(i, j)) return true;
    }
    return false;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    const double C = cfg_.C;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const int y1 = y_[i1], y2 = y_[i2];
    const double e1 = err(i1), e2 = err(i2);
    const int s = y1 * y2;

    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(C, C + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - C);
      hi = std::min(C, a1 + a2);
    }
    if (!(hi - lo > cfg_.eps)) return false;

    const double k11 = k(i1, i1), k12 = k(i1, i2), k22 = k(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;
    double a2n;
    if (eta > 0.0) {
      a2n = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      // Non-positive curvature (indefinite Gram): the 1-D objective is
      // maximized at an endpoint.
      const double lobj = pair_objective(i1, i2, a1 + s * (a2 - lo), lo);
      const double hobj = pair_objective(i1, i2, a1 + s * (a2 - hi), hi);
      const double cur = pair_objective(i1, i2, a1, a2);
      if (lobj > hobj && lobj > cur + cfg_.eps) {
        a2n = lo;
      } else if (hobj > cur + cfg_.eps) {
        a2n = hi;
      } else {
        return false;
      }
    }
    if (std::abs(a2n - a2) < cfg_.eps) return false;

    double a1n = a1 + s * (a2 - a2n);
    a1n = snap(a1n);
    a2n = snap(a2n);

    const double d1 = y1 * (a1n - a1);
    const double d2 = y2 * (a2n - a2);
    const double b1 = b_ - e1 - d1 * k11 - d2 * k12;
    const double b2 = b_ - e2 - d1 * k12 - d2 * k22;
    if (a1n > 0.0 && a1n < C) {
      b_ = b1;
    } else if (a2n > 0.0 && a2n < C) {
      b_ = b2;
    } else {
      b_ = 0.5 * (b1 + b2);
    }

    for (std::size_t t = 0; t < n_; ++t) u_[t] += d1 * k(i1, t) + d2 * k(i2, t);
    alpha_[i1] = a1n;
    alpha_[i2] = a2n;
    ++iters_;
    if (iters_ % kTraceEvery == 0) trace_.push_back(objective());
    return true;
  }

  double snap(double a) const {
    const double C = cfg_.C;
    if (a < C * 1e-12) return 0.0;
    if (a > C * (1.0 - 1e-12)) return C;
    return a;
  }

  // Dual objective restricted to changes in (i1, i2), up to a constant.
  double pair_objective(std::size_t i1, std::size_t i2, double a1n, double a2n) const {
    const double d1 = y_[i1] * (a1n - alpha_[i1]);
    const double d2 = y_[i2] * (a2n - alpha_[i2]);
    const double lin = (a1n - alpha_[i1]) + (a2n - alpha_[i2]);
    const double cross = d1 * u_[i1] + d2 * u_[i2];
    const double quad = d1 * d1 * k(i1, i1) + 2.0 * d1 * d2 * k(i1, i2) + d2 * d2 * k(i2, i2);
    return lin - cross - 0.5 * quad;
  }

  double objective() const {
    Eigen::VectorXd ay(static_cast<Eigen::Index>(n_));
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      ay(static_cast<Eigen::Index>(i)) = alpha_[i] * y_[i];
      sum += alpha_[i];
    }
    return sum - 0.5 * ay.dot(K_ * ay);
  }

  void recompute_u() {
    for (std::size_t t = 0; t < n_; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        if (alpha_[j] != 0.0) s += alpha_[j] * y_[j] * k(j, t);
      }
      u_[t] = s;
    }
  }

  double final_bias() const {
    double sum = 0.0;
    std::size_t free = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (alpha_[i] > 0.0 && alpha_[i] < cfg_.C) {
        sum += y_[i] - u_[i];
        ++free;
      }
    }
    if (free > 0) return sum / static_cast<double>(free);

    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_; ++i) {
      const double v = y_[i] - u_[i];
      const bool at_zero = alpha_[i] == 0.0;
      if ((at_zero && y_[i] > 0) || (!at_zero && y_[i] < 0)) {
        lower = std::max(lower, v);
      } else {
        upper = std::min(upper, v);
      }
    }
    if (std::isfinite(lower) && std::isfinite(upper)) return 0.5 * (lower + upper);
    if (std::isfinite(lower)) return lower;
    if (std::isfinite(upper)) return upper;
    return 0.0;
  }

  bool kkt_satisfied(double tol) const {
    for (std::size_t i = 0; i < n_; ++i) {
      const double m = y_[i] * (u_[i] + bias_);
      if (alpha_[i] == 0.0) {
        if (m < 1.0 - tol) return false;
      } else if (alpha_[i] == cfg_.C) {
        if (m > 1.0 + tol) return false;
      } else if (std::abs(m - 1.0) > tol) {
        return false;
      }
    }
    return true;
  }

  const Eigen::MatrixXd& K_;
  std::span<const int> y_;
  SvmConfig cfg_;
  std::size_t n_;
  std::vector<double> alpha_;
  std::vector<double> u_;
  double b_ = 0.0;
  double bias_ = 0.0;
  bool converged_ = false;
  long iters_ = 0;
  std::vector<double> trace_;
};

std::string expect_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("model file truncated before " + what);
  return line;
}

std::string keyed(std::istream& in, const std::string& key) {
  const auto line = expect_line(in, key);
  if (line.rfind(key + " ", 0) != 0) {
    throw InvalidArgument("model file: expected '" + key + "', got '" + line + "'");
  }
  return line.substr(key.size() + 1);
}

std::vector<double> parse_row(const std::string& text, std::size_t expected, const char* what) {
  const auto fields = split_ws(text);
  if (fields.size() != expected) {
    throw InvalidArgument(std::string("model file: ") + what + " has " +
                          std::to_string(fields.size()) + " values, expected " +
                          std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (auto f : fields) out.push_back(parse_double(f));
  return out;
}

}  // namespace

void SvmConfig::validate() const {
  if (!(C > 0.0)) throw InvalidArgument("SVM C must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("SVM tol must be > 0");
  if (!(eps > 0.0)) throw InvalidArgument("SVM eps must be > 0");
  if (max_passes < 1) throw InvalidArgument("SVM max_passes must be >= 1");
  if (max_iters < 1) throw InvalidArgument("SVM max_iters must be >= 1");
}

double dual_objective(const Eigen::MatrixXd& K, std::span<const int> y,
                      std::span<const double> alphas) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd ay(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ay(i) = alphas[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    sum += alphas[static_cast<std::size_t>(i)];
  }
  return sum - 0.5 * ay.dot(K * ay);
}

SvmModel train(const GramMatrix& gram, std::span<const int> y, const SvmConfig& cfg,
               FeatureMatrix features) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(gram.size());
  if (gram.entries.rows() != gram.entries.cols()) throw InvalidArgument("Gram matrix is not square");
  if (n != y.size()) {
    throw InvalidArgument("Gram size " + std::to_string(n) + " does not match " +
                          std::to_string(y.size()) + " labels");
  }
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw InvalidArgument("labels must be +1 or -1, got " + std::to_string(v));
  }
  if (!pos || !neg) throw InvalidArgument("SVM training needs both classes");
  if (!gram.entries.allFinite()) throw InvalidArgument("Gram matrix has non-finite entries");
  if (!features.empty()) {
    if (features.size() != n) throw InvalidArgument("feature rows do not match Gram size");
    if (!gram.dataset_digest.empty() && dataset_digest(features) != gram.dataset_digest) {
      throw InvalidArgument("training features do not match the Gram matrix digest");
    }
  }

  SmoSolver smo(gram.entries, y, cfg);
  smo.run();

  SvmModel m;
  m.alphas = smo.alphas();
  m.bias = smo.bias();
  m.labels.assign(y.begin(), y.end());
  for (std::size_t i = 0; i < n; ++i)
    if (m.alphas[i] > 0.0) m.support_indices.push_back(i);
  m.kernel = gram.kernel;
  m.training_features = std::move(features);
  m.C = cfg.C;
  m.converged = smo.converged();
  m.iterations = smo.iterations();
  m.objective_trace = smo.trace();
  return m;
}

double decision_from_row(const SvmModel& model, std::span<const double> kernel_row) {
  if (kernel_row.size() != model.alphas.size()) {
    throw InvalidArgument("kernel row length does not match the model's training size");
  }
  double s = 0.0;
  for (std::size_t i : model.support_indices) s += model.alphas[i] * model.labels[i] * kernel_row[i];
  return s + model.bias;
}

double decision_value(const SvmModel& model, std::span<const double> x) {
  if (model.training_features.empty()) {
    throw InvalidArgument("model has no training features; decisions need a kernel row");
  }
  if (x.size() != model.training_features.front().size()) {
    throw InvalidArgument("query has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(model.training_features.front().size()));
  }
  std::vector<double> row(model.alphas.size(), 0.0);
  for (std::size_t i : model.support_indices) row[i] = kernel_value(model.kernel, model.training_features[i], x);
  return decision_from_row(model, row);
}

std::vector<double> decision_values(const SvmModel& model, const FeatureMatrix& queries,
                                    unsigned workers) {
  if (model.training_features.empty()) {
    throw InvalidArgument("model has no training features; decisions need a kernel row");
  }
  if (queries.empty()) return {};
  const auto K = cross_kernel(model.kernel, queries, model.training_features, workers);
  std::vector<double> out;
  out.reserve(queries.size());
  std::vector<double> row(model.alphas.size());
  for (Eigen::Index a = 0; a < K.rows(); ++a) {
    for (Eigen::Index b = 0; b < K.cols(); ++b) row[static_cast<std::size_t>(b)] = K(a, b);
    out.push_back(decision_from_row(model, row));
  }
  return out;
}

int predict(const SvmModel& model, std::span<const double> x) {
  return sign_label(decision_value(model, x));
}

void save_svm(std::ostream& out, const SvmModel& m) {
  const std::size_t n = m.alphas.size();
  const std::size_t d = m.training_features.empty() ? 0 : m.training_features.front().size();
  out << kSvmHeader << '\n';
  out << "kernel " << nlohmann::json(m.kernel).dump() << '\n';
  out << "C " << format_double(m.C) << '\n';
  out << "converged " << (m.converged ? 1 : 0) << '\n';
  out << "bias " << format_double(m.bias) << '\n';
  out << "n " << n << '\n';
  out << "dim " << d << '\n';
  out << "alphas";
  for (double a : m.alphas) out << ' ' << format_double(a);
  out << '\n' << "labels";
  for (int v : m.labels) out << ' ' << v;
  out << '\n' << "features " << m.training_features.size() << '\n';
  for (const auto& row : m.training_features) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row[j]);
    out << '\n';
  }
}

SvmModel load_svm(std::istream& in) {
  if (expect_line(in, "header") != kSvmHeader) throw InvalidArgument("not a qkernel SVM model file");
  SvmModel m;
  try {
    m.kernel = nlohmann::json::parse(keyed(in, "kernel")).get<KernelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("model file: bad kernel config: ") + e.what());
  }
  m.kernel.validate();
  m.C = parse_double(keyed(in, "C"));
  m.converged = keyed(in, "converged") == "1";
  m.bias = parse_double(keyed(in, "bias"));
  const auto n = static_cast<std::size_t>(parse_double(keyed(in, "n")));
  const auto d = static_cast<std::size_t>(parse_double(keyed(in, "dim")));
  m.alphas = parse_row(keyed(in, "alphas"), n, "alphas");
  for (double v : parse_row(keyed(in, "labels"), n, "labels")) m.labels.push_back(static_cast<int>(v));
  const auto rows = static_cast<std::size_t>(parse_double(keyed(in, "features")));
  if (rows != 0 && rows != n) throw InvalidArgument("model file: feature row count mismatch");
  for (std::size_t i = 0; i < rows; ++i) m.training_features.push_back(parse_row(expect_line(in, "feature row"), d, "feature row"));
  for (std::size_t i = 0; i < n; ++i)
    if (m.alphas[i] > 0.0) m.support_indices.push_back(i);
  return m;
}

}  // namespace qkernel
