#include "qkernel/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <spdlog/spdlog.h>

#include "qkernel/errors.hpp"
#include "qkernel/util.hpp"

namespace qkernel {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

enum class Column { ID, EC50, PEC50, LABEL, DONORS, ACCEPTORS, ROTATABLE, WEIGHT, LOGP, EXTRA };

Column classify(const std::string& name) {
  const auto n = lower(name);
  if (n == "compound_id") return Column::ID;
  if (n == "ec50_nm") return Column::EC50;
  if (n == "pec50") return Column::PEC50;
  if (n == "label") return Column::LABEL;
  if (n == "n_donors") return Column::DONORS;
  if (n == "n_acceptors") return Column::ACCEPTORS;
  if (n == "rotatable_bonds") return Column::ROTATABLE;
  if (n == "mol_weight") return Column::WEIGHT;
  if (n == "logp") return Column::LOGP;
  return Column::EXTRA;
}

std::string where(const DescriptorRow& row) {
  return "compound '" + row.compound_id + "' (line " + std::to_string(row.source_line) + ")";
}

double count_value(double v, const std::string& col, const DescriptorRow& row) {
  if (v < 0.0 || v != std::floor(v)) {
    throw InvalidArgument(where(row) + ": " + col + " must be a non-negative integer");
  }
  return v;
}

}  // namespace

std::optional<double> DescriptorRow::descriptor(const std::string& name) const {
  switch (classify(name)) {
    case Column::DONORS: return n_donors;
    case Column::ACCEPTORS: return n_acceptors;
    case Column::ROTATABLE: return rotatable_bonds;
    case Column::WEIGHT: return mol_weight;
    case Column::LOGP: return logp;
    case Column::EXTRA: {
      auto it = extra.find(name);
      if (it == extra.end()) return std::nullopt;
      return it->second;
    }
    default: return std::nullopt;
  }
}

DescriptorTable parse_descriptors(const CsvTable& csv) {
  DescriptorTable table;
  std::vector<Column> kinds;
  bool has_id = false;
  for (const auto& h : csv.header) {
    const auto k = classify(h);
    kinds.push_back(k);
    if (k == Column::ID) has_id = true;
    if (k != Column::ID && k != Column::EC50 && k != Column::PEC50 && k != Column::LABEL) {
      table.descriptor_columns.push_back(h);
    }
  }
  if (!has_id) throw InvalidArgument("CSV input lacks a compound_id column");

  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    DescriptorRow row;
    row.source_line = csv.line_numbers.empty() ? r + 2 : csv.line_numbers[r];
    const auto& fields = csv.rows[r];
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (kinds[c] == Column::ID) row.compound_id = fields[c];
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto& f = fields[c];
      if (kinds[c] == Column::ID || f.empty()) continue;
      double v;
      try {
        v = parse_double(f);
      } catch (const InvalidArgument&) {
        throw InvalidArgument(where(row) + ": column '" + csv.header[c] + "' is not numeric: '" + f + "'");
      }
      if (!std::isfinite(v)) throw InvalidArgument(where(row) + ": column '" + csv.header[c] + "' is not finite");
      switch (kinds[c]) {
        case Column::EC50:
          if (!(v > 0.0)) throw InvalidArgument(where(row) + ": ec50_nM must be > 0");
          row.ec50_nM = v;
          break;
        case Column::PEC50: row.pec50 = v; break;
        case Column::LABEL:
          if (v != 1.0 && v != -1.0) throw InvalidArgument(where(row) + ": label must be +1 or -1");
          row.label = static_cast<int>(v);
          break;
        case Column::DONORS: row.n_donors = count_value(v, "n_donors", row); break;
        case Column::ACCEPTORS: row.n_acceptors = count_value(v, "n_acceptors", row); break;
        case Column::ROTATABLE: row.rotatable_bonds = count_value(v, "rotatable_bonds", row); break;
        case Column::WEIGHT:
          if (!(v > 0.0)) throw InvalidArgument(where(row) + ": mol_weight must be > 0");
          row.mol_weight = v;
          break;
        case Column::LOGP: row.logp = v; break;
        case Column::EXTRA: row.extra[csv.header[c]] = v; break;
        case Column::ID: break;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

DescriptorTable read_descriptor_csv(const std::string& path) {
  return parse_descriptors(read_csv_file(path));
}

double pec50(double ec50_nM) {
  if (!std::isfinite(ec50_nM) || !(ec50_nM > 0.0)) {
    throw InvalidArgument("EC50 must be positive and finite, got " + format_double(ec50_nM));
  }
  // -log10(ec50 * 1e-9) rearranged so decade inputs give exact results.
  return 9.0 - std::log10(ec50_nM);
}

bool lipinski_pass(const DescriptorRow& row) {
  if (!row.mol_weight || !row.n_donors || !row.n_acceptors || !row.logp) {
    throw InvalidArgument(where(row) + ": Lipinski filter needs mol_weight, n_donors, n_acceptors and logp");
  }
  int met = 0;
  met += *row.mol_weight <= 500.0;
  met += *row.n_donors <= 5.0;
  met += *row.n_acceptors <= 10.0;
  met += *row.logp <= 5.0;
  return met >= 3;
}

int label_from_activity(double p, double cutoff) { return p >= cutoff ? +1 : -1; }

int resolve_label(const DescriptorRow& row, std::optional<double> cutoff) {
  if (row.label) return *row.label;
  std::optional<double> p = row.pec50;
  if (!p && row.ec50_nM) p = pec50(*row.ec50_nM);
  if (!p) throw InvalidArgument(where(row) + ": no label, pEC50 or ec50_nM value");
  if (!cutoff) throw InvalidArgument(where(row) + ": deriving a label needs activity_cutoff");
  return label_from_activity(*p, *cutoff);
}

FeatureMatrix extract_features(const std::vector<DescriptorRow>& rows,
                               const std::vector<std::string>& columns) {
  FeatureMatrix X;
  X.reserve(rows.size());
  for (const auto& row : rows) {
    FeatureVector v;
    v.reserve(columns.size());
    for (const auto& c : columns) {
      const auto value = row.descriptor(c);
      if (!value) throw InvalidArgument(where(row) + ": missing value for feature '" + c + "'");
      v.push_back(*value);
    }
    X.push_back(std::move(v));
  }
  return X;
}

ScalerModel minmax_fit(const FeatureMatrix& X) {
  if (X.empty()) throw InvalidArgument("min-max scaling needs at least one row");
  ScalerModel s;
  s.min = X.front();
  s.max = X.front();
  for (const auto& row : X) {
    if (row.size() != s.min.size()) throw InvalidArgument("min-max scaling: ragged rows");
    for (std::size_t j = 0; j < row.size(); ++j) {
      s.min[j] = std::min(s.min[j], row[j]);
      s.max[j] = std::max(s.max[j], row[j]);
    }
  }
  for (std::size_t j = 0; j < s.min.size(); ++j) {
    if (s.degenerate(j)) spdlog::warn("feature column {} is constant; scaled to 0", j);
  }
  return s;
}

FeatureMatrix ScalerModel::transform(const FeatureMatrix& X) const {
  FeatureMatrix out = X;
  for (auto& row : out) {
    if (row.size() != min.size()) throw InvalidArgument("min-max transform: dimension mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = degenerate(j) ? 0.0 : std::clamp((row[j] - min[j]) / (max[j] - min[j]), 0.0, 1.0);
    }
  }
  return out;
}

FeatureMatrix ScalerModel::inverse(const FeatureMatrix& X) const {
  FeatureMatrix out = X;
  for (auto& row : out)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = min[j] + row[j] * (max[j] - min[j]);
  return out;
}

std::pair<ScalerModel, FeatureMatrix> minmax_fit_transform(const FeatureMatrix& X) {
  auto s = minmax_fit(X);
  auto scaled = s.transform(X);
  return {std::move(s), std::move(scaled)};
}

PcaModel pca_fit(const FeatureMatrix& X, std::size_t k) {
  if (X.size() < 2) throw InvalidArgument("PCA fit needs at least two rows");
  const std::size_t d = X.front().size();
  if (k < 1 || k > d) {
    throw InvalidArgument("PCA k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
  }
  const auto n = static_cast<Eigen::Index>(X.size());
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd A(n, dd);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = X[static_cast<std::size_t>(i)];
    if (row.size() != d) throw InvalidArgument("PCA fit: ragged rows");
    for (Eigen::Index j = 0; j < dd; ++j) A(i, j) = row[static_cast<std::size_t>(j)];
  }

  PcaModel m;
  m.mean = A.colwise().mean().transpose();
  A.rowwise() -= m.mean.transpose();
  const Eigen::MatrixXd cov = (A.transpose() * A) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw InternalConsistency("covariance eigen-decomposition failed");

  // Eigen returns ascending eigenvalues.
  m.components.resize(static_cast<Eigen::Index>(k), dd);
  m.explained_variance.resize(static_cast<Eigen::Index>(k));
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
    const Eigen::Index src = dd - 1 - c;
    Eigen::VectorXd v = es.eigenvectors().col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < dd; ++j)
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    if (v(arg) < 0.0) v = -v;
    m.components.row(c) = v.transpose();
    m.explained_variance(c) = std::max(0.0, es.eigenvalues()(src));
  }
  return m;
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& X) {
  const auto d = model.mean.size();
  FeatureMatrix out;
  out.reserve(X.size());
  for (const auto& row : X) {
    if (static_cast<Eigen::Index>(row.size()) != d) throw InvalidArgument("PCA transform: dimension mismatch");
    const Eigen::VectorXd centered =
        Eigen::Map<const Eigen::VectorXd>(row.data(), d) - model.mean;
    const Eigen::VectorXd z = model.components * centered;
    out.emplace_back(z.data(), z.data() + z.size());
  }
  return out;
}

FeatureMatrix PcaModel::reconstruct(const FeatureMatrix& reduced) const {
  FeatureMatrix out;
  out.reserve(reduced.size());
  for (const auto& z : reduced) {
    if (static_cast<Eigen::Index>(z.size()) != components.rows()) {
      throw InvalidArgument("PCA reconstruct: dimension mismatch");
    }
    const Eigen::VectorXd x =
        components.transpose() * Eigen::Map<const Eigen::VectorXd>(z.data(), components.rows()) + mean;
    out.emplace_back(x.data(), x.data() + x.size());
  }
  return out;
}

}  // namespace qkernel
