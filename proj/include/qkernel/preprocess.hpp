#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qkernel/csv.hpp"
#include "qkernel/kernel.hpp"

namespace qkernel {

// One compound's descriptors as ingested from CSV.
struct DescriptorRow {
  std::string compound_id;
  std::optional<double> ec50_nM;
  std::optional<double> pec50;
  std::optional<int> label;
  std::optional<double> n_donors;
  std::optional<double> n_acceptors;
  std::optional<double> rotatable_bonds;
  std::optional<double> mol_weight;  // Da
  std::optional<double> logp;
  std::map<std::string, double> extra;
  std::size_t source_line = 0;

  // Value of a named descriptor column, if present.
  std::optional<double> descriptor(const std::string& name) const;
};

struct DescriptorTable {
  std::vector<std::string> descriptor_columns;  // feature-eligible, in file order
  std::vector<DescriptorRow> rows;
};

DescriptorTable parse_descriptors(const CsvTable& csv);
DescriptorTable read_descriptor_csv(const std::string& path);

// -log10(ec50 * 1e-9).
double pec50(double ec50_nM);

// At least three of: weight <= 500 Da, donors <= 5, acceptors <= 10, logP <= 5.
bool lipinski_pass(const DescriptorRow& row);

// p >= cutoff -> +1.
int label_from_activity(double p, double cutoff);

// Label column if present, otherwise the pEC50 (direct or from EC50)
// thresholded at cutoff. Throws when neither route is available.
int resolve_label(const DescriptorRow& row, std::optional<double> cutoff);

FeatureMatrix extract_features(const std::vector<DescriptorRow>& rows,
                               const std::vector<std::string>& columns);

struct ScalerModel {
  std::vector<double> min;
  std::vector<double> max;

  bool degenerate(std::size_t col) const { return !(max[col] > min[col]); }
  // Scales with the stored extrema and clamps into [0, 1]; degenerate
  // columns map to 0.
  FeatureMatrix transform(const FeatureMatrix& X) const;
  FeatureMatrix inverse(const FeatureMatrix& X) const;
};

ScalerModel minmax_fit(const FeatureMatrix& X);
std::pair<ScalerModel, FeatureMatrix> minmax_fit_transform(const FeatureMatrix& X);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x d, orthonormal rows
  Eigen::VectorXd explained_variance;  // descending

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  FeatureMatrix reconstruct(const FeatureMatrix& reduced) const;
};

// Top-k eigenvectors of the sample covariance. Each component is signed so
// that its largest-magnitude entry (first one on ties) is positive.
PcaModel pca_fit(const FeatureMatrix& X, std::size_t k);
FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& X);

}  // namespace qkernel
