#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkernel/kernel.hpp"
#include "qkernel/preprocess.hpp"
#include "qkernel/regression.hpp"
#include "qkernel/svm.hpp"

namespace qkernel {

enum class ModelType { REG_LS, REG_ANNEAL, SVM };
enum class RegTarget { LABELS, PEC50 };

std::string to_string(ModelType t);
ModelType parse_model_type(const std::string& s);

struct ModelEntry {
  std::string name;
  ModelType type = ModelType::SVM;
  std::string note;

  // REG_LS / REG_ANNEAL
  BasisKind basis = BasisKind::AFFINE;
  double ridge = 0.0;
  RegTarget target = RegTarget::LABELS;
  AnnealSchedule schedule;
  std::optional<std::uint64_t> anneal_seed;

  // SVM
  KernelConfig kernel;
  SvmConfig svm;
};

struct ExperimentConfig {
  std::string input;
  std::uint64_t seed = 0;
  double split = 0.8;
  bool lipinski_filter = false;
  std::optional<double> activity_cutoff;
  std::vector<std::string> features;  // empty: every descriptor column
  std::optional<std::size_t> pca_k;
  bool scaler = true;
  unsigned workers = 1;
  std::vector<ModelEntry> models;

  // Relative `input` paths resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

// Fraction of positions where predictions equal truth.
double accuracy(std::span<const int> predictions, std::span<const int> truth);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded Fisher-Yates shuffle of 0..n-1 (mt19937_64, index drawn as
// rng() % (i + 1)), then the first round(fraction * n) go to train.
SplitIndices split_indices(std::size_t n, double fraction, std::uint64_t seed);

struct PreparedData {
  std::vector<std::string> feature_names;
  FeatureMatrix train_x, test_x;
  std::vector<int> train_y, test_y;
  std::vector<std::optional<double>> train_pec50;
  std::vector<std::string> train_ids, test_ids;
  std::size_t rows_read = 0;
  std::size_t rows_filtered = 0;
  std::optional<ScalerModel> scaler;
  std::optional<PcaModel> pca;
  std::optional<ScalerModel> post_pca_scaler;
};

// Filter, label, split and fit scaling/PCA on the training split only.
PreparedData prepare_data(const ExperimentConfig& cfg, const DescriptorTable& table);

// Applies the already-fitted transforms of `prepared` to new raw rows.
FeatureMatrix apply_transforms(const PreparedData& prepared, const FeatureMatrix& raw);

struct ModelResult {
  std::string name;
  std::string type_tag;   // c | q | c/q
  std::string execution;  // cpu-exact | sim-shots
  std::string kernel;     // "-" for regressors
  double accuracy = 0.0;
  double train_accuracy = 0.0;
  std::optional<bool> converged;
  std::string note;
};

struct EvalReport {
  std::vector<ModelResult> rows;
  std::string input;
  std::size_t rows_read = 0, rows_filtered = 0, n_train = 0, n_test = 0;
  std::size_t train_pos = 0, train_neg = 0, test_pos = 0, test_neg = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> notes;
  nlohmann::json config;

  std::string to_text() const;
  std::string to_jsonl() const;
};

// Trains one configured model on prepared data; returns its report row.
ModelResult run_model(const ModelEntry& entry, const PreparedData& data, const ExperimentConfig& cfg);

EvalReport run_experiment(const ExperimentConfig& cfg);

// Resolves per-model defaults that depend on the data (qubit count, shot
// seed, anneal seed).
ModelEntry resolve_entry(const ModelEntry& entry, std::size_t n_features, std::uint64_t seed);

}  // namespace qkernel
