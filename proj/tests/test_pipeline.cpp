#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/pipeline.hpp"

using namespace qkernel;
using json = nlohmann::json;

namespace {

const std::string kData = QKERNEL_DATA_DIR;

// split_indices(20, 0.8, 3). Frozen after cross-checking against a
// separate Python port of mt19937_64 and the same shuffle.
const std::vector<std::size_t> kSeed3Train{19, 6, 2, 18, 1, 4, 14, 16, 3, 0, 11, 10, 9, 15, 8, 5};
const std::vector<std::size_t> kSeed3Test{12, 13, 17, 7};

json separable_config() {
  return json{{"input", kData + "/separable8.csv"},
              {"seed", 5},
              {"split", 0.75},
              {"scaler", "none"},
              {"models", json::array({json{{"name", "lin"}, {"type", "SVM"}, {"kernel", {{"kind", "LINEAR"}}}}})}};
}

json disc_config(json models) {
  return json{{"input", kData + "/qsar_disc.csv"},
              {"seed", 11},
              {"activity_cutoff", 6.0},
              {"lipinski_filter", true},
              {"features", {"mol_weight", "logP", "rotatable_bonds"}},
              {"models", std::move(models)}};
}

}  // namespace

TEST(Accuracy, Examples) {
  const std::vector<int> y{1, -1, -1};
  EXPECT_EQ(accuracy(y, y), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{1, 1, -1}, y), 2.0 / 3.0);
  EXPECT_EQ(accuracy(std::vector<int>{-1, 1, 1}, y), 0.0);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), InvalidArgument);
  EXPECT_THROW(accuracy(std::vector<int>{1}, y), InvalidArgument);
}

TEST(Split, SizesAndDeterminism) {
  const auto s = split_indices(10, 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  const auto again = split_indices(10, 0.8, 1);
  EXPECT_EQ(s.train, again.train);
  EXPECT_EQ(s.test, again.test);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  EXPECT_NE(split_indices(10, 0.8, 2).train, s.train);
}

TEST(Split, Seed3Golden) {
  const auto s = split_indices(20, 0.8, 3);
  EXPECT_EQ(s.train, kSeed3Train);
  EXPECT_EQ(s.test, kSeed3Test);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_indices(10, 0.0, 1), InvalidArgument);
  EXPECT_THROW(split_indices(10, 1.0, 1), InvalidArgument);
  EXPECT_THROW(split_indices(1, 0.5, 1), InvalidArgument);
  EXPECT_THROW(split_indices(3, 0.9, 1), InvalidArgument);
}

TEST(Config, RejectsUnknownKeysAndEmptyModels) {
  auto j = separable_config();
  j["sede"] = 1;
  EXPECT_THROW(ExperimentConfig::from_json(j), InvalidArgument);

  j = separable_config();
  j["models"][0]["gamma"] = 1.0;
  EXPECT_THROW(ExperimentConfig::from_json(j), InvalidArgument);

  j = separable_config();
  j["models"] = json::array();
  EXPECT_THROW(run_experiment(ExperimentConfig::from_json(j)), InvalidArgument);

  j = separable_config();
  j["models"].push_back(j["models"][0]);
  EXPECT_THROW(ExperimentConfig::from_json(j).validate(), InvalidArgument);
}

TEST(Config, JsonRoundTrip) {
  const auto cfg = ExperimentConfig::load(std::string(QKERNEL_SOURCE_DIR) + "/configs/default.json");
  EXPECT_EQ(cfg.models.size(), 6u);
  const auto again = ExperimentConfig::from_json(cfg.to_json());
  EXPECT_EQ(again.to_json(), cfg.to_json());
  EXPECT_TRUE(std::filesystem::exists(cfg.input));
}

TEST(Prepare, TransformsFitOnTrainingSplitOnly) {
  auto cfg = ExperimentConfig::from_json(disc_config(json::array({json{{"type", "REG_LS"}}})));
  cfg.pca_k = 2;
  const auto table = read_descriptor_csv(cfg.input);
  const auto data = prepare_data(cfg, table);
  ASSERT_TRUE(data.scaler && data.pca && data.post_pca_scaler);

  // The scaler's extrema come from the training rows alone.
  DescriptorTable train_only;
  train_only.descriptor_columns = table.descriptor_columns;
  for (const auto& id : data.train_ids)
    for (const auto& r : table.rows)
      if (r.compound_id == id) train_only.rows.push_back(r);
  const auto ref = minmax_fit(extract_features(train_only.rows, data.feature_names));
  EXPECT_EQ(data.scaler->min, ref.min);
  EXPECT_EQ(data.scaler->max, ref.max);

  // A sentinel far outside the training range is clamped, not refitted.
  const FeatureMatrix sentinel{{5000.0, -40.0, 300.0}};
  const auto scaled = data.scaler->transform(sentinel);
  EXPECT_EQ(scaled.front(), (FeatureVector{1.0, 0.0, 1.0}));
  const auto transformed = apply_transforms(data, sentinel);
  for (double v : transformed.front()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Prepare, LipinskiFilterAndLabels) {
  const auto cfg = ExperimentConfig::from_json(disc_config(json::array({json{{"type", "REG_LS"}}})));
  const auto data = prepare_data(cfg, read_descriptor_csv(cfg.input));
  EXPECT_EQ(data.rows_read, 120u);
  EXPECT_EQ(data.rows_filtered, 12u);
  EXPECT_EQ(data.train_y.size() + data.test_y.size(), 108u);

  auto no_cutoff = cfg;
  no_cutoff.activity_cutoff.reset();
  try {
    prepare_data(no_cutoff, read_descriptor_csv(cfg.input));
    FAIL() << "expected a label-stage error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("stage 'label'"), std::string::npos);
  }
}

TEST(Run, SeparableFixtureIsPerfect) {
  const auto cfg = ExperimentConfig::from_json(separable_config());
  const auto rep = run_experiment(cfg);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].accuracy, 1.0);
  EXPECT_EQ(rep.rows[0].train_accuracy, 1.0);

  // The reference dual solve also separates every training point.
  const auto data = prepare_data(cfg, read_descriptor_csv(cfg.input));
  const auto g = gram(KernelConfig::linear(), data.train_x);
  const auto ref = oracle::svm_dual_pg(g.entries, data.train_y, 1.0);
  Eigen::VectorXd ay(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) ay(i) = ref.alpha(i) * data.train_y[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i < g.size(); ++i)
    EXPECT_GT(data.train_y[static_cast<std::size_t>(i)] * (g.entries.row(i).dot(ay) + ref.bias), 0.0);
}

TEST(Run, DefaultConfigReportShapeAndDeterminism) {
  const auto cfg = ExperimentConfig::load(std::string(QKERNEL_SOURCE_DIR) + "/configs/default.json");
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.to_jsonl(), b.to_jsonl());
  ASSERT_EQ(a.rows.size(), 6u);
  const std::vector<std::string> tags{"c", "q", "c", "c/q", "c/q", "c/q"};
  const std::vector<std::string> exec{"cpu-exact", "cpu-exact", "cpu-exact", "cpu-exact", "cpu-exact", "sim-shots"};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.rows[i].type_tag, tags[i]);
    EXPECT_EQ(a.rows[i].execution, exec[i]);
  }
  EXPECT_EQ(a.rows[4].kernel, "q | FULL ZZ r=2");
  EXPECT_NE(a.to_text().find("model         type  acc     execution  kernel"), std::string::npos);
}

TEST(Run, WorkerCountDoesNotChangeResults) {
  auto cfg = ExperimentConfig::load(std::string(QKERNEL_SOURCE_DIR) + "/configs/default.json");
  const auto serial = run_experiment(cfg).to_jsonl();
  cfg.workers = 3;
  EXPECT_EQ(run_experiment(cfg).to_jsonl(), serial);
}

TEST(Run, ModelErrorsNameTheStage) {
  auto j = disc_config(json::array({json{{"name", "bad"},
                                         {"type", "SVM"},
                                         {"kernel", {{"kind", "QUANTUM_EXACT"},
                                                     {"feature_map", {{"family", "ZZ"}, {"n_qubits", 5}}}}}}}));
  try {
    run_experiment(ExperimentConfig::from_json(j));
    FAIL() << "expected a qubit-count error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("stage 'model-config'"), std::string::npos) << e.what();
  }
}
