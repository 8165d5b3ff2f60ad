#include "qkernel/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qkernel/errors.hpp"
#include "qkernel/util.hpp"

namespace qkernel {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw InvalidArgument(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(where + ": key '" + key + "' has the wrong type");
  }
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

// Re-throws the current stage failure with the stage name attached, keeping
// the error category.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(fmt::format("stage '{}': {}", name, e.what()));
  } catch (const ResourceLimit& e) {
    throw ResourceLimit(fmt::format("stage '{}': {}", name, e.what()));
  } catch (const InternalConsistency& e) {
    throw InternalConsistency(fmt::format("stage '{}': {}", name, e.what()));
  }
}

ModelEntry entry_from_json(const json& j, std::size_t index) {
  const std::string where = "models[" + std::to_string(index) + "]";
  check_keys(j, {"name", "type", "note", "basis", "ridge", "target", "schedule", "seed", "kernel",
                 "C", "tol", "eps", "max_passes", "max_iters"},
             where);
  ModelEntry e;
  e.type = parse_model_type(get_or<std::string>(j, "type", "", where));
  e.name = get_or<std::string>(j, "name", to_string(e.type) + std::to_string(index + 1), where);
  e.note = get_or<std::string>(j, "note", "", where);

  if (e.type == ModelType::SVM) {
    for (const char* k : {"basis", "ridge", "target", "schedule", "seed"}) {
      if (j.contains(k)) throw InvalidArgument(where + ": SVM entries do not take '" + k + "'");
    }
    if (!j.contains("kernel")) throw InvalidArgument(where + ": SVM entry needs a 'kernel'");
    const auto& kj = j.at("kernel");
    check_keys(kj, {"kind", "feature_map", "shots", "seed", "jitter", "degree", "offset", "gamma"},
               where + ".kernel");
    if (kj.contains("feature_map")) {
      check_keys(kj.at("feature_map"), {"family", "n_qubits", "reps", "entanglement"},
                 where + ".kernel.feature_map");
    }
    try {
      e.kernel = kj.get<KernelConfig>();
    } catch (const json::exception& ex) {
      throw InvalidArgument(where + ".kernel: " + ex.what());
    }
    e.svm.C = get_or<double>(j, "C", e.svm.C, where);
    e.svm.tol = get_or<double>(j, "tol", e.svm.tol, where);
    e.svm.eps = get_or<double>(j, "eps", e.svm.eps, where);
    e.svm.max_passes = get_or<int>(j, "max_passes", e.svm.max_passes, where);
    e.svm.max_iters = get_or<long>(j, "max_iters", e.svm.max_iters, where);
  } else {
    for (const char* k : {"kernel", "C", "tol", "eps", "max_passes", "max_iters"}) {
      if (j.contains(k)) throw InvalidArgument(where + ": regression entries do not take '" + k + "'");
    }
    e.basis = parse_basis(get_or<std::string>(j, "basis", "AFFINE", where));
    e.ridge = get_or<double>(j, "ridge", 0.0, where);
    const auto target = upper(get_or<std::string>(j, "target", "LABELS", where));
    if (target == "LABELS") e.target = RegTarget::LABELS;
    else if (target == "PEC50") e.target = RegTarget::PEC50;
    else throw InvalidArgument(where + ": target must be 'labels' or 'pec50'");
    if (e.type == ModelType::REG_ANNEAL) {
      if (j.contains("schedule")) {
        const auto& sj = j.at("schedule");
        check_keys(sj, {"t0", "cooling", "iterations", "step"}, where + ".schedule");
        e.schedule.t0 = get_or<double>(sj, "t0", e.schedule.t0, where);
        e.schedule.cooling = get_or<double>(sj, "cooling", e.schedule.cooling, where);
        e.schedule.iterations = get_or<long>(sj, "iterations", e.schedule.iterations, where);
        e.schedule.step = get_or<double>(sj, "step", e.schedule.step, where);
      }
      if (j.contains("seed")) e.anneal_seed = get_or<std::uint64_t>(j, "seed", 0, where);
    } else if (j.contains("schedule") || j.contains("seed")) {
      throw InvalidArgument(where + ": REG_LS entries do not take 'schedule' or 'seed'");
    }
  }
  return e;
}

json entry_to_json(const ModelEntry& e) {
  json j{{"name", e.name}, {"type", to_string(e.type)}};
  if (!e.note.empty()) j["note"] = e.note;
  if (e.type == ModelType::SVM) {
    j["kernel"] = e.kernel;
    j["C"] = e.svm.C;
    j["tol"] = e.svm.tol;
    j["eps"] = e.svm.eps;
    j["max_passes"] = e.svm.max_passes;
    j["max_iters"] = e.svm.max_iters;
  } else {
    j["basis"] = to_string(e.basis);
    j["ridge"] = e.ridge;
    j["target"] = e.target == RegTarget::LABELS ? "labels" : "pec50";
    if (e.type == ModelType::REG_ANNEAL) {
      j["schedule"] = json{{"t0", e.schedule.t0},
                           {"cooling", e.schedule.cooling},
                           {"iterations", e.schedule.iterations},
                           {"step", e.schedule.step}};
      if (e.anneal_seed) j["seed"] = *e.anneal_seed;
    }
  }
  return j;
}

std::string fixed4(double v) { return fmt::format("{:.4f}", v); }

}  // namespace

std::string to_string(ModelType t) {
  switch (t) {
    case ModelType::REG_LS: return "REG_LS";
    case ModelType::REG_ANNEAL: return "REG_ANNEAL";
    case ModelType::SVM: return "SVM";
  }
  return {};
}

ModelType parse_model_type(const std::string& s) {
  const auto u = upper(s);
  if (u == "REG_LS") return ModelType::REG_LS;
  if (u == "REG_ANNEAL") return ModelType::REG_ANNEAL;
  if (u == "SVM") return ModelType::SVM;
  throw InvalidArgument("unknown model type '" + s + "'");
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir) {
  check_keys(j, {"input", "seed", "split", "lipinski_filter", "activity_cutoff", "features", "pca_k",
                 "scaler", "workers", "models"},
             "config");
  ExperimentConfig c;
  c.input = get_or<std::string>(j, "input", "", "config");
  if (!c.input.empty() && !base_dir.empty() && std::filesystem::path(c.input).is_relative()) {
    c.input = (std::filesystem::path(base_dir) / c.input).lexically_normal().string();
  }
  c.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
  c.split = get_or<double>(j, "split", 0.8, "config");
  c.lipinski_filter = get_or<bool>(j, "lipinski_filter", false, "config");
  if (j.contains("activity_cutoff") && !j.at("activity_cutoff").is_null()) {
    c.activity_cutoff = get_or<double>(j, "activity_cutoff", 0.0, "config");
  }
  c.features = get_or<std::vector<std::string>>(j, "features", {}, "config");
  if (j.contains("pca_k") && !j.at("pca_k").is_null()) {
    const int k = get_or<int>(j, "pca_k", 0, "config");
    if (k < 1) throw InvalidArgument("config: pca_k must be >= 1 or null");
    c.pca_k = static_cast<std::size_t>(k);
  }
  const auto scaler = get_or<std::string>(j, "scaler", "minmax", "config");
  if (scaler == "minmax") c.scaler = true;
  else if (scaler == "none") c.scaler = false;
  else throw InvalidArgument("config: scaler must be 'minmax' or 'none'");
  c.workers = get_or<unsigned>(j, "workers", 1, "config");
  if (j.contains("models")) {
    const auto& mj = j.at("models");
    if (!mj.is_array()) throw InvalidArgument("config: models must be a list");
    for (std::size_t i = 0; i < mj.size(); ++i) c.models.push_back(entry_from_json(mj[i], i));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw InvalidArgument("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j, std::filesystem::path(path).parent_path().string());
}

json ExperimentConfig::to_json() const {
  json j{{"input", input},
         {"seed", seed},
         {"split", split},
         {"lipinski_filter", lipinski_filter},
         {"activity_cutoff", activity_cutoff ? json(*activity_cutoff) : json(nullptr)},
         {"features", features},
         {"pca_k", pca_k ? json(*pca_k) : json(nullptr)},
         {"scaler", scaler ? "minmax" : "none"},
         {"workers", workers}};
  json models_json = json::array();
  for (const auto& m : models) models_json.push_back(entry_to_json(m));
  j["models"] = models_json;
  return j;
}

void ExperimentConfig::validate() const {
  if (models.empty()) throw InvalidArgument("config: model list is empty");
  if (!(split > 0.0 && split < 1.0)) throw InvalidArgument("config: split must be in (0,1)");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (!names.insert(m.name).second) throw InvalidArgument("config: duplicate model name '" + m.name + "'");
    if (m.type == ModelType::SVM) {
      m.svm.validate();
    } else {
      if (!(m.ridge >= 0.0)) throw InvalidArgument("config: model '" + m.name + "' ridge must be >= 0");
      if (m.type == ModelType::REG_ANNEAL) m.schedule.validate();
      if (m.target == RegTarget::PEC50 && !activity_cutoff) {
        throw InvalidArgument("config: model '" + m.name + "' regresses pEC50 and needs activity_cutoff");
      }
    }
  }
}

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.empty()) throw InvalidArgument("accuracy of an empty prediction set");
  if (predictions.size() != truth.size()) {
    throw InvalidArgument("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                          std::to_string(truth.size()) + " labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

SplitIndices split_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidArgument("split fraction must be in (0,1)");
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n < 2 || n_train == 0 || n_train >= n) {
    throw InvalidArgument(fmt::format("split of {} rows at fraction {} leaves a side empty", n, fraction));
  }
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return s;
}

PreparedData prepare_data(const ExperimentConfig& cfg, const DescriptorTable& table) {
  PreparedData out;
  out.rows_read = table.rows.size();

  std::vector<const DescriptorRow*> kept;
  stage("filter", [&] {
    for (const auto& row : table.rows) {
      if (cfg.lipinski_filter && !lipinski_pass(row)) {
        spdlog::info("dropping compound '{}' (fails rule of five)", row.compound_id);
        ++out.rows_filtered;
        continue;
      }
      kept.push_back(&row);
    }
  });

  std::vector<int> labels;
  std::vector<std::optional<double>> potency;
  stage("label", [&] {
    for (const auto* row : kept) {
      labels.push_back(resolve_label(*row, cfg.activity_cutoff));
      std::optional<double> p = row->pec50;
      if (!p && row->ec50_nM) p = pec50(*row->ec50_nM);
      potency.push_back(p);
    }
  });

  out.feature_names = cfg.features.empty() ? table.descriptor_columns : cfg.features;
  if (out.feature_names.empty()) throw InvalidArgument("stage 'features': no descriptor columns to use");
  FeatureMatrix raw;
  stage("features", [&] {
    std::vector<DescriptorRow> rows;
    rows.reserve(kept.size());
    for (const auto* r : kept) rows.push_back(*r);
    raw = extract_features(rows, out.feature_names);
  });

  const auto split = stage("split", [&] { return split_indices(kept.size(), cfg.split, cfg.seed); });
  FeatureMatrix train_raw, test_raw;
  for (auto i : split.train) {
    train_raw.push_back(raw[i]);
    out.train_y.push_back(labels[i]);
    out.train_pec50.push_back(potency[i]);
    out.train_ids.push_back(kept[i]->compound_id);
  }
  for (auto i : split.test) {
    test_raw.push_back(raw[i]);
    out.test_y.push_back(labels[i]);
    out.test_ids.push_back(kept[i]->compound_id);
  }

  stage("scale", [&] {
    if (cfg.scaler) out.scaler = minmax_fit(train_raw);
    if (cfg.pca_k) {
      const auto scaled = out.scaler ? out.scaler->transform(train_raw) : train_raw;
      out.pca = pca_fit(scaled, *cfg.pca_k);
      out.post_pca_scaler = minmax_fit(pca_transform(*out.pca, scaled));
    }
  });
  out.train_x = stage("transform", [&] { return apply_transforms(out, train_raw); });
  out.test_x = stage("transform", [&] { return apply_transforms(out, test_raw); });
  return out;
}

FeatureMatrix apply_transforms(const PreparedData& prepared, const FeatureMatrix& raw) {
  FeatureMatrix x = prepared.scaler ? prepared.scaler->transform(raw) : raw;
  if (prepared.pca) {
    x = pca_transform(*prepared.pca, x);
    x = prepared.post_pca_scaler->transform(x);
  }
  return x;
}

ModelEntry resolve_entry(const ModelEntry& entry, std::size_t n_features, std::uint64_t seed) {
  ModelEntry e = entry;
  if (e.type == ModelType::SVM) {
    if (e.kernel.is_quantum()) {
      if (!e.kernel.feature_map) throw InvalidArgument("model '" + e.name + "': quantum kernel needs a feature_map");
      auto& fm = *e.kernel.feature_map;
      const int n = static_cast<int>(n_features);
      if (fm.n_qubits != 1 && fm.n_qubits != n) {
        throw InvalidArgument(fmt::format("model '{}': feature map has {} qubits but data has {} features",
                                          e.name, fm.n_qubits, n));
      }
      fm.n_qubits = n;
    }
    if (e.kernel.kind == KernelKind::QUANTUM_SHOTS && !e.kernel.seed) e.kernel.seed = seed;
    e.kernel.validate();
  } else if (e.type == ModelType::REG_ANNEAL && !e.anneal_seed) {
    e.anneal_seed = seed;
  }
  return e;
}

ModelResult run_model(const ModelEntry& entry, const PreparedData& data, const ExperimentConfig& cfg) {
  ModelResult r;
  r.name = entry.name;
  r.note = entry.note;
  const auto& Xtr = data.train_x;
  const auto& Xte = data.test_x;
  std::vector<int> pred_train, pred_test;

  if (entry.type == ModelType::SVM) {
    r.type_tag = entry.kernel.is_quantum() ? "c/q" : "c";
    r.execution = entry.kernel.kind == KernelKind::QUANTUM_SHOTS ? "sim-shots" : "cpu-exact";
    r.kernel = entry.kernel.describe();
    const auto g = gram(entry.kernel, Xtr, cfg.workers);
    auto model = train(g, data.train_y, entry.svm, Xtr);
    r.converged = model.converged;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const Eigen::RowVectorXd rv = g.entries.row(i);
      const std::vector<double> row(rv.data(), rv.data() + rv.size());
      pred_train.push_back(sign_label(decision_from_row(model, row)));
    }
    for (double v : decision_values(model, Xte, cfg.workers)) pred_test.push_back(sign_label(v));
  } else {
    r.type_tag = entry.type == ModelType::REG_LS ? "c" : "q";
    r.execution = "cpu-exact";
    r.kernel = "-";
    std::vector<double> targets;
    for (std::size_t i = 0; i < Xtr.size(); ++i) {
      if (entry.target == RegTarget::LABELS) {
        targets.push_back(static_cast<double>(data.train_y[i]));
      } else {
        if (!data.train_pec50[i]) {
          throw InvalidArgument("model '" + entry.name + "': compound '" + data.train_ids[i] +
                                "' has no pEC50 for regression");
        }
        targets.push_back(*data.train_pec50[i]);
      }
    }
    RegModel model = entry.type == ModelType::REG_LS
                         ? fit_least_squares(Xtr, targets, entry.basis, entry.ridge)
                         : fit_annealing(Xtr, targets, entry.basis, entry.schedule, *entry.anneal_seed,
                                         entry.ridge);
    model.threshold = entry.target == RegTarget::LABELS ? 0.0 : *cfg.activity_cutoff;
    for (const auto& x : Xtr) pred_train.push_back(predict_label(model, x));
    for (const auto& x : Xte) pred_test.push_back(predict_label(model, x));
  }
  r.train_accuracy = accuracy(pred_train, data.train_y);
  r.accuracy = accuracy(pred_test, data.test_y);
  return r;
}

EvalReport run_experiment(const ExperimentConfig& cfg) {
  stage("config", [&] {
    cfg.validate();
    if (cfg.input.empty()) throw InvalidArgument("config: 'input' is required");
  });
  const auto table = stage("ingest", [&] { return read_descriptor_csv(cfg.input); });
  const auto data = prepare_data(cfg, table);

  EvalReport rep;
  rep.input = cfg.input;
  rep.rows_read = data.rows_read;
  rep.rows_filtered = data.rows_filtered;
  rep.n_train = data.train_y.size();
  rep.n_test = data.test_y.size();
  for (int y : data.train_y) (y > 0 ? rep.train_pos : rep.train_neg)++;
  for (int y : data.test_y) (y > 0 ? rep.test_pos : rep.test_neg)++;
  rep.feature_names = data.feature_names;
  if (data.pca) {
    rep.notes.push_back(fmt::format("features reduced to {} principal components, rescaled to [0,1]", data.pca->k()));
  }

  ExperimentConfig resolved = cfg;
  const std::size_t dim = data.train_x.front().size();
  for (auto& m : resolved.models) {
    m = stage("model-config", [&] { return resolve_entry(m, dim, cfg.seed); });
  }
  for (const auto& m : resolved.models) {
    auto row = stage("train-eval", [&] {
      try {
        return run_model(m, data, resolved);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument("model '" + m.name + "': " + e.what());
      }
    });
    if (m.type != ModelType::SVM) {
      rep.notes.push_back(fmt::format("{}: trained on {} and thresholded at {}", m.name,
                                      m.target == RegTarget::LABELS ? "+1/-1 labels" : "pEC50",
                                      m.target == RegTarget::LABELS ? 0.0 : *cfg.activity_cutoff));
    }
    if (row.converged && !*row.converged) {
      rep.notes.push_back(m.name + ": SMO stopped on its iteration budget (not converged)");
    }
    rep.rows.push_back(std::move(row));
  }
  rep.config = resolved.to_json();
  return rep;
}

std::string EvalReport::to_text() const {
  std::size_t wname = 5, wkernel = 6;
  for (const auto& r : rows) {
    wname = std::max(wname, r.name.size());
    wkernel = std::max(wkernel, r.kernel.size());
  }
  std::ostringstream out;
  out << fmt::format("{:<{}}  {:<4}  {:<6}  {:<9}  {}\n", "model", wname, "type", "acc", "execution", "kernel");
  out << std::string(wname + 4 + 6 + 9 + wkernel + 8, '-') << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{:<{}}  {:<4}  {:<6}  {:<9}  {}\n", r.name, wname, r.type_tag, fixed4(r.accuracy),
                       r.execution, r.kernel);
  }
  out << '\n';
  out << fmt::format("input: {}\n", input);
  out << fmt::format("rows: {} read, {} filtered, {} train, {} test\n", rows_read, rows_filtered, n_train, n_test);
  out << fmt::format("class balance: train +1={} -1={} | test +1={} -1={}\n", train_pos, train_neg, test_pos,
                     test_neg);
  out << "features:";
  for (const auto& f : feature_names) out << ' ' << f;
  out << '\n';
  std::vector<std::string> all_notes;
  for (const auto& r : rows)
    if (!r.note.empty()) all_notes.push_back(r.name + ": " + r.note);
  all_notes.insert(all_notes.end(), notes.begin(), notes.end());
  if (!all_notes.empty()) {
    out << "notes:\n";
    for (const auto& n : all_notes) out << "  - " << n << '\n';
  }
  out << "config:\n" << config.dump(2) << '\n';
  return out.str();
}

std::string EvalReport::to_jsonl() const {
  std::ostringstream out;
  for (const auto& r : rows) {
    json j{{"model", r.name},
           {"type", r.type_tag},
           {"acc", r.accuracy},
           {"train_acc", r.train_accuracy},
           {"execution", r.execution},
           {"kernel", r.kernel},
           {"n_train", n_train},
           {"n_test", n_test}};
    if (r.converged) j["converged"] = *r.converged;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace qkernel
