// qkernel: quantum-kernel QSAR pipeline.
//
//   qkernel preprocess descriptors.csv --config exp.json --out DIR
//   qkernel gram normalized.csv --config exp.json --model SVM2 --out DIR
//   qkernel train normalized.csv --config exp.json --model SVM2 [--gram G] --out DIR
//   qkernel eval DIR/SVM2.model normalized.csv [--out DIR]
//   qkernel run --config exp.json --out DIR
//
// Exit codes: 0 ok, 2 invalid input or config, 3 internal consistency failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "qkernel/csv.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/pipeline.hpp"
#include "qkernel/util.hpp"

namespace fs = std::filesystem;
using namespace qkernel;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitInternal = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool quiet = false;

  std::string input;
  std::string model_name;
  std::string model_path;
  std::string gram_path;
  std::optional<double> cutoff;
  bool lipinski = false;
  std::optional<int> pca_k;
};

// Normalized feature CSV: compound_id, feature columns..., optional label.
struct NormalizedData {
  std::vector<std::string> ids;
  std::vector<std::string> feature_names;
  FeatureMatrix x;
  std::vector<int> y;
};

NormalizedData read_normalized(const std::string& path, bool need_labels) {
  const auto csv = read_csv_file(path);
  NormalizedData d;
  std::optional<std::size_t> id_col, label_col;
  std::vector<std::size_t> feat_cols;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (csv.header[c] == "compound_id") id_col = c;
    else if (csv.header[c] == "label") label_col = c;
    else {
      feat_cols.push_back(c);
      d.feature_names.push_back(csv.header[c]);
    }
  }
  if (need_labels && !label_col) throw InvalidArgument("'" + path + "' has no label column");
  if (feat_cols.empty()) throw InvalidArgument("'" + path + "' has no feature columns");
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const auto ctx = fmt::format("{} line {}", path, csv.line_numbers[r]);
    d.ids.push_back(id_col ? row[*id_col] : std::to_string(r));
    FeatureVector v;
    try {
      for (auto c : feat_cols) v.push_back(parse_double(row[c]));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(ctx + ": " + e.what());
    }
    d.x.push_back(std::move(v));
    if (label_col) {
      const double l = parse_double(row[*label_col]);
      if (l != 1.0 && l != -1.0) throw InvalidArgument(ctx + ": label must be +1 or -1");
      d.y.push_back(static_cast<int>(l));
    }
  }
  if (d.x.empty()) throw InvalidArgument("'" + path + "' has no data rows");
  return d;
}

ExperimentConfig load_config(const Options& o, bool required) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = ExperimentConfig::load(o.config);
  else if (required) throw InvalidArgument("--config is required for this command");
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

const ModelEntry& pick_model(const ExperimentConfig& cfg, const std::string& name) {
  if (cfg.models.empty()) throw InvalidArgument("config has no models");
  if (name.empty()) return cfg.models.front();
  for (const auto& m : cfg.models)
    if (m.name == name) return m;
  throw InvalidArgument("config has no model named '" + name + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << content;
}

int cmd_preprocess(const Options& o) {
  ExperimentConfig cfg = load_config(o, false);
  if (!o.input.empty()) cfg.input = o.input;
  if (cfg.input.empty()) throw InvalidArgument("no input CSV given");
  if (o.cutoff) cfg.activity_cutoff = o.cutoff;
  if (o.lipinski) cfg.lipinski_filter = true;
  if (o.pca_k) cfg.pca_k = static_cast<std::size_t>(*o.pca_k);

  const auto table = read_descriptor_csv(cfg.input);
  std::vector<DescriptorRow> kept;
  for (const auto& row : table.rows) {
    if (cfg.lipinski_filter && !lipinski_pass(row)) {
      spdlog::info("dropping compound '{}' (fails rule of five)", row.compound_id);
      continue;
    }
    kept.push_back(row);
  }
  if (kept.empty()) throw InvalidArgument("no rows left after filtering");
  auto names = cfg.features.empty() ? table.descriptor_columns : cfg.features;
  FeatureMatrix x = extract_features(kept, names);
  if (cfg.scaler) x = minmax_fit_transform(x).second;
  if (cfg.pca_k) {
    const auto pca = pca_fit(x, *cfg.pca_k);
    x = minmax_fit_transform(pca_transform(pca, x)).second;
    names.clear();
    for (std::size_t k = 0; k < *cfg.pca_k; ++k) names.push_back("pc" + std::to_string(k + 1));
  }

  std::ostringstream out;
  auto header = std::vector<std::string>{"compound_id"};
  header.insert(header.end(), names.begin(), names.end());
  header.push_back("label");
  write_csv_row(out, header);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    std::vector<std::string> fields{kept[i].compound_id};
    for (double v : x[i]) fields.push_back(format_double(v));
    fields.push_back(std::to_string(resolve_label(kept[i], cfg.activity_cutoff)));
    write_csv_row(out, fields);
  }
  const auto path = fs::path(o.out) / "normalized.csv";
  write_file(path, out.str());
  if (!o.quiet) std::cout << fmt::format("wrote {} rows x {} features to {}\n", kept.size(), names.size(), path.string());
  return 0;
}

int cmd_gram(const Options& o) {
  const auto cfg = load_config(o, true);
  const auto data = read_normalized(o.input, false);
  const auto entry = resolve_entry(pick_model(cfg, o.model_name), data.feature_names.size(), cfg.seed);
  if (entry.type != ModelType::SVM) throw InvalidArgument("model '" + entry.name + "' is not kernel-based");
  const auto g = gram(entry.kernel, data.x, cfg.workers);
  std::ostringstream out;
  write_gram(out, g);
  const auto path = fs::path(o.out) / (entry.name + ".gram");
  write_file(path, out.str());
  if (!o.quiet) std::cout << fmt::format("wrote {}x{} Gram matrix to {}\n", g.size(), g.size(), path.string());
  return 0;
}

int cmd_train(const Options& o) {
  const auto cfg = load_config(o, true);
  const auto data = read_normalized(o.input, true);
  const auto entry = resolve_entry(pick_model(cfg, o.model_name), data.feature_names.size(), cfg.seed);
  std::ostringstream out;
  if (entry.type == ModelType::SVM) {
    GramMatrix g;
    if (!o.gram_path.empty()) {
      std::ifstream in(o.gram_path);
      if (!in) throw InvalidArgument("cannot open '" + o.gram_path + "'");
      g = read_gram(in);
      if (!(g.kernel == entry.kernel)) {
        throw InvalidArgument("Gram file kernel does not match model '" + entry.name + "'");
      }
    } else {
      g = gram(entry.kernel, data.x, cfg.workers);
    }
    const auto model = train(g, data.y, entry.svm, data.x);
    if (!model.converged) spdlog::warn("SMO hit its iteration budget; model is not converged");
    save_svm(out, model);
  } else {
    if (entry.target != RegTarget::LABELS) {
      throw InvalidArgument("train on normalized CSV supports label targets only");
    }
    const std::vector<double> targets(data.y.begin(), data.y.end());
    const auto model = entry.type == ModelType::REG_LS
                           ? fit_least_squares(data.x, targets, entry.basis, entry.ridge)
                           : fit_annealing(data.x, targets, entry.basis, entry.schedule, *entry.anneal_seed,
                                           entry.ridge);
    save_reg(out, model);
  }
  const auto path = fs::path(o.out) / (entry.name + ".model");
  write_file(path, out.str());
  if (!o.quiet) std::cout << fmt::format("wrote model to {}\n", path.string());
  return 0;
}

int cmd_eval(const Options& o) {
  std::ifstream in(o.model_path);
  if (!in) throw InvalidArgument("cannot open model '" + o.model_path + "'");
  std::string first;
  std::getline(in, first);
  in.seekg(0);
  const auto data = read_normalized(o.input, true);

  std::vector<int> pred;
  if (first.rfind("qkernel-svm", 0) == 0) {
    const auto model = load_svm(in);
    for (double v : decision_values(model, data.x)) pred.push_back(sign_label(v));
  } else if (first.rfind("qkernel-reg", 0) == 0) {
    const auto model = load_reg(in);
    for (const auto& x : data.x) pred.push_back(predict_label(model, x));
  } else {
    throw InvalidArgument("'" + o.model_path + "' is not a qkernel model file");
  }
  const double acc = accuracy(pred, data.y);
  nlohmann::json metrics{{"model", o.model_path}, {"data", o.input}, {"n", data.y.size()}, {"acc", acc}};
  if (!o.quiet) std::cout << fmt::format("acc {:.4f} n {}\n", acc, data.y.size());
  if (o.out != ".") write_file(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
  return 0;
}

int cmd_run(const Options& o) {
  const auto cfg = load_config(o, true);
  const auto report = run_experiment(cfg);
  const auto text = report.to_text();
  write_file(fs::path(o.out) / "report.txt", text);
  write_file(fs::path(o.out) / "report.jsonl", report.to_jsonl());
  if (!o.quiet) std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-kernel QSAR classification pipeline"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--quiet", o.quiet, "Only log warnings and errors");
  };

  auto* pre = app.add_subcommand("preprocess", "Descriptor CSV -> normalized feature CSV");
  add_common(pre);
  pre->add_option("input", o.input, "Descriptor CSV");
  pre->add_option("--cutoff", o.cutoff, "pEC50 activity cutoff for labels");
  pre->add_flag("--lipinski", o.lipinski, "Drop rows failing the rule of five");
  pre->add_option("--pca-k", o.pca_k, "Reduce to K principal components");

  auto* gr = app.add_subcommand("gram", "Normalized CSV -> Gram matrix text file");
  add_common(gr);
  gr->add_option("input", o.input, "Normalized CSV")->required();
  gr->add_option("--model", o.model_name, "Model entry whose kernel to use (default: first)");

  auto* tr = app.add_subcommand("train", "Normalized CSV (+ optional Gram) -> model file");
  add_common(tr);
  tr->add_option("input", o.input, "Normalized CSV with labels")->required();
  tr->add_option("--model", o.model_name, "Model entry to train (default: first)");
  tr->add_option("--gram", o.gram_path, "Precomputed Gram matrix for the same rows");

  auto* ev = app.add_subcommand("eval", "Model file + normalized CSV -> accuracy");
  add_common(ev);
  ev->add_option("model", o.model_path, "Model file")->required();
  ev->add_option("input", o.input, "Normalized CSV with labels")->required();

  auto* run = app.add_subcommand("run", "Full experiment from a config -> report");
  add_common(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("qkernel"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(o.quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (pre->parsed()) return cmd_preprocess(o);
    if (gr->parsed()) return cmd_gram(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (run->parsed()) return cmd_run(o);
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const ResourceLimit& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const InternalConsistency& e) {
    spdlog::error("internal consistency failure: {}", e.what());
    return kExitInternal;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kExitInternal;
  }
  return kExitInvalid;
}
