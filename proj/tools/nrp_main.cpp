// Batch front end for the perfusion no-reflow pipeline. Consumers are
// scripts and CI; every command is deterministic under --seed.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "nrp/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string manifest;
  std::string out = ".";
  std::string mode = "combination";
  std::vector<std::string> groups = {"peak", "sips", "flow"};
  std::vector<std::string> views = {"ap", "lateral"};
  int raw_length = 15;
  double beta = 0.5;
  int seed = 0;
  int jobs = 1;
  double threshold = 0.5;
  bool decay_literal = false;
};

void add_feature_flags(CLI::App* cmd, CommonOpts& opts, bool needs_manifest = true) {
  if (needs_manifest)
    cmd->add_option("--manifest", opts.manifest, "cohort manifest path")->required();
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--mode", opts.mode, "feature mode: combination|post|pre");
  cmd->add_option("--groups", opts.groups, "feature groups (peak sips flow raw cln)")
      ->delimiter(',');
  cmd->add_option("--views", opts.views, "views (ap lateral)")->delimiter(',');
  cmd->add_option("--raw-length", opts.raw_length, "RAW vector length L");
  cmd->add_option("--beta", opts.beta, "RAW fill decay rate per frame");
  cmd->add_option("--seed", opts.seed, "random seed");
  cmd->add_option("--jobs", opts.jobs, "worker cap (output is jobs-invariant)");
  cmd->add_option("--threshold", opts.threshold, "decision threshold for confusion metrics");
  cmd->add_flag("--decay-literal", opts.decay_literal,
                "use the 0.9*max decay-time variant");
}

nrp::FeatureConfig feature_config(const CommonOpts& opts) {
  nrp::FeatureConfig cfg;
  cfg.groups.clear();
  for (const std::string& g : opts.groups) cfg.groups.insert(nrp::parse_feature_group(g));
  cfg.mode = nrp::parse_feature_mode(opts.mode);
  cfg.views.clear();
  for (const std::string& v : opts.views) {
    if (v == "ap")
      cfg.views.insert(nrp::View::Ap);
    else if (v == "lateral")
      cfg.views.insert(nrp::View::Lateral);
    else
      throw nrp::Error(nrp::ErrorCode::UsageError, "bad view '" + v + "'");
  }
  cfg.raw_length = opts.raw_length;
  cfg.beta = opts.beta;
  cfg.decay_literal_mode = opts.decay_literal;
  return cfg;
}

nrp::GbmConfig gbm_config(const CommonOpts& opts) {
  nrp::GbmConfig cfg;
  cfg.seed = opts.seed;
  return cfg;
}

nrp::LoocvOptions loocv_options(const CommonOpts& opts) {
  nrp::LoocvOptions lo;
  lo.threshold = opts.threshold;
  lo.jobs = opts.jobs;
  return lo;
}

nrp::SignalCohort load_cohort(const CommonOpts& opts) {
  nrp::CohortManifest manifest = nrp::load_manifest(opts.manifest);
  return nrp::load_signal_cohort(manifest);
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw nrp::Error(nrp::ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

json opt_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

int cmd_validate(const CommonOpts& opts) {
  nrp::CohortManifest manifest = nrp::load_manifest(opts.manifest);
  std::vector<nrp::ValidationIssue> issues = nrp::validate_cohort(manifest);
  fs::create_directories(opts.out);
  json doc = json::array();
  for (const nrp::ValidationIssue& issue : issues) {
    doc.push_back({{"patient_id", issue.patient_id},
                   {"sequence", issue.sequence},
                   {"code", issue.code},
                   {"message", issue.message}});
    std::cerr << issue.patient_id << "/" << issue.sequence << ": " << issue.code << " ("
              << issue.message << ")\n";
  }
  write_json(doc, fs::path(opts.out) / "issues.json");
  std::cout << "validate: " << manifest.patients.size() << " patients, " << issues.size()
            << " issues\n";
  return issues.empty() ? 0 : 1;
}

int cmd_extract(const CommonOpts& opts) {
  nrp::SignalCohort cohort = load_cohort(opts);
  std::vector<nrp::FeatureVector> rows =
      nrp::extract_cohort_features(cohort, feature_config(opts));
  fs::create_directories(opts.out);
  nrp::write_feature_csv(fs::path(opts.out) / "features.csv", rows);
  std::cout << "extract: " << rows.size() << " patients, "
            << (rows.empty() ? 0 : rows.front().names.size()) << " features\n";
  return 0;
}

void emit_report(const nrp::EvaluationReport& report, const fs::path& out_dir,
                 const std::string& stem) {
  fs::create_directories(out_dir);
  nrp::write_report(report, out_dir / (stem + ".json"));
  nrp::write_fold_csv(report.folds, out_dir / (stem + "_folds.csv"));
}

int cmd_evaluate(const CommonOpts& opts, bool with_baseline) {
  nrp::SignalCohort cohort = load_cohort(opts);
  nrp::FeatureConfig cfg = feature_config(opts);
  nrp::EvaluationReport report = nrp::loocv(cohort, cfg, gbm_config(opts), loocv_options(opts));
  if (with_baseline) {
    nrp::FeatureConfig cln_cfg = cfg;
    cln_cfg.groups = {nrp::FeatureGroup::Cln};
    nrp::EvaluationReport baseline =
        nrp::loocv(cohort, cln_cfg, gbm_config(opts), loocv_options(opts));
    report.p_vs_baseline = nrp::compare_to_baseline(report, baseline);
  }
  emit_report(report, opts.out, "report");
  std::cout << "evaluate: AUROC " << report.metrics.auroc;
  if (report.p_vs_baseline) std::cout << "  p_vs_baseline " << report.p_vs_baseline->p_value;
  std::cout << "\n";
  return 0;
}

int cmd_ablate(const CommonOpts& opts) {
  nrp::SignalCohort cohort = load_cohort(opts);
  nrp::AblationResult result = nrp::ablation_grid(cohort, {}, feature_config(opts),
                                                  gbm_config(opts), loocv_options(opts));
  json doc;
  auto cell_json = [](const nrp::AblationCell& cell) {
    json jc;
    jc["feature_set"] = cell.feature_set;
    if (!cell.mode.empty()) jc["mode"] = cell.mode;
    jc["auroc"] = opt_json(cell.auroc);
    if (!cell.error.empty()) jc["error"] = cell.error;
    jc["best_in_row"] = cell.best_in_row;
    return jc;
  };
  doc["feature_set_rows"] = json::array();
  for (const auto& cell : result.feature_set_rows)
    doc["feature_set_rows"].push_back(cell_json(cell));
  doc["group_mode_cells"] = json::array();
  for (const auto& cell : result.group_mode_cells)
    doc["group_mode_cells"].push_back(cell_json(cell));
  fs::create_directories(opts.out);
  write_json(doc, fs::path(opts.out) / "ablation.json");
  for (const auto& cell : result.feature_set_rows)
    std::cout << cell.feature_set << ": "
              << (cell.auroc ? std::to_string(*cell.auroc) : "error") << "\n";
  return 0;
}

int cmd_subgroup(const CommonOpts& opts) {
  nrp::SignalCohort cohort = load_cohort(opts);
  nrp::EvaluationReport report =
      nrp::loocv(cohort, feature_config(opts), gbm_config(opts), loocv_options(opts));
  std::vector<nrp::PatientRecord> records;
  for (const auto& ps : cohort.patients) records.push_back(ps.record);
  nrp::SubgroupTable table = nrp::subgroup_analysis(report, records);

  json doc;
  doc["age_median"] = table.age_median;
  doc["nihss_median"] = opt_json(table.nihss_median);
  doc["rows"] = json::array();
  for (const nrp::SubgroupRow& row : table.rows)
    doc["rows"].push_back({{"partition", row.partition},
                           {"n", row.n},
                           {"auroc", opt_json(row.auroc)},
                           {"accuracy", opt_json(row.metrics.accuracy)},
                           {"recall", opt_json(row.metrics.recall)},
                           {"specificity", opt_json(row.metrics.specificity)},
                           {"precision", opt_json(row.metrics.precision)},
                           {"f1", opt_json(row.metrics.f1)}});
  doc["pairs"] = json::array();
  for (const nrp::SubgroupPair& pair : table.pairs)
    doc["pairs"].push_back({{"name", pair.name},
                            {"p_label0", opt_json(pair.p_label0)},
                            {"p_label1", opt_json(pair.p_label1)}});
  doc["skipped"] = table.skipped;
  fs::create_directories(opts.out);
  write_json(doc, fs::path(opts.out) / "subgroup.json");
  emit_report(report, opts.out, "report");
  std::cout << "subgroup: " << table.rows.size() << " partitions, " << table.skipped.size()
            << " skipped\n";
  return 0;
}

int cmd_univariate(const CommonOpts& opts) {
  nrp::SignalCohort cohort = load_cohort(opts);
  std::vector<nrp::FeatureVector> rows =
      nrp::extract_cohort_features(cohort, feature_config(opts));
  std::vector<int> labels;
  for (const auto& ps : cohort.patients) labels.push_back(ps.record.label);
  std::vector<nrp::UnivariateRow> table = nrp::univariate_screen(rows, labels);

  json doc = json::array();
  for (const nrp::UnivariateRow& row : table)
    doc.push_back({{"feature", row.feature},
                   {"direction", nrp::stats::alternative_name(row.direction)},
                   {"p_value", row.p_value},
                   {"median_noreflow", row.median_positive},
                   {"median_reflow", row.median_negative}});
  fs::create_directories(opts.out);
  write_json(doc, fs::path(opts.out) / "univariate.json");
  std::cout << "univariate: " << table.size() << " features\n";
  return 0;
}

int cmd_cohort_summary(const CommonOpts& opts) {
  nrp::CohortManifest manifest = nrp::load_manifest(opts.manifest);
  std::vector<nrp::SummaryRow> rows = nrp::summarize_cohort(manifest.patients);
  json doc = json::array();
  for (const nrp::SummaryRow& row : rows) {
    json jr;
    jr["variable"] = row.variable;
    jr["kind"] = row.kind;
    jr["test"] = row.test;
    jr["p_value"] = opt_json(row.p_value);
    if (row.kind == "continuous") {
      jr["reflow"] = {{"median", row.median_reflow},
                      {"iqr", {row.iqr_lo_reflow, row.iqr_hi_reflow}}};
      jr["noreflow"] = {{"median", row.median_noreflow},
                        {"iqr", {row.iqr_lo_noreflow, row.iqr_hi_noreflow}}};
    } else {
      jr["count_reflow"] = row.count_reflow;
      jr["count_noreflow"] = row.count_noreflow;
    }
    doc.push_back(jr);
  }
  fs::create_directories(opts.out);
  write_json(doc, fs::path(opts.out) / "cohort_summary.json");
  std::cout << "cohort-summary: " << rows.size() << " variables\n";
  return 0;
}

struct SynthOpts {
  int n_patients = 39;
  double prevalence = 7.0 / 39.0;
  double noise_sd = 0.01;
  double plateau_s = 1.0;
  double decay_slowdown = 2.0;
  double peak_attenuation = 0.85;
};

int cmd_synth(const CommonOpts& opts, const SynthOpts& sopts) {
  nrp::SynthConfig cfg;
  cfg.n_patients = sopts.n_patients;
  cfg.prevalence = sopts.prevalence;
  cfg.seed = opts.seed;
  cfg.noise_sd = sopts.noise_sd;
  cfg.effect.plateau_extension_s = sopts.plateau_s;
  cfg.effect.decay_slowdown = sopts.decay_slowdown;
  cfg.effect.peak_attenuation = sopts.peak_attenuation;
  nrp::SignalCohort cohort = nrp::generate_cohort(cfg);
  nrp::materialize_cohort(cohort, cfg, opts.out);
  std::cout << "synth: " << cfg.n_patients << " patients written to " << opts.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DSA perfusion no-reflow prediction toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  SynthOpts sopts;
  bool with_baseline = false;

  CLI::App* validate = app.add_subcommand("validate", "check cohort completeness");
  add_feature_flags(validate, opts);
  CLI::App* extract = app.add_subcommand("extract", "write the feature matrix CSV");
  add_feature_flags(extract, opts);
  CLI::App* evaluate = app.add_subcommand("evaluate", "LOOCV evaluation report");
  add_feature_flags(evaluate, opts);
  evaluate->add_flag("--baseline-cln", with_baseline,
                     "attach a one-sided comparison against a CLN-only baseline");
  CLI::App* ablate = app.add_subcommand("ablate", "feature-set and group/mode ablation grids");
  add_feature_flags(ablate, opts);
  CLI::App* subgroup = app.add_subcommand("subgroup", "subgroup analysis of a LOOCV run");
  add_feature_flags(subgroup, opts);
  CLI::App* univariate = app.add_subcommand("univariate", "one-sided univariate feature screen");
  add_feature_flags(univariate, opts);
  CLI::App* summary = app.add_subcommand("cohort-summary", "demographic comparison table");
  add_feature_flags(summary, opts);
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_feature_flags(synth, opts, /*needs_manifest=*/false);
  synth->add_option("--n", sopts.n_patients, "number of patients");
  synth->add_option("--prevalence", sopts.prevalence, "fraction labeled no-reflow");
  synth->add_option("--noise-sd", sopts.noise_sd, "gaussian noise level");
  synth->add_option("--plateau", sopts.plateau_s, "no-reflow plateau extension (s)");
  synth->add_option("--decay-slowdown", sopts.decay_slowdown, "no-reflow washout slowdown");
  synth->add_option("--peak-attenuation", sopts.peak_attenuation, "no-reflow peak attenuation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (validate->parsed()) return cmd_validate(opts);
    if (extract->parsed()) return cmd_extract(opts);
    if (evaluate->parsed()) return cmd_evaluate(opts, with_baseline);
    if (ablate->parsed()) return cmd_ablate(opts);
    if (subgroup->parsed()) return cmd_subgroup(opts);
    if (univariate->parsed()) return cmd_univariate(opts);
    if (summary->parsed()) return cmd_cohort_summary(opts);
    if (synth->parsed()) return cmd_synth(opts, sopts);
  } catch (const nrp::Error& e) {
    if (e.code() == nrp::ErrorCode::UsageError) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 2;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
