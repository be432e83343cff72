// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "error.hpp"
#include "io.hpp"
#include "marg_check.hpp"
#include "sbc.hpp"

#ifndef GPSBC_VERSION
#define GPSBC_VERSION "0.0.0"
#endif

namespace gpsbc {
namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kThresholdNote =
    "alpha, bins, mc_reps and the valley threshold are tool defaults chosen by null simulation, not reference values";

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// JSON has no infinity; a non-finite valley score is written as null.
ojson finite_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson uniformity_json(const UniformityReport& r) {
  ojson j;
  j["chi2_stat"] = r.chi2_stat;
  j["dof"] = r.dof;
  j["p_value"] = r.p_value;
  j["p_value_mc"] = r.p_value_mc;
  j["band_violations"] = r.band_violations;
  j["valley_score"] = finite_or_null(r.valley_score);
  j["verdict"] = to_string(r.verdict);
  return j;
}

int verdict_exit(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return exit_code::kPass;
    case Verdict::kFail:
      return exit_code::kFail;
    case Verdict::kInconclusive:
      return exit_code::kInconclusive;
  }
  return exit_code::kError;
}

struct TallyAssessment {
  UniformityReport single;
  UniformityReport per_output;
  std::vector<UniformityReport> slices;
  Verdict verdict = Verdict::kPass;
};

TallyAssessment assess(const RankTally& tally, const DiagnosticsConfig& diag, std::uint64_t seed) {
  TallyAssessment a;
  a.single = assess_pooled(tally, Pooling::kSingle, diag, seed);
  a.per_output = assess_pooled(tally, Pooling::kPerOutput, diag, seed);
  const bool failures = !tally.failed_trials().empty();
  for (Eigen::Index j = 0; j < tally.num_test(); ++j) {
    for (Eigen::Index i = 0; i < tally.num_outputs(); ++i) {
      RandomStream rng(seed, stream_id::kDiagnostics + 1000 + static_cast<std::uint64_t>(j * tally.num_outputs() + i));
      a.slices.push_back(assess_slice(tally.slice(j, i), tally.completed(), diag, failures, rng));
    }
  }
  a.verdict = diag.pooling == Pooling::kSingle ? a.single.verdict : a.per_output.verdict;
  return a;
}

ojson tally_report_json(const RankTally& tally, const TallyAssessment& a, const DiagnosticsConfig& diag) {
  ojson j;
  j["verdict"] = to_string(a.verdict);
  j["verdict_pooling"] = diag.pooling == Pooling::kSingle ? "single" : "per_output";
  j["num_test_points"] = tally.num_test();
  j["num_outputs"] = tally.num_outputs();
  j["L"] = tally.num_samples();
  j["N_completed"] = tally.completed();
  j["failed_trials"] = tally.failed_trials();
  j["pooled"]["single"] = uniformity_json(a.single);
  j["pooled"]["per_output"] = uniformity_json(a.per_output);
  j["slices"] = ojson::array();
  std::size_t k = 0;
  for (Eigen::Index t = 0; t < tally.num_test(); ++t) {
    for (Eigen::Index i = 0; i < tally.num_outputs(); ++i, ++k) {
      ojson s = uniformity_json(a.slices[k]);
      s["test_point_index"] = t;
      s["output_index"] = i;
      s["count_total"] = tally.completed();
      j["slices"].push_back(std::move(s));
    }
  }
  return j;
}

ojson thresholds_json(const DiagnosticsConfig& diag, std::int64_t num_samples) {
  ojson j;
  j["alpha"] = diag.alpha;
  j["bins"] = effective_bins(diag, num_samples);
  j["mc_reps"] = diag.mc_reps;
  j["note"] = kThresholdNote;
  return j;
}

Counts display_counts(CountView counts, std::int64_t bins) {
  if (bins == static_cast<std::int64_t>(counts.size())) return Counts(counts.begin(), counts.end());
  return rebin(counts, bins);
}

HistogramAnnotations notes_for(const std::string& title, const UniformityReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "chi2 = %.3f (dof %d), p = %.4g, p_mc = %.4g, valley = %.3f, verdict: %s",
                r.chi2_stat, r.dof, r.p_value, r.p_value_mc, std::isfinite(r.valley_score) ? r.valley_score : -1.0,
                to_string(r.verdict).c_str());
  return {title, {line}};
}

/// Collects output files and writes the manifest last.
class OutputSet {
 public:
  OutputSet(const RunContext& ctx, std::string command, const ExperimentConfig& config)
      : dir_(ctx.out_dir), command_(std::move(command)), config_(config), started_(utc_now()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) throw IoError("cannot create output directory '" + dir_.string() + "'");
  }

  void add(const std::string& name, const std::string& contents) { files_.emplace_back(name, contents); }

  void commit() {
    ojson files = ojson::array();
    for (const auto& [name, contents] : files_) {
      write_file_atomic(dir_ / name, contents);
      files.push_back({{"path", name}, {"sha256", sha256_hex(contents)}, {"bytes", contents.size()}});
    }
    ojson manifest;
    manifest["tool"] = "gp-sbc";
    manifest["tool_version"] = tool_version();
    manifest["command"] = command_;
    manifest["base_seed"] = config_.sbc.base_seed;
    manifest["started_at"] = started_;
    manifest["finished_at"] = utc_now();
    manifest["config"] = ojson::parse(serialize_config(config_));
    manifest["files"] = std::move(files);
    write_file_atomic(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  std::string command_;
  const ExperimentConfig& config_;
  std::string started_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string theta_trace_csv(const MargCheckReport& r, const HyperLayout& layout) {
  std::string out = "trial_index,converged,iterations,final_lml,log_signal_variance";
  for (Eigen::Index j = 0; j < layout.input_dim; ++j) out += ",log_lengthscale_" + std::to_string(j + 1);
  for (Eigen::Index i = 0; i < layout.output_dim; ++i) out += ",log_noise_variance_" + std::to_string(i + 1);
  out += "\n";
  for (Eigen::Index t = 0; t < r.per_trial_theta.rows(); ++t) {
    const auto row = static_cast<std::size_t>(t);
    out += std::to_string(t) + "," + std::to_string(static_cast<int>(r.per_trial_converged[row])) + "," +
           std::to_string(r.per_trial_iterations[row]) + "," + format_double(r.per_trial_lml[row]);
    for (Eigen::Index k = 0; k < layout.size(); ++k) out += "," + format_double(r.per_trial_theta(t, k));
    out += "\n";
  }
  return out;
}

}  // namespace

const char* tool_version() { return GPSBC_VERSION; }

CommandResult cmd_sbc(const ExperimentConfig& config, const RunContext& ctx) {
  validate_diagnostics_config(config.diagnostics);
  const auto exp = resolve_experiment(config, Command::kSbc);
  OutputSet out(ctx, "sbc", config);

  const RankTally tally = run_sbc(exp.model, exp.sbc, RunOptions{ctx.threads});
  const TallyAssessment a = assess(tally, config.diagnostics, exp.sbc.base_seed);
  const auto bins = effective_bins(config.diagnostics, tally.num_samples());

  ojson report = tally_report_json(tally, a, config.diagnostics);
  report["command"] = "sbc";
  report["fault"] = exp.model.fault() ? fault_name(*exp.model.fault()) : "none";
  report["thresholds"] = thresholds_json(config.diagnostics, tally.num_samples());

  out.add("tally.csv", tally_csv(tally));
  out.add("report.json", report.dump(2) + "\n");
  const auto single = pool_tally(tally, Pooling::kSingle).front();
  out.add("histogram_single.svg", render_histogram(display_counts(single, bins), notes_for("Rank histogram, all slices pooled", a.single)));
  const auto per_output = pool_tally(tally, Pooling::kPerOutput);
  for (std::size_t i = 0; i < per_output.size(); ++i) {
    out.add("histogram_output_" + std::to_string(i) + ".svg",
            render_histogram(display_counts(per_output[i], bins),
                             {"Rank histogram, output " + std::to_string(i), {}}));
  }
  out.commit();
  const auto& pooled = config.diagnostics.pooling == Pooling::kSingle ? a.single : a.per_output;
  char line[160];
  std::snprintf(line, sizeof line, "sbc verdict: %s (p = %.4g, p_mc = %.4g)", to_string(a.verdict).c_str(),
                pooled.p_value, pooled.p_value_mc);
  return {verdict_exit(a.verdict), line};
}

CommandResult cmd_demo_bug(const ExperimentConfig& config, const RunContext& ctx) {
  validate_diagnostics_config(config.diagnostics);
  const auto exp = resolve_experiment(config, Command::kDemoBug);
  if (!exp.model.fault()) {
    throw ConfigError("arms indistinguishable: demo-bug needs a planted fault in model.fault");
  }
  if (!std::holds_alternative<LinearCoregionalization>(exp.model.kernel().variant) || !exp.model.is_sparse()) {
    throw ConfigError("demo-bug needs a coregionalization kernel with sparse inference");
  }
  if (std::holds_alternative<TransposedMixingMatrix>(exp.model.fault()->variant) &&
      !has_asymmetric_mixing(exp.model.kernel())) {
    throw ConfigError("fault is a no-op for symmetric W: transposed_mixing_matrix changes nothing");
  }
  OutputSet out(ctx, "demo-bug", config);

  const GpModel fixed = exp.model.with_fault(std::nullopt);
  const RankTally faulted = run_sbc(exp.model, exp.sbc, RunOptions{ctx.threads});
  const RankTally unfaulted = run_sbc(fixed, exp.sbc, RunOptions{ctx.threads});
  const TallyAssessment fa = assess(faulted, config.diagnostics, exp.sbc.base_seed);
  const TallyAssessment ua = assess(unfaulted, config.diagnostics, exp.sbc.base_seed);
  const bool detected = fa.verdict == Verdict::kFail && ua.verdict == Verdict::kPass;

  ojson report;
  report["command"] = "demo-bug";
  report["fault"] = fault_name(*exp.model.fault());
  report["contrast_detected"] = detected;
  report["faulted"] = tally_report_json(faulted, fa, config.diagnostics);
  report["unfaulted"] = tally_report_json(unfaulted, ua, config.diagnostics);
  report["thresholds"] = thresholds_json(config.diagnostics, faulted.num_samples());

  const auto bins = effective_bins(config.diagnostics, faulted.num_samples());
  const auto f_counts = display_counts(pool_tally(faulted, Pooling::kSingle).front(), bins);
  const auto u_counts = display_counts(pool_tally(unfaulted, Pooling::kSingle).front(), bins);
  out.add("tally_faulted.csv", tally_csv(faulted));
  out.add("tally_unfaulted.csv", tally_csv(unfaulted));
  out.add("report.json", report.dump(2) + "\n");
  out.add("demo_bug.svg", render_side_by_side(f_counts, notes_for("With fault: " + fault_name(*exp.model.fault()), fa.single),
                                              u_counts, notes_for("Fault removed", ua.single)));
  out.commit();
  return {detected ? exit_code::kPass : exit_code::kFail,
          std::string("demo-bug: faulted arm ") + to_string(fa.verdict) + ", unfaulted arm " + to_string(ua.verdict) +
              (detected ? " (contrast detected)" : " (contrast not shown)")};
}

CommandResult cmd_marg_check(const ExperimentConfig& config, const RunContext& ctx) {
  validate_diagnostics_config(config.diagnostics);
  if (!config.marg_check) throw ConfigError("marg_check: section is required for marg-check");
  const auto& section = *config.marg_check;
  const auto exp = resolve_experiment(config, Command::kMargCheck);
  if (exp.model.fault()) throw ConfigError("model.fault: marg-check does not take a planted fault");
  const HyperLayout layout = hyper_layout(exp.model);

  TrainingData data;
  if (section.data) {
    data = *section.data;
  } else if (section.data_csv) {
    std::filesystem::path path = *section.data_csv;
    if (path.is_relative()) path = ctx.base_dir / path;
    data = read_training_csv(path.string());
  } else {
    throw ConfigError("marg_check: data or data_csv is required");
  }
  if (data.x.dim() != layout.input_dim || data.y.cols() != layout.output_dim) {
    throw ConfigError("marg_check data: columns do not match the model's input/output dimensions");
  }

  MargCheckConfig mc;
  mc.hyper_prior = section.hyper_prior ? *section.hyper_prior : centred_hyper_prior(exp.model, 1.0);
  mc.optimizer = section.optimizer;
  mc.diagnostics = config.diagnostics;
  mc.valley_threshold = section.valley_threshold;

  OutputSet out(ctx, "marg-check", config);
  const MargCheckReport r = run_marg_check(data.x, data.y, layout, exp.sbc, mc, RunOptions{ctx.threads});
  SbcConfig used = exp.sbc;
  used.x = data.x;
  const TallyAssessment a = assess(r.tally, config.diagnostics, used.base_seed);

  ojson report = tally_report_json(r.tally, a, config.diagnostics);
  report["command"] = "marg-check";
  report["verdict"] = to_string(r.verdict);
  report["uniformity"] = uniformity_json(r.uniformity);
  report["valley_threshold"] = r.valley_threshold;
  report["valley_threshold_source"] = r.valley_threshold_source;
  report["prologue_fit"] = {{"theta_hat", std::vector<double>(r.prologue_fit.theta_hat.data(),
                                                              r.prologue_fit.theta_hat.data() + r.prologue_fit.theta_hat.size())},
                            {"final_lml", r.prologue_fit.final_lml},
                            {"converged", r.prologue_fit.converged},
                            {"iterations", r.prologue_fit.iterations},
                            {"restarts_used", r.prologue_fit.restarts_used}};
  std::int64_t converged = 0;
  for (char c : r.per_trial_converged) converged += c;
  report["trials_converged"] = converged;
  report["thresholds"] = thresholds_json(config.diagnostics, r.tally.num_samples());

  const auto bins = effective_bins(config.diagnostics, r.tally.num_samples());
  out.add("tally.csv", tally_csv(r.tally));
  out.add("theta_trace.csv", theta_trace_csv(r, layout));
  out.add("report.json", report.dump(2) + "\n");
  out.add("histogram.svg", render_histogram(display_counts(pool_tally(r.tally, Pooling::kSingle).front(), bins),
                                            notes_for("Type-II refit rank histogram", r.uniformity)));
  out.commit();

  const int code = r.verdict == MargVerdict::kType2Adequate          ? exit_code::kPass
                   : r.verdict == MargVerdict::kMarginalisationNeeded ? exit_code::kFail
                                                                      : exit_code::kInconclusive;
  char line[200];
  std::snprintf(line, sizeof line, "marg-check verdict: %s (p_mc = %.4g, valley = %.3f, threshold %.3f)",
                to_string(r.verdict).c_str(), r.uniformity.p_value_mc, r.uniformity.valley_score, r.valley_threshold);
  return {code, line};
}

CommandResult run_command(Command command, const ExperimentConfig& config, const RunContext& context) {
  switch (command) {
    case Command::kSbc:
      return cmd_sbc(config, context);
    case Command::kDemoBug:
      return cmd_demo_bug(config, context);
    case Command::kMargCheck:
      return cmd_marg_check(config, context);
  }
  throw InvalidArgument("unknown command");
}

}  // namespace gpsbc
