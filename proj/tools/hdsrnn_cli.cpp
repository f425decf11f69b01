// hdsrnn: batch driver for data generation, pretreatment, training,
// evaluation, sweeps, attention export and baselines. Every command writes its
// artifacts plus resolved_config.json into --out.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hdsrnn/errors.hpp"
#include "hdsrnn/eval.hpp"
#include "hdsrnn/experiment.hpp"

namespace fs = std::filesystem;
using namespace hdsrnn;
using experiment::ExperimentConfig;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool deterministic = false;
};

ExperimentConfig base_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : experiment::load_experiment_config(g.config_path);
  if (!g.out.empty()) c.output = g.out;
  if (g.seed) c.training.seed = *g.seed;
  c.validate();
  return c;
}

void echo_config(const ExperimentConfig& c) {
  experiment::write_json(experiment::to_json(c), c.output / "resolved_config.json");
}

data::Pretreated load_pretreated(ExperimentConfig& c) {
  if (!c.pretreat) throw ConfigError("pretreat: false is only supported by the baseline command");
  const data::SeriesPanel raw = experiment::load_panel(c);
  experiment::resolve(c, raw);
  return data::pretreat(raw, c.period);
}

void done(const fs::path& path) { std::cout << "wrote " << path.string() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hDS-RNN dual-stage attention forecaster toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed (generator seed for generate, training seed otherwise)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--deterministic", g.deterministic, "Omit wall-clock fields from reports");

  auto* generate = app.add_subcommand("generate", "Write a synthetic sensor panel CSV");
  bool default_wds = false;
  std::optional<std::size_t> planted_lag, length;
  std::string spec_path;
  generate->add_flag("--default-wds", default_wds, "18-sensor water network (default)");
  generate->add_option("--planted-lag", planted_lag, "3-sensor panel with an echo at this lag");
  generate->add_option("--spec", spec_path, "Network spec JSON")->check(CLI::ExistingFile);
  generate->add_option("--length", length, "Samples (30-minute cadence)");

  app.add_subcommand("preprocess", "Difference, deseasonalize and normalize the panel");

  auto* train_cmd = app.add_subcommand("train", "Train hDS-RNN; writes checkpoint.json and train_report.json");
  bool grid = false;
  train_cmd->add_flag("--grid", grid, "Grid search first, then retrain the best trial");

  auto* evaluate = app.add_subcommand("evaluate", "Test-split metrics of a saved checkpoint");
  std::string checkpoint_path, report_path;
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint (default <out>/checkpoint.json)");

  auto* sweep = app.add_subcommand("sweep", "Encoder- or decoder-length sweep");
  std::optional<std::string> sweep_param;
  std::vector<std::size_t> sweep_values;
  sweep->add_option("--param", sweep_param, "encoder_length or decoder_length");
  sweep->add_option("--values", sweep_values, "Comma-separated values")->delimiter(',');

  auto* attention = app.add_subcommand("export-attention", "Mean spatial attention weight per sensor");
  attention->add_option("--checkpoint", checkpoint_path, "Checkpoint (default <out>/checkpoint.json)");
  attention->add_option("--report", report_path, "Training report (default <out>/train_report.json)");

  auto* baseline = app.add_subcommand("baseline", "Fit and evaluate one baseline forecaster");
  std::optional<std::string> kind;
  baseline->add_option("--kind", kind, "persistence, seasonal_naive, linear_ar, mlp or seq2seq");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig c = base_config(g);
    const fs::path out = c.output;

    if (generate->parsed()) {
      if (g.seed) c.data.generator.seed = *g.seed;
      if (length) c.data.generator.length = *length;
      if (int(default_wds) + int(planted_lag.has_value()) + int(!spec_path.empty()) > 1)
        throw ConfigError("choose one of --default-wds, --planted-lag, --spec");
      if (default_wds) c.data.network = "default_wds";
      if (planted_lag) {
        c.data.network = "planted_lag";
        c.data.lag = *planted_lag;
      }
      if (!spec_path.empty()) {
        c.data.network = "custom";
        c.data.custom = synth::network_spec_from_json(experiment::read_json(spec_path));
      }
      c.data.csv.clear();
      c.validate();
      const data::SeriesPanel panel = experiment::load_panel(c);
      echo_config(c);
      experiment::write_json(synth::to_json(*c.data.network_spec()), out / "network.json");
      data::write_csv(panel, out / "panel.csv");
      done(out / "panel.csv");
    } else if (app.got_subcommand("preprocess")) {
      const data::Pretreated p = load_pretreated(c);
      echo_config(c);
      nlohmann::json decomposition = data::to_json(p.model);
      decomposition["initial"] = p.initial;
      experiment::write_json(decomposition, out / "decomposition.json");
      data::write_csv(p.normalized, out / "normalized.csv");
      done(out / "normalized.csv");
    } else if (train_cmd->parsed()) {
      const data::Pretreated p = load_pretreated(c);
      echo_config(c);
      nn::ModelConfig model_config = c.model;
      train::TrainConfig train_config = c.training;
      if (grid) {
        const train::GridResult result = train::grid_search(c.model, c.training, p);
        experiment::write_json(train::to_json(result, g.deterministic), out / "grid_report.json");
        const train::Trial& best = result.best();
        model_config = best.model_config;
        train_config.learning_rate = best.learning_rate;
        train_config.seed = best.seed;
      }
      const train::FitResult fit = train::fit(model_config, train_config, p);
      nn::save_checkpoint(fit.model, out / "checkpoint.json");
      experiment::write_json(train::to_json(fit.report, g.deterministic), out / "train_report.json");
      done(out / "checkpoint.json");
      done(out / "train_report.json");
    } else if (evaluate->parsed()) {
      const nn::Model model = nn::load_checkpoint(checkpoint_path.empty() ? out / "checkpoint.json" : fs::path(checkpoint_path));
      c.model = model.config();
      c.target.clear();
      const data::Pretreated p = load_pretreated(c);
      echo_config(c);
      const eval::Evaluation e = eval::evaluate_test(model, p);
      experiment::write_json(eval::to_json(e), out / "evaluation.json");
      std::cout << "test mse " << e.residual.mse << " mae " << e.residual.mae << " (residual scale)\n";
      done(out / "evaluation.json");
    } else if (sweep->parsed()) {
      if (sweep_param) c.sweep.parameter = *sweep_param;
      if (!sweep_values.empty()) c.sweep.values = sweep_values;
      c.validate();
      const data::Pretreated p = load_pretreated(c);
      echo_config(c);
      const bool encoder = c.sweep.parameter == "encoder_length";
      const eval::SweepResult r = encoder ? eval::sweep_encoder_length(c.model, c.training, c.sweep.values, p)
                                          : eval::sweep_decoder_length(c.model, c.training, c.sweep.values, p);
      experiment::write_json(eval::to_json(r, g.deterministic), out / "sweep_report.json");
      const fs::path csv = out / (encoder ? "fig3_encoder_sweep.csv" : "fig5_decoder_sweep.csv");
      if (encoder) eval::write_encoder_sweep_csv(r, csv);
      else eval::write_decoder_sweep_csv(r, csv);
      done(csv);
    } else if (attention->parsed()) {
      const nn::Model model = nn::load_checkpoint(checkpoint_path.empty() ? out / "checkpoint.json" : fs::path(checkpoint_path));
      const nlohmann::json report_json =
          experiment::read_json(report_path.empty() ? out / "train_report.json" : fs::path(report_path));
      train::TrainReport report;
      report.epochs_run = report_json.at("epochs_run").get<std::size_t>();
      c.model = model.config();
      c.target.clear();
      const data::Pretreated p = load_pretreated(c);
      echo_config(c);
      const std::optional<synth::NetworkSpec> spec = c.data.network_spec();
      const eval::AttentionSummary s = eval::export_spatial_weights(model, report, p, spec ? &*spec : nullptr);
      experiment::write_json(eval::to_json(s), out / "attention.json");
      eval::write_attention_csv(s, out / "fig4_attention_weights.csv");
      done(out / "fig4_attention_weights.csv");
    } else if (baseline->parsed()) {
      if (kind) c.baseline.kind = baselines::parse_baseline_kind(*kind);
      c.baseline.training = c.training;
      const data::SeriesPanel raw = experiment::load_panel(c);
      experiment::resolve(c, raw);
      echo_config(c);
      const auto& m = c.model;
      const baselines::BaselineResult r =
          c.pretreat ? baselines::run_baseline(c.baseline, data::pretreat(raw, c.period), m.encoder_length,
                                               m.decoder_length, m.target_sensor)
                     : baselines::run_baseline(c.baseline, raw, m.encoder_length, m.decoder_length, m.target_sensor);
      const fs::path path = out / ("baseline_" + baselines::to_string(r.kind) + ".json");
      experiment::write_json(baselines::to_json(r, g.deterministic), path);
      std::cout << baselines::to_string(r.kind) << " test mse " << r.residual.mse << " mae " << r.residual.mae << '\n';
      done(path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
