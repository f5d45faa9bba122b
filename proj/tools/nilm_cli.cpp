#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nilm/io.hpp"
#include "nilm/labeling.hpp"
#include "nilm/pipeline.hpp"
#include "nilm/simulator.hpp"

namespace fs = std::filesystem;
using namespace nilm;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    io::write_text_file(out, text);
  }
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  const auto sc = io::read_scenario(scenario_path);
  const auto rec = compose_machine(sc, {false});
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir + ": " + ec.message());
  io::write_waveforms(fs::path(out_dir) / "waveforms.csv", io::make_waveform_set(rec.current, rec.voltage));
  io::write_truth(fs::path(out_dir) / "truth.csv", io::truth_table(rec.truth, sc.sample_rate));
  io::write_text_file(fs::path(out_dir) / "scenario.json", io::scenario_to_json(sc));
  std::cout << "wrote " << rec.current.size() << " samples, " << rec.truth.period_durations.size() << " periods to "
            << out_dir << "\n";
  return 0;
}

int cmd_disaggregate(const std::string& wave_path, const std::string& config_path, const std::string& truth_path,
                     const std::string& out) {
  const PipelineConfig config = config_path.empty() ? PipelineConfig{} : io::read_config(config_path);
  const auto set = io::read_waveforms(wave_path);
  const auto report = disaggregate(set.current(), set.voltage(), config);
  if (truth_path.empty()) {
    emit(io::report_to_json(report), out);
    return 0;
  }
  const auto truth = io::read_truth(truth_path);
  const auto groups = io::grouped_truth(truth);
  const auto summary = evaluate_report(report, groups);
  emit(io::report_to_json(report, &summary), out);
  return 0;
}

int cmd_evaluate(const std::string& report_path, const std::string& truth_path, const std::string& out) {
  const auto report = io::read_report(report_path);
  const auto truth = io::read_truth(truth_path);
  const auto summary = evaluate_report(report, io::grouped_truth(truth));
  emit(io::evaluation_to_json(summary), out);
  return 0;
}

int cmd_label(const std::string& report_path, const std::string& model_path, const std::string& wave_path,
              const std::string& out) {
  auto report = io::read_report(report_path);
  std::optional<FingerprintModel> model;
  if (!model_path.empty()) model = io::read_model(model_path);
  std::optional<io::WaveformSet> set;
  if (!wave_path.empty()) set = io::read_waveforms(wave_path);
  label_estimates(report, model ? &*model : nullptr, set ? &set->current() : nullptr, set ? &set->voltage() : nullptr);
  emit(io::report_to_json(report), out);
  return 0;
}

int cmd_plotdata(const std::string& report_path, const std::string& truth_path, const std::string& out_dir) {
  const auto report = io::read_report(report_path);
  std::optional<io::TruthTable> truth;
  if (!truth_path.empty()) truth = io::read_truth(truth_path);
  io::write_plot_data(report, out_dir, truth ? &*truth : nullptr);
  std::cout << "wrote power.csv and energy.csv to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& samples_path, const std::string& out) {
  const auto samples = io::samples_from_json(io::read_text_file(samples_path));
  std::vector<std::string> warnings;
  const auto model = train_fingerprint(samples, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  emit(io::model_to_json(model), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-intrusive load disaggregation for machine tools and production machines"};
  app.require_subcommand(1);

  std::string scenario, out, wave, config, truth, report, model, samples;

  auto* sim = app.add_subcommand("simulate", "Synthesize waveforms and per-load truth from a scenario");
  sim->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out, "Output directory")->required();

  auto* dis = app.add_subcommand("disaggregate", "Run the disaggregation pipeline on a waveform file");
  dis->add_option("waveforms", wave, "Waveform CSV")->required()->check(CLI::ExistingFile);
  dis->add_option("-c,--config", config, "Pipeline config JSON")->check(CLI::ExistingFile);
  dis->add_option("-t,--truth", truth, "Truth CSV; embeds an evaluation in the report")->check(CLI::ExistingFile);
  dis->add_option("-o,--out", out, "Report JSON (stdout when omitted)");

  auto* eva = app.add_subcommand("evaluate", "Score a report against per-load truth");
  eva->add_option("report", report, "Report JSON")->required()->check(CLI::ExistingFile);
  eva->add_option("truth", truth, "Truth CSV")->required()->check(CLI::ExistingFile);
  eva->add_option("-o,--out", out, "Evaluation JSON (stdout when omitted)");

  auto* lab = app.add_subcommand("label", "Attach power-factor hints and fingerprint labels to estimates");
  lab->add_option("report", report, "Report JSON")->required()->check(CLI::ExistingFile);
  lab->add_option("--model", model, "Fingerprint model JSON")->check(CLI::ExistingFile);
  lab->add_option("--waveforms", wave, "Waveform CSV the report was computed from")->check(CLI::ExistingFile);
  lab->add_option("-o,--out", out, "Labeled report JSON (stdout when omitted)");

  auto* plot = app.add_subcommand("plotdata", "Export per-period power and per-load energy CSV");
  plot->add_option("report", report, "Report JSON")->required()->check(CLI::ExistingFile);
  plot->add_option("-t,--truth", truth, "Truth CSV to include as extra columns")->check(CLI::ExistingFile);
  plot->add_option("-o,--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Fit a fingerprint model from labeled transient features");
  train->add_option("samples", samples, "Samples JSON")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", out, "Model JSON (stdout when omitted)");

  auto* cfg = app.add_subcommand("config", "Print the default pipeline config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << io::error_to_json("UsageError", e.what()) << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(scenario, out);
    if (dis->parsed()) return cmd_disaggregate(wave, config, truth, out);
    if (eva->parsed()) return cmd_evaluate(report, truth, out);
    if (lab->parsed()) return cmd_label(report, model, wave, out);
    if (plot->parsed()) return cmd_plotdata(report, truth, out);
    if (train->parsed()) return cmd_train(samples, out);
    if (cfg->parsed()) {
      std::cout << io::config_to_json(PipelineConfig{});
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << io::error_to_json(e) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << io::error_to_json("InternalError", e.what()) << "\n";
    return 1;
  }
  return 1;
}
