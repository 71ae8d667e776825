// fieldcal command-line tool: simulate, register, evaluate, report.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fieldcal/io.hpp"
#include "fieldcal/metrics.hpp"
#include "fieldcal/simulator.hpp"
#include "fieldcal/temporal.hpp"
#include "fieldcal/textio.hpp"

namespace fs = std::filesystem;
using namespace fieldcal;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Relative paths inside a config file resolve against the config's directory.
std::string resolve_against(const std::string& base_file, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
  const fs::path candidate = fs::path(base_file).parent_path() / path;
  if (fs::exists(candidate)) return candidate.string();
  return path;
}

FieldTemplate load_template_checked(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open template " + path);
  try {
    return load_template(in);
  } catch (const TemplateError& e) {
    throw InputError(path + ": " + e.what());
  }
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override) {
  SimulateConfig cfg = load_simulate_config(config_path);
  if (seed_override) cfg.seed = *seed_override;

  const FieldTemplate tpl =
      load_template_checked(resolve_against(config_path, cfg.template_path));

  const std::vector<GroundTruthFrame> truth =
      generate_sequence(tpl, cfg.trajectory, cfg.players, cfg.seed);

  DetectionFile det;
  det.image_width = cfg.trajectory.image_width;
  det.image_height = cfg.trajectory.image_height;
  det.fps = cfg.trajectory.fps;
  det.template_name = tpl.name;

  PoseFile gt;
  gt.image_width = cfg.trajectory.image_width;
  gt.image_height = cfg.trajectory.image_height;

  for (std::size_t i = 0; i < truth.size(); ++i) {
    const GroundTruthFrame& frame = truth[i];

    FrameRecord rec;
    rec.index = static_cast<std::int64_t>(i);
    rec.timestamp = static_cast<double>(i) / cfg.trajectory.fps;
    rec.detections = render_detections(frame.k, frame.m, tpl, frame.players, cfg.noise,
                                       frame_seed(cfg.seed, i));
    rec.player_positions = frame.players;
    det.frames.push_back(std::move(rec));

    PoseRecord pose;
    pose.index = static_cast<std::int64_t>(i);
    pose.f = frame.k.f;
    pose.pose = frame.m;
    pose.status = FrameStatus::registered;
    gt.frames.push_back(pose);
  }

  fs::create_directories(out_dir);
  save_detections((fs::path(out_dir) / "detections.txt").string(), det);
  save_pose_file((fs::path(out_dir) / "ground_truth.txt").string(), gt);

  std::cout << "simulated " << truth.size() << " frames -> " << out_dir << "\n";
  return 0;
}

int run_register(const std::string& detections_path, const std::string& template_path,
                 const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed_override, bool no_filter, bool no_players) {
  const DetectionFile det = load_detections(detections_path);
  const FieldTemplate tpl = load_template_checked(template_path);

  PipelineConfig cfg;
  if (!config_path.empty()) cfg = load_register_config(config_path);
  cfg.image_width = det.image_width;
  cfg.image_height = det.image_height;
  if (seed_override) cfg.seed = *seed_override;
  if (no_filter) cfg.use_filter = false;
  if (no_players) cfg.use_players = false;

  Registrar registrar(tpl, cfg);

  PoseFile out;
  out.image_width = det.image_width;
  out.image_height = det.image_height;

  const auto t0 = std::chrono::steady_clock::now();
  for (const FrameRecord& frame : det.frames) {
    FrameInput input;
    input.detections = frame.detections;
    input.player_positions = frame.player_positions;
    const FrameEstimate est = registrar.step(input);

    PoseRecord rec;
    rec.index = frame.index;
    rec.f = est.intrinsics.valid() ? est.intrinsics.f : 0.0;
    rec.pose = est.pose;
    rec.status = est.status;
    rec.reinitialized = est.reinitialized;
    out.frames.push_back(rec);
  }
  const auto t1 = std::chrono::steady_clock::now();

  if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  save_pose_file(out_path, out);

  const double seconds = std::chrono::duration<double>(t1 - t0).count();
  const double fps = seconds > 0.0 ? static_cast<double>(det.frames.size()) / seconds : 0.0;
  std::cout << "registered " << det.frames.size() << " frames in " << textio::fmt(seconds)
            << " s (" << textio::fmt(fps) << " frames/s)\n";
  return 0;
}

int run_evaluate(const std::string& est_path, const std::string& gt_path,
                 const std::string& template_path, const std::string& out_path,
                 double width_override, double height_override) {
  PoseFile est = load_pose_file(est_path);
  PoseFile gt = load_pose_file(gt_path);
  if (width_override > 0.0) est.image_width = gt.image_width = width_override;
  if (height_override > 0.0) est.image_height = gt.image_height = height_override;
  const FieldTemplate tpl = load_template_checked(template_path);

  const MetricReport report = compute_metric_report(est, gt, tpl);

  if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  save_metric_report(out_path, report);

  for (int c = 0; c < kMetricColumnCount; ++c) {
    const auto column = static_cast<MetricColumn>(c);
    const MetricAggregate agg = aggregate_metric(report, column);
    std::cout << metric_column_name(column) << ": count " << agg.count << " mean "
              << textio::fmt(agg.mean) << " median " << textio::fmt(agg.median) << " auc "
              << textio::fmt(agg.auc) << " (threshold " << textio::fmt(metric_threshold(column))
              << ")\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& report_paths, const std::string& out_dir) {
  if (report_paths.empty()) throw InputError("report needs at least one metric report file");

  std::vector<std::pair<std::string, MetricReport>> reports;
  for (const std::string& path : report_paths) {
    reports.emplace_back(fs::path(path).stem().string(), load_metric_report(path));
  }

  fs::create_directories(out_dir);

  std::ostringstream table;
  table << "metric report count mean median auc\n";
  for (int c = 0; c < kMetricColumnCount; ++c) {
    const auto column = static_cast<MetricColumn>(c);

    std::vector<CurveSeries> series;
    for (const auto& [label, report] : reports) {
      CurveSeries s;
      s.label = label;
      for (const MetricRow& row : report.rows) {
        const double v = row[column];
        if (std::isfinite(v)) s.errors.push_back(metric_error_value(column, v));
      }
      series.push_back(std::move(s));

      const MetricAggregate agg = aggregate_metric(report, column);
      table << metric_column_name(column) << " " << label << " " << agg.count << " "
            << (std::isfinite(agg.mean) ? textio::fmt(agg.mean) : "nan") << " "
            << (std::isfinite(agg.median) ? textio::fmt(agg.median) : "nan") << " "
            << (std::isfinite(agg.auc) ? textio::fmt(agg.auc) : "nan") << "\n";
    }

    const std::string svg_path =
        (fs::path(out_dir) / (std::string("curves_") + metric_column_name(column) + ".svg"))
            .string();
    std::ofstream svg(svg_path);
    if (!svg) throw InputError("cannot write " + svg_path);
    write_cumulative_svg(svg, std::string(metric_column_name(column)) + " cumulative error",
                         series, metric_threshold(column));
  }

  std::ofstream table_file((fs::path(out_dir) / "table.txt").string());
  if (!table_file) throw InputError("cannot write report table");
  table_file << table.str();
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldcal: planar field registration pipeline"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a ground-truth sequence and detections");
  std::string sim_config, sim_out_dir;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--config", sim_config, "simulation config file")->required();
  sim->add_option("--out-dir", sim_out_dir, "output directory")->required();
  sim->add_option("--seed", sim_seed, "override the config seed");

  // register
  auto* reg = app.add_subcommand("register", "estimate per-frame camera parameters");
  std::string reg_detections, reg_template, reg_config, reg_out;
  std::optional<std::uint64_t> reg_seed;
  bool reg_no_filter = false, reg_no_players = false;
  reg->add_option("--detections", reg_detections, "detection file")->required();
  reg->add_option("--template", reg_template, "field template file")->required();
  reg->add_option("--config", reg_config, "pipeline config file");
  reg->add_option("--out", reg_out, "output pose file")->required();
  reg->add_option("--seed", reg_seed, "override the config seed");
  reg->add_flag("--no-filter", reg_no_filter, "disable the particle filter");
  reg->add_flag("--no-players", reg_no_players, "ignore player detections");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "compare an estimated pose file to ground truth");
  std::string eval_est, eval_gt, eval_template, eval_out;
  double eval_width = 0.0, eval_height = 0.0;
  eval->add_option("--estimated", eval_est, "estimated pose file")->required();
  eval->add_option("--ground-truth", eval_gt, "ground-truth pose file")->required();
  eval->add_option("--template", eval_template, "field template file")->required();
  eval->add_option("--out", eval_out, "output metric report")->required();
  eval->add_option("--image-width", eval_width, "override the image width");
  eval->add_option("--image-height", eval_height, "override the image height");

  // report
  auto* rep = app.add_subcommand("report", "cumulative error curves and a summary table");
  std::vector<std::string> rep_inputs;
  std::string rep_out_dir;
  rep->add_option("reports", rep_inputs, "metric report files")->required();
  rep->add_option("--out-dir", rep_out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(sim_config, sim_out_dir, sim_seed);
    if (reg->parsed()) {
      return run_register(reg_detections, reg_template, reg_config, reg_out, reg_seed,
                          reg_no_filter, reg_no_players);
    }
    if (eval->parsed()) {
      return run_evaluate(eval_est, eval_gt, eval_template, eval_out, eval_width, eval_height);
    }
    if (rep->parsed()) return run_report(rep_inputs, rep_out_dir);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TemplateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SimulatorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const GeometryError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const FilterError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
