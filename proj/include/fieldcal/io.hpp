#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldcal/field_model.hpp"
#include "fieldcal/simulator.hpp"
#include "fieldcal/temporal.hpp"

namespace fieldcal {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Detection files.
//
//   format: 1
//   image: <width> <height>
//   fps: <frames per second>
//   template: <template name>
//   frame: <index> <timestamp seconds>
//   s <id> <u> <v> <confidence>     semantic keypoint detection
//   p <u> <v> <confidence>          player detection
//   w <x> <y>                       player world position (meters)
//
// Frame indices are strictly increasing. Numbers use shortest round-trip
// formatting, so save/load is lossless and byte-stable.

struct FrameRecord {
  std::int64_t index = 0;
  double timestamp = 0.0;
  std::vector<Detection> detections;
  PlayerPositions player_positions;
};

struct DetectionFile {
  int format = 1;
  double image_width = 0.0;
  double image_height = 0.0;
  double fps = 0.0;
  std::string template_name;
  std::vector<FrameRecord> frames;
};

DetectionFile load_detections(std::istream& in);
DetectionFile load_detections(const std::string& path);
void save_detections(std::ostream& out, const DetectionFile& file);
void save_detections(const std::string& path, const DetectionFile& file);

// ---------------------------------------------------------------------------
// Pose files.
//
//   format: 1
//   image: <width> <height>
//   pose: <index> <f> <r00 .. r22 row-major> <tx ty tz> <status> <reinit 0|1>
//
// Status is one of registered | coasting | unregistered. Registered rows must
// carry a positive focal length and an orthonormal rotation.

struct PoseRecord {
  std::int64_t index = 0;
  double f = 0.0;
  Pose pose;
  FrameStatus status = FrameStatus::unregistered;
  bool reinitialized = false;
};

struct PoseFile {
  int format = 1;
  double image_width = 0.0;
  double image_height = 0.0;
  std::vector<PoseRecord> frames;
};

PoseFile load_pose_file(std::istream& in);
PoseFile load_pose_file(const std::string& path);
void save_pose_file(std::ostream& out, const PoseFile& file);
void save_pose_file(const std::string& path, const PoseFile& file);

const char* frame_status_name(FrameStatus status);
FrameStatus frame_status_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// Metric reports: one columnar row per frame plus an aggregate block.
//
//   format: 1
//   columns: frame iou_full iou_visible reproj_norm angular_deg translation_m focal_rel
//   row: <frame> <six values, nan when undefined>
//   summary: <column> count <n> mean <m> median <md> auc <a>
//   threshold: <column> <tau>
//
// For the IoU columns mean/median aggregate the IoU itself while the AUC is
// taken over the error 1 - IoU; the remaining columns aggregate the error
// directly. nan entries are excluded from aggregates.

enum class MetricColumn {
  iou_full = 0,
  iou_visible,
  reproj_norm,
  angular_deg,
  translation_m,
  focal_rel,
};

inline constexpr int kMetricColumnCount = 6;

const char* metric_column_name(MetricColumn column);
double metric_threshold(MetricColumn column);
// Error used for AUC and cumulative curves (1 - value for IoU columns).
double metric_error_value(MetricColumn column, double value);

struct MetricRow {
  std::int64_t frame = 0;
  std::array<double, kMetricColumnCount> values;  // nan = undefined

  MetricRow();
  double& operator[](MetricColumn c) { return values[static_cast<int>(c)]; }
  double operator[](MetricColumn c) const { return values[static_cast<int>(c)]; }
};

struct MetricReport {
  int format = 1;
  std::vector<MetricRow> rows;
};

struct MetricAggregate {
  int count = 0;  // rows with a defined value
  double mean = 0.0;
  double median = 0.0;
  double auc = 0.0;
};

MetricAggregate aggregate_metric(const MetricReport& report, MetricColumn column);

MetricReport load_metric_report(std::istream& in);
MetricReport load_metric_report(const std::string& path);
void save_metric_report(std::ostream& out, const MetricReport& report);
void save_metric_report(const std::string& path, const MetricReport& report);

// Frame-by-frame comparison of an estimated pose file against ground truth.
// Frame indices must match one-to-one; rows where either side is not
// registered carry nan values.
MetricReport compute_metric_report(const PoseFile& estimated, const PoseFile& ground_truth,
                                   const FieldTemplate& tpl);

// ---------------------------------------------------------------------------
// Cumulative error curves (report command).

struct CurveSeries {
  std::string label;
  std::vector<double> errors;  // unsorted; curves sort internally
};

// Points of the empirical cumulative curve: (sorted error k, (k+1)/n).
std::vector<Vec2> cumulative_curve_points(std::vector<double> errors);

// Standalone SVG with one cumulative curve per series, truncated at x_max.
void write_cumulative_svg(std::ostream& out, const std::string& title,
                          std::span<const CurveSeries> series, double x_max);

// ---------------------------------------------------------------------------
// Key-value configuration files: `key: value`, '#' comments, blank lines
// ignored. Unknown or duplicated keys are errors (repeatable keys excepted).

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

std::vector<ConfigEntry> parse_key_values(std::istream& in);

struct SimulateConfig {
  std::string template_path;
  TrajectoryConfig trajectory;
  PlayerSimConfig players;
  NoiseModel noise;
  std::uint64_t seed = 1;
};

SimulateConfig load_simulate_config(std::istream& in);
SimulateConfig load_simulate_config(const std::string& path);

PipelineConfig load_register_config(std::istream& in);
PipelineConfig load_register_config(const std::string& path);

}  // namespace fieldcal
