#include "fieldcal/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "fieldcal/metrics.hpp"
#include "fieldcal/textio.hpp"

namespace fieldcal {

namespace {

using textio::fmt;
using textio::parse_double;
using textio::parse_int;
using textio::split_ws;
using textio::strip_comment;
using textio::trim;

[[noreturn]] void fail(const char* what, int line, const std::string& msg) {
  throw IoError(std::string(what) + " parse error (line " + std::to_string(line) + "): " + msg);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// Splits a "key: value" line; returns false when the line has no colon.
bool split_key_value(std::string_view line, std::string& key, std::string& value) {
  const std::size_t colon = line.find(':');
  if (colon == std::string_view::npos) return false;
  key = std::string(trim(line.substr(0, colon)));
  value = std::string(trim(line.substr(colon + 1)));
  return true;
}

double parse_double_at(const char* what, int line, const std::string& tok) {
  try {
    return parse_double(tok);
  } catch (const std::exception&) {
    fail(what, line, "expected a number, got '" + tok + "'");
  }
}

long long parse_int_at(const char* what, int line, const std::string& tok) {
  try {
    return parse_int(tok);
  } catch (const std::exception&) {
    fail(what, line, "expected an integer, got '" + tok + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Detection files.

DetectionFile load_detections(std::istream& in) {
  constexpr const char* kWhat = "detections";
  DetectionFile file;
  bool saw_format = false, saw_image = false, saw_fps = false;
  FrameRecord* frame = nullptr;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    std::string key, value;
    if (split_key_value(line, key, value) && key.size() > 1) {
      const std::vector<std::string> toks = split_ws(value);
      if (key == "format") {
        file.format = static_cast<int>(parse_int_at(kWhat, line_no, value));
        if (file.format != 1) fail(kWhat, line_no, "unsupported format " + value);
        saw_format = true;
        continue;
      }
      if (key == "image") {
        if (toks.size() != 2) fail(kWhat, line_no, "image needs width and height");
        file.image_width = parse_double_at(kWhat, line_no, toks[0]);
        file.image_height = parse_double_at(kWhat, line_no, toks[1]);
        if (file.image_width <= 0.0 || file.image_height <= 0.0) {
          fail(kWhat, line_no, "image dimensions must be positive");
        }
        saw_image = true;
        continue;
      }
      if (key == "fps") {
        file.fps = parse_double_at(kWhat, line_no, value);
        if (file.fps <= 0.0) fail(kWhat, line_no, "fps must be positive");
        saw_fps = true;
        continue;
      }
      if (key == "template") {
        file.template_name = value;
        continue;
      }
      if (key == "frame") {
        if (!saw_format || !saw_image || !saw_fps) {
          fail(kWhat, line_no, "frame record before the header is complete");
        }
        if (toks.size() != 2) fail(kWhat, line_no, "frame needs an index and a timestamp");
        FrameRecord rec;
        rec.index = parse_int_at(kWhat, line_no, toks[0]);
        rec.timestamp = parse_double_at(kWhat, line_no, toks[1]);
        if (!file.frames.empty() && rec.index <= file.frames.back().index) {
          fail(kWhat, line_no, "frame indices must be strictly increasing");
        }
        file.frames.push_back(std::move(rec));
        frame = &file.frames.back();
        continue;
      }
      fail(kWhat, line_no, "unknown header key '" + key + "'");
    }

    if (frame == nullptr) fail(kWhat, line_no, "detection record outside a frame");
    const std::vector<std::string> toks = split_ws(line);
    if (toks[0] == "s") {
      if (toks.size() != 5) fail(kWhat, line_no, "semantic record needs: s id u v confidence");
      Detection d;
      d.kind = Detection::Kind::semantic;
      const long long id = parse_int_at(kWhat, line_no, toks[1]);
      if (id <= 0) fail(kWhat, line_no, "semantic id must be positive");
      d.id = static_cast<KeypointId>(id);
      d.image = Vec2(parse_double_at(kWhat, line_no, toks[2]),
                     parse_double_at(kWhat, line_no, toks[3]));
      d.confidence = parse_double_at(kWhat, line_no, toks[4]);
      frame->detections.push_back(d);
    } else if (toks[0] == "p") {
      if (toks.size() != 4) fail(kWhat, line_no, "player record needs: p u v confidence");
      Detection d;
      d.kind = Detection::Kind::player;
      d.id = 0;
      d.image = Vec2(parse_double_at(kWhat, line_no, toks[1]),
                     parse_double_at(kWhat, line_no, toks[2]));
      d.confidence = parse_double_at(kWhat, line_no, toks[3]);
      frame->detections.push_back(d);
    } else if (toks[0] == "w") {
      if (toks.size() != 3) fail(kWhat, line_no, "world record needs: w x y");
      frame->player_positions.emplace_back(parse_double_at(kWhat, line_no, toks[1]),
                                           parse_double_at(kWhat, line_no, toks[2]));
    } else {
      fail(kWhat, line_no, "unknown record '" + toks[0] + "'");
    }
  }

  if (!saw_format) throw IoError("detections parse error: missing format line");
  if (!saw_image || !saw_fps) throw IoError("detections parse error: incomplete header");
  return file;
}

DetectionFile load_detections(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return load_detections(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_detections(std::ostream& out, const DetectionFile& file) {
  out << "format: " << file.format << "\n";
  out << "image: " << fmt(file.image_width) << " " << fmt(file.image_height) << "\n";
  out << "fps: " << fmt(file.fps) << "\n";
  if (!file.template_name.empty()) out << "template: " << file.template_name << "\n";
  for (const FrameRecord& rec : file.frames) {
    out << "frame: " << rec.index << " " << fmt(rec.timestamp) << "\n";
    for (const Detection& d : rec.detections) {
      if (d.kind == Detection::Kind::semantic) {
        out << "s " << d.id << " " << fmt(d.image.x()) << " " << fmt(d.image.y()) << " "
            << fmt(d.confidence) << "\n";
      } else {
        out << "p " << fmt(d.image.x()) << " " << fmt(d.image.y()) << " " << fmt(d.confidence)
            << "\n";
      }
    }
    for (const Vec2& w : rec.player_positions) {
      out << "w " << fmt(w.x()) << " " << fmt(w.y()) << "\n";
    }
  }
}

void save_detections(const std::string& path, const DetectionFile& file) {
  std::ofstream out = open_output(path);
  save_detections(out, file);
}

// ---------------------------------------------------------------------------
// Pose files.

const char* frame_status_name(FrameStatus status) {
  switch (status) {
    case FrameStatus::registered:
      return "registered";
    case FrameStatus::coasting:
      return "coasting";
    case FrameStatus::unregistered:
      return "unregistered";
  }
  return "unregistered";
}

FrameStatus frame_status_from_name(const std::string& name) {
  if (name == "registered") return FrameStatus::registered;
  if (name == "coasting") return FrameStatus::coasting;
  if (name == "unregistered") return FrameStatus::unregistered;
  throw IoError("unknown frame status '" + name + "'");
}

PoseFile load_pose_file(std::istream& in) {
  constexpr const char* kWhat = "pose file";
  PoseFile file;
  bool saw_format = false, saw_image = false;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    std::string key, value;
    if (!split_key_value(line, key, value)) fail(kWhat, line_no, "expected 'key: value'");
    const std::vector<std::string> toks = split_ws(value);

    if (key == "format") {
      file.format = static_cast<int>(parse_int_at(kWhat, line_no, value));
      if (file.format != 1) fail(kWhat, line_no, "unsupported format " + value);
      saw_format = true;
      continue;
    }
    if (key == "image") {
      if (toks.size() != 2) fail(kWhat, line_no, "image needs width and height");
      file.image_width = parse_double_at(kWhat, line_no, toks[0]);
      file.image_height = parse_double_at(kWhat, line_no, toks[1]);
      if (file.image_width <= 0.0 || file.image_height <= 0.0) {
        fail(kWhat, line_no, "image dimensions must be positive");
      }
      saw_image = true;
      continue;
    }
    if (key == "pose") {
      if (!saw_format || !saw_image) fail(kWhat, line_no, "pose row before the header");
      if (toks.size() != 16) {
        fail(kWhat, line_no, "pose row needs index, f, 9 rotation values, 3 translation "
                             "values, status, reinit flag");
      }
      PoseRecord rec;
      rec.index = parse_int_at(kWhat, line_no, toks[0]);
      rec.f = parse_double_at(kWhat, line_no, toks[1]);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          rec.pose.rotation(r, c) = parse_double_at(kWhat, line_no, toks[2 + 3 * r + c]);
        }
      }
      for (int i = 0; i < 3; ++i) {
        rec.pose.translation(i) = parse_double_at(kWhat, line_no, toks[11 + i]);
      }
      try {
        rec.status = frame_status_from_name(toks[14]);
      } catch (const IoError& e) {
        fail(kWhat, line_no, e.what());
      }
      const long long reinit = parse_int_at(kWhat, line_no, toks[15]);
      if (reinit != 0 && reinit != 1) fail(kWhat, line_no, "reinit flag must be 0 or 1");
      rec.reinitialized = reinit == 1;

      if (!file.frames.empty() && rec.index <= file.frames.back().index) {
        fail(kWhat, line_no, "frame indices must be strictly increasing");
      }
      if (rec.status == FrameStatus::registered) {
        if (rec.f <= 0.0) fail(kWhat, line_no, "registered row with non-positive focal length");
        if (!rec.pose.valid_rotation(1e-6)) {
          fail(kWhat, line_no, "registered row with a non-orthonormal rotation");
        }
      }
      file.frames.push_back(rec);
      continue;
    }
    fail(kWhat, line_no, "unknown key '" + key + "'");
  }

  if (!saw_format) throw IoError("pose file parse error: missing format line");
  if (!saw_image) throw IoError("pose file parse error: missing image line");
  return file;
}

PoseFile load_pose_file(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return load_pose_file(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_pose_file(std::ostream& out, const PoseFile& file) {
  out << "format: " << file.format << "\n";
  out << "image: " << fmt(file.image_width) << " " << fmt(file.image_height) << "\n";
  for (const PoseRecord& rec : file.frames) {
    out << "pose: " << rec.index << " " << fmt(rec.f);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << " " << fmt(rec.pose.rotation(r, c));
    }
    for (int i = 0; i < 3; ++i) out << " " << fmt(rec.pose.translation(i));
    out << " " << frame_status_name(rec.status) << " " << (rec.reinitialized ? 1 : 0) << "\n";
  }
}

void save_pose_file(const std::string& path, const PoseFile& file) {
  std::ofstream out = open_output(path);
  save_pose_file(out, file);
}

// ---------------------------------------------------------------------------
// Metric reports.

namespace {

constexpr const char* kMetricNames[kMetricColumnCount] = {
    "iou_full", "iou_visible", "reproj_norm", "angular_deg", "translation_m", "focal_rel"};

constexpr double kMetricThresholds[kMetricColumnCount] = {
    kIoUErrorThreshold,    kIoUErrorThreshold,       kReprojErrorThreshold,
    kAngularErrorThresholdDeg, kTranslationErrorThresholdM, kFocalErrorThreshold};

}  // namespace

const char* metric_column_name(MetricColumn column) {
  return kMetricNames[static_cast<int>(column)];
}

double metric_threshold(MetricColumn column) { return kMetricThresholds[static_cast<int>(column)]; }

double metric_error_value(MetricColumn column, double value) {
  if (column == MetricColumn::iou_full || column == MetricColumn::iou_visible) {
    return 1.0 - value;
  }
  return value;
}

MetricRow::MetricRow() { values.fill(std::numeric_limits<double>::quiet_NaN()); }

MetricAggregate aggregate_metric(const MetricReport& report, MetricColumn column) {
  std::vector<double> vals;
  vals.reserve(report.rows.size());
  for (const MetricRow& row : report.rows) {
    const double v = row[column];
    if (std::isfinite(v)) vals.push_back(v);
  }

  MetricAggregate agg;
  agg.count = static_cast<int>(vals.size());
  if (vals.empty()) {
    agg.mean = agg.median = agg.auc = std::numeric_limits<double>::quiet_NaN();
    return agg;
  }

  double sum = 0.0;
  for (double v : vals) sum += v;
  agg.mean = sum / static_cast<double>(vals.size());

  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  agg.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  std::vector<double> errors;
  errors.reserve(n);
  for (double v : vals) errors.push_back(metric_error_value(column, v));
  agg.auc = auc(errors, metric_threshold(column));
  return agg;
}

MetricReport load_metric_report(std::istream& in) {
  constexpr const char* kWhat = "metric report";
  MetricReport report;
  bool saw_format = false, saw_columns = false;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    std::string key, value;
    if (!split_key_value(line, key, value)) fail(kWhat, line_no, "expected 'key: value'");
    const std::vector<std::string> toks = split_ws(value);

    if (key == "format") {
      report.format = static_cast<int>(parse_int_at(kWhat, line_no, value));
      if (report.format != 1) fail(kWhat, line_no, "unsupported format " + value);
      saw_format = true;
    } else if (key == "columns") {
      if (toks.size() != kMetricColumnCount + 1 || toks[0] != "frame") {
        fail(kWhat, line_no, "unexpected column list");
      }
      for (int c = 0; c < kMetricColumnCount; ++c) {
        if (toks[c + 1] != kMetricNames[c]) {
          fail(kWhat, line_no, "unexpected column '" + toks[c + 1] + "'");
        }
      }
      saw_columns = true;
    } else if (key == "row") {
      if (!saw_format || !saw_columns) fail(kWhat, line_no, "row before the header");
      if (toks.size() != kMetricColumnCount + 1) fail(kWhat, line_no, "wrong row width");
      MetricRow row;
      row.frame = parse_int_at(kWhat, line_no, toks[0]);
      for (int c = 0; c < kMetricColumnCount; ++c) {
        if (toks[c + 1] == "nan") {
          row.values[c] = std::numeric_limits<double>::quiet_NaN();
        } else {
          row.values[c] = parse_double_at(kWhat, line_no, toks[c + 1]);
        }
      }
      if (!report.rows.empty() && row.frame <= report.rows.back().frame) {
        fail(kWhat, line_no, "frame indices must be strictly increasing");
      }
      report.rows.push_back(row);
    } else if (key == "summary" || key == "threshold") {
      // Derived blocks; recomputed from the rows on save.
    } else {
      fail(kWhat, line_no, "unknown key '" + key + "'");
    }
  }

  if (!saw_format) throw IoError("metric report parse error: missing format line");
  return report;
}

MetricReport load_metric_report(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return load_metric_report(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_metric_report(std::ostream& out, const MetricReport& report) {
  out << "format: " << report.format << "\n";
  out << "columns: frame";
  for (const char* name : kMetricNames) out << " " << name;
  out << "\n";
  for (const MetricRow& row : report.rows) {
    out << "row: " << row.frame;
    for (double v : row.values) out << " " << (std::isfinite(v) ? fmt(v) : "nan");
    out << "\n";
  }
  for (int c = 0; c < kMetricColumnCount; ++c) {
    const MetricAggregate agg = aggregate_metric(report, static_cast<MetricColumn>(c));
    out << "summary: " << kMetricNames[c] << " count " << agg.count;
    out << " mean " << (std::isfinite(agg.mean) ? fmt(agg.mean) : "nan");
    out << " median " << (std::isfinite(agg.median) ? fmt(agg.median) : "nan");
    out << " auc " << (std::isfinite(agg.auc) ? fmt(agg.auc) : "nan") << "\n";
  }
  for (int c = 0; c < kMetricColumnCount; ++c) {
    out << "threshold: " << kMetricNames[c] << " " << fmt(kMetricThresholds[c]) << "\n";
  }
}

void save_metric_report(const std::string& path, const MetricReport& report) {
  std::ofstream out = open_output(path);
  save_metric_report(out, report);
}

MetricReport compute_metric_report(const PoseFile& estimated, const PoseFile& ground_truth,
                                   const FieldTemplate& tpl) {
  if (estimated.frames.size() != ground_truth.frames.size()) {
    throw IoError("pose files disagree on the frame count");
  }

  MetricReport report;
  report.rows.reserve(estimated.frames.size());

  for (std::size_t i = 0; i < estimated.frames.size(); ++i) {
    const PoseRecord& est = estimated.frames[i];
    const PoseRecord& gt = ground_truth.frames[i];
    if (est.index != gt.index) {
      throw IoError("pose files disagree on frame index " + std::to_string(est.index));
    }

    MetricRow row;
    row.frame = est.index;
    if (est.status == FrameStatus::registered && gt.status == FrameStatus::registered) {
      const Intrinsics k_est{est.f, estimated.image_width, estimated.image_height};
      const Intrinsics k_gt{gt.f, ground_truth.image_width, ground_truth.image_height};
      const Homography h_est = homography_from_pose(k_est, est.pose);
      const Homography h_gt = homography_from_pose(k_gt, gt.pose);

      row[MetricColumn::iou_full] = iou_full(h_gt, h_est, tpl).value;
      row[MetricColumn::iou_visible] =
          iou_visible(h_gt, h_est, tpl, k_gt.width, k_gt.height).value;
      if (const auto reproj =
              reprojection_error_normalized(k_gt, gt.pose, k_est, est.pose, tpl)) {
        row[MetricColumn::reproj_norm] = *reproj;
      }
      row[MetricColumn::angular_deg] = angular_error_deg(gt.pose.rotation, est.pose.rotation);
      row[MetricColumn::translation_m] =
          translation_error_m(gt.pose.translation, est.pose.translation);
      row[MetricColumn::focal_rel] = focal_error_rel(k_gt.f, k_est.f);
    }
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Cumulative curves.

std::vector<Vec2> cumulative_curve_points(std::vector<double> errors) {
  std::sort(errors.begin(), errors.end());
  std::vector<Vec2> pts;
  pts.reserve(errors.size());
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    pts.emplace_back(errors[i], static_cast<double>(i + 1) / n);
  }
  return pts;
}

void write_cumulative_svg(std::ostream& out, const std::string& title,
                          std::span<const CurveSeries> series, double x_max) {
  constexpr double kWidth = 640.0, kHeight = 420.0;
  constexpr double kLeft = 60.0, kRight = 20.0, kTop = 40.0, kBottom = 50.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  if (x_max <= 0.0) x_max = 1.0;

  const auto sx = [&](double x) { return kLeft + std::clamp(x / x_max, 0.0, 1.0) * plot_w; };
  const auto sy = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * plot_h; };

  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
      << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2.0) << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

  // Axes.
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\""
      << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(kTop + plot_h)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
      << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = static_cast<double>(tick) / 4.0;
    out << "<text x=\"" << fmt(sx(frac * x_max)) << "\" y=\"" << fmt(kTop + plot_h + 18.0)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(frac * x_max) << "</text>\n";
    out << "<text x=\"" << fmt(kLeft - 8.0) << "\" y=\"" << fmt(sy(frac) + 4.0)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(frac)
        << "</text>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::vector<Vec2> pts = cumulative_curve_points(series[s].errors);
    if (pts.empty()) continue;
    const char* color = kColors[s % (sizeof(kColors) / sizeof(kColors[0]))];

    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    // Staircase rendering of the empirical cumulative curve.
    out << fmt(sx(0.0)) << "," << fmt(sy(0.0));
    double prev_y = 0.0;
    for (const Vec2& p : pts) {
      out << " " << fmt(sx(p.x())) << "," << fmt(sy(prev_y));
      out << " " << fmt(sx(p.x())) << "," << fmt(sy(p.y()));
      prev_y = p.y();
    }
    out << " " << fmt(sx(x_max)) << "," << fmt(sy(prev_y));
    out << "\"/>\n";

    const double ly = kTop + 14.0 + 16.0 * static_cast<double>(s);
    out << "<rect x=\"" << fmt(kLeft + plot_w - 150.0) << "\" y=\"" << fmt(ly - 9.0)
        << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt(kLeft + plot_w - 132.0) << "\" y=\"" << fmt(ly)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Config files.

std::vector<ConfigEntry> parse_key_values(std::istream& in) {
  std::vector<ConfigEntry> entries;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    ConfigEntry entry;
    entry.line = line_no;
    if (!split_key_value(line, entry.key, entry.value) || entry.key.empty()) {
      fail("config", line_no, "expected 'key: value'");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

namespace {

// Tracks which keys were consumed so unknown and duplicate keys can error.
class ConfigReader {
 public:
  explicit ConfigReader(std::vector<ConfigEntry> entries) : entries_(std::move(entries)) {}

  std::optional<std::string> take(const std::string& key) {
    std::optional<std::string> result;
    for (const ConfigEntry& e : entries_) {
      if (e.key != key) continue;
      if (result) fail("config", e.line, "duplicate key '" + key + "'");
      result = e.value;
      used_.insert(e.line);
    }
    return result;
  }

  std::vector<std::string> take_all(const std::string& key) {
    std::vector<std::string> result;
    for (const ConfigEntry& e : entries_) {
      if (e.key != key) continue;
      result.push_back(e.value);
      used_.insert(e.line);
    }
    return result;
  }

  double take_double(const std::string& key, double fallback) {
    const auto v = take(key);
    return v ? parse_double_at("config", line_of(key), *v) : fallback;
  }

  long long take_int(const std::string& key, long long fallback) {
    const auto v = take(key);
    return v ? parse_int_at("config", line_of(key), *v) : fallback;
  }

  bool take_bool(const std::string& key, bool fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    if (*v == "0" || *v == "false") return false;
    if (*v == "1" || *v == "true") return true;
    fail("config", line_of(key), "expected a boolean for '" + key + "'");
  }

  void finish() const {
    for (const ConfigEntry& e : entries_) {
      if (!used_.count(e.line)) fail("config", e.line, "unknown key '" + e.key + "'");
    }
  }

 private:
  int line_of(const std::string& key) const {
    for (const ConfigEntry& e : entries_) {
      if (e.key == key) return e.line;
    }
    return 0;
  }

  std::vector<ConfigEntry> entries_;
  std::set<int> used_;
};

void check_probability(const char* key, double v) {
  if (v < 0.0 || v > 1.0) throw IoError(std::string("config error: ") + key + " must be in [0, 1]");
}

}  // namespace

SimulateConfig load_simulate_config(std::istream& in) {
  ConfigReader cfg(parse_key_values(in));
  SimulateConfig out;

  const auto tpl = cfg.take("template");
  if (!tpl || tpl->empty()) throw IoError("config error: missing 'template'");
  out.template_path = *tpl;

  if (const auto kind = cfg.take("trajectory")) {
    if (*kind == "static") {
      out.trajectory.kind = TrajectoryConfig::Kind::statik;
    } else if (*kind == "orbit") {
      out.trajectory.kind = TrajectoryConfig::Kind::orbit;
    } else if (*kind == "waypoints") {
      out.trajectory.kind = TrajectoryConfig::Kind::waypoints;
    } else {
      throw IoError("config error: unknown trajectory '" + *kind + "'");
    }
  }

  out.trajectory.frames = static_cast<int>(cfg.take_int("frames", out.trajectory.frames));
  out.trajectory.fps = cfg.take_double("fps", out.trajectory.fps);
  out.trajectory.image_width = cfg.take_double("image_width", out.trajectory.image_width);
  out.trajectory.image_height = cfg.take_double("image_height", out.trajectory.image_height);
  out.trajectory.orbit_radius_m = cfg.take_double("orbit_radius_m", out.trajectory.orbit_radius_m);
  out.trajectory.orbit_height_m = cfg.take_double("orbit_height_m", out.trajectory.orbit_height_m);
  out.trajectory.orbit_speed_deg_s =
      cfg.take_double("orbit_speed_deg_s", out.trajectory.orbit_speed_deg_s);
  out.trajectory.orbit_start_deg =
      cfg.take_double("orbit_start_deg", out.trajectory.orbit_start_deg);
  out.trajectory.focal_start_px = cfg.take_double("focal_start_px", out.trajectory.focal_start_px);
  out.trajectory.focal_end_px = cfg.take_double("focal_end_px", out.trajectory.focal_end_px);
  out.trajectory.min_visible_fraction =
      cfg.take_double("min_visible_fraction", out.trajectory.min_visible_fraction);

  for (const std::string& wp : cfg.take_all("waypoint")) {
    const std::vector<std::string> toks = split_ws(wp);
    if (toks.size() != 3) throw IoError("config error: waypoint needs 'x y z'");
    out.trajectory.waypoints.emplace_back(parse_double_at("config", 0, toks[0]),
                                          parse_double_at("config", 0, toks[1]),
                                          parse_double_at("config", 0, toks[2]));
  }
  for (const std::string& lt : cfg.take_all("look_target")) {
    const std::vector<std::string> toks = split_ws(lt);
    if (toks.size() != 2) throw IoError("config error: look_target needs 'x y'");
    out.trajectory.look_targets.emplace_back(parse_double_at("config", 0, toks[0]),
                                             parse_double_at("config", 0, toks[1]));
  }

  out.players.count = static_cast<int>(cfg.take_int("players", out.players.count));
  out.players.speed_mps = cfg.take_double("player_speed_mps", out.players.speed_mps);
  out.players.max_speed_mps = cfg.take_double("player_max_speed_mps", out.players.max_speed_mps);

  out.noise.sigma_px = cfg.take_double("sigma_px", out.noise.sigma_px);
  out.noise.sigma_player_px = cfg.take_double("sigma_player_px", out.noise.sigma_player_px);
  out.noise.dropout_prob = cfg.take_double("dropout_prob", out.noise.dropout_prob);
  out.noise.outlier_prob = cfg.take_double("outlier_prob", out.noise.outlier_prob);
  out.noise.outlier_offset_px = cfg.take_double("outlier_offset_px", out.noise.outlier_offset_px);
  out.noise.id_swap_prob = cfg.take_double("id_swap_prob", out.noise.id_swap_prob);
  out.noise.player_false_positive_rate =
      cfg.take_double("player_false_positive_rate", out.noise.player_false_positive_rate);

  out.seed = static_cast<std::uint64_t>(cfg.take_int("seed", static_cast<long long>(out.seed)));
  cfg.finish();

  if (out.trajectory.frames <= 0) throw IoError("config error: frames must be positive");
  if (out.trajectory.fps <= 0.0) throw IoError("config error: fps must be positive");
  if (out.players.count < 0) throw IoError("config error: players must be non-negative");
  if (out.noise.sigma_px < 0.0 || out.noise.sigma_player_px < 0.0) {
    throw IoError("config error: noise sigmas must be non-negative");
  }
  check_probability("dropout_prob", out.noise.dropout_prob);
  check_probability("outlier_prob", out.noise.outlier_prob);
  check_probability("id_swap_prob", out.noise.id_swap_prob);
  if (out.noise.player_false_positive_rate < 0.0) {
    throw IoError("config error: player_false_positive_rate must be non-negative");
  }
  return out;
}

SimulateConfig load_simulate_config(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return load_simulate_config(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

PipelineConfig load_register_config(std::istream& in) {
  ConfigReader cfg(parse_key_values(in));
  PipelineConfig out;

  out.filter.particle_count =
      static_cast<int>(cfg.take_int("particles", out.filter.particle_count));
  out.filter.sigma_s_px = cfg.take_double("sigma_semantic_px", out.filter.sigma_s_px);
  out.filter.sigma_p_px = cfg.take_double("sigma_player_px", out.filter.sigma_p_px);
  out.filter.alpha = cfg.take_double("alpha", out.filter.alpha);
  out.filter.sigma_rot_deg = cfg.take_double("sigma_rot_deg", out.filter.sigma_rot_deg);
  out.filter.sigma_trans_m = cfg.take_double("sigma_trans_m", out.filter.sigma_trans_m);
  out.filter.intrinsics_window =
      static_cast<int>(cfg.take_int("intrinsics_window", out.filter.intrinsics_window));
  out.filter.reinit_radius_px = cfg.take_double("reinit_radius_px", out.filter.reinit_radius_px);

  out.ransac.threshold_px = cfg.take_double("ransac_threshold_px", out.ransac.threshold_px);
  out.ransac.confidence = cfg.take_double("ransac_confidence", out.ransac.confidence);
  out.ransac.max_iters = static_cast<int>(cfg.take_int("ransac_max_iters", out.ransac.max_iters));

  out.player_gate_m = cfg.take_double("player_gate_m", out.player_gate_m);
  out.player_margin_m = cfg.take_double("player_margin_m", out.player_margin_m);
  out.use_filter = cfg.take_bool("use_filter", out.use_filter);
  out.use_players = cfg.take_bool("use_players", out.use_players);
  out.seed = static_cast<std::uint64_t>(cfg.take_int("seed", static_cast<long long>(out.seed)));
  cfg.finish();

  if (out.filter.particle_count <= 0) throw IoError("config error: particles must be positive");
  if (out.filter.alpha < 0.0 || out.filter.alpha > 1.0) {
    throw IoError("config error: alpha must be in [0, 1]");
  }
  if (out.filter.sigma_s_px <= 0.0 || out.filter.sigma_p_px <= 0.0) {
    throw IoError("config error: observation sigmas must be positive");
  }
  if (out.ransac.threshold_px <= 0.0) {
    throw IoError("config error: ransac_threshold_px must be positive");
  }
  if (out.ransac.confidence <= 0.0 || out.ransac.confidence >= 1.0) {
    throw IoError("config error: ransac_confidence must be in (0, 1)");
  }
  return out;
}

PipelineConfig load_register_config(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return load_register_config(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace fieldcal
