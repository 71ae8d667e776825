#include "fieldcal/field_model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fieldcal/textio.hpp"

namespace fieldcal {

namespace {

using textio::fmt;
using textio::parse_double;
using textio::parse_int;

[[noreturn]] void parse_fail(int line_no, const std::string& what) {
  std::ostringstream msg;
  msg << "template parse error (line " << line_no << "): " << what;
  throw TemplateError(msg.str());
}

KeypointId parse_keypoint_id(const std::string& tok, int line_no) {
  long long v = 0;
  try {
    v = parse_int(tok);
  } catch (const std::invalid_argument& e) {
    parse_fail(line_no, e.what());
  }
  if (v < 0 || v > 0xffffffffLL) parse_fail(line_no, "keypoint id out of range");
  return static_cast<KeypointId>(v);
}

}  // namespace

const Vec2& FieldTemplate::keypoint(KeypointId id) const {
  const auto it = keypoints.find(id);
  if (it == keypoints.end()) {
    throw TemplateError("unknown keypoint id " + std::to_string(id));
  }
  return it->second;
}

std::vector<Vec2> FieldTemplate::keypoint_positions() const {
  std::vector<Vec2> out;
  out.reserve(keypoints.size());
  for (const auto& [id, p] : keypoints) out.push_back(p);
  return out;
}

void validate_template(const FieldTemplate& tpl) {
  if (tpl.name.empty()) throw TemplateError("template has no name");
  const std::size_t j = tpl.keypoints.size();
  if (j < 4) throw TemplateError("template needs at least 4 keypoints");
  if (tpl.keypoints.count(0) > 0) throw TemplateError("keypoint id 0 is reserved");
  if (tpl.keypoints.rbegin()->first != j) {
    throw TemplateError("keypoint ids must be dense in [1, J]");
  }

  Vec2 mean = Vec2::Zero();
  for (const auto& [id, p] : tpl.keypoints) mean += p;
  mean /= static_cast<double>(j);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& [id, p] : tpl.keypoints) {
    const Vec2 d = p - mean;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double lo = std::max(eig.eigenvalues()(0), 0.0);
  const double hi = std::max(eig.eigenvalues()(1), 0.0);
  if (std::sqrt(lo) <= 1e-9 * std::max(std::sqrt(hi), 1e-12)) {
    throw TemplateError("keypoints are collinear");
  }

  if (tpl.boundary.size() < 3) throw TemplateError("boundary needs at least 3 vertices");
  if (!polygon_is_simple(tpl.boundary)) throw TemplateError("boundary is not a simple polygon");
  if (polygon_area(tpl.boundary) <= 1e-9) throw TemplateError("boundary has no area");

  for (const auto& [a, b] : tpl.symmetry_map) {
    if (!tpl.has_keypoint(a) || !tpl.has_keypoint(b)) {
      throw TemplateError("symmetry pair references unknown keypoint");
    }
    const auto back = tpl.symmetry_map.find(b);
    if (back == tpl.symmetry_map.end() || back->second != a) {
      throw TemplateError("symmetry map is not an involution");
    }
    const Vec2 rotated = 2.0 * tpl.center - tpl.keypoint(a);
    if ((rotated - tpl.keypoint(b)).norm() > 1e-9) {
      throw TemplateError("symmetry pair " + std::to_string(a) + "-" + std::to_string(b) +
                          " is not a 180-degree rotation about the center");
    }
  }
}

FieldTemplate load_template(std::istream& in) {
  FieldTemplate tpl;
  enum class Section { header, keypoints, boundary, lines, symmetry };
  Section section = Section::header;
  bool saw_format = false;
  bool saw_units = false;
  bool saw_center = false;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = textio::trim(textio::strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, "malformed section header");
      const std::string_view name = line.substr(1, line.size() - 2);
      if (name == "keypoints") section = Section::keypoints;
      else if (name == "boundary") section = Section::boundary;
      else if (name == "lines") section = Section::lines;
      else if (name == "symmetry") section = Section::symmetry;
      else parse_fail(line_no, "unknown section '" + std::string(name) + "'");
      continue;
    }

    const auto toks = textio::split_ws(line);
    try {
      switch (section) {
        case Section::header: {
          const auto colon = line.find(':');
          if (colon == std::string_view::npos) parse_fail(line_no, "expected 'key: value'");
          const std::string key(textio::trim(line.substr(0, colon)));
          const std::string value(textio::trim(line.substr(colon + 1)));
          if (key == "format") {
            if (parse_int(value) != 1) parse_fail(line_no, "unsupported format version");
            saw_format = true;
          } else if (key == "units") {
            if (value != "meters") parse_fail(line_no, "units must be meters");
            saw_units = true;
          } else if (key == "name") {
            tpl.name = value;
          } else if (key == "center") {
            const auto ctoks = textio::split_ws(value);
            if (ctoks.size() != 2) parse_fail(line_no, "center needs two values");
            tpl.center = Vec2(parse_double(ctoks[0]), parse_double(ctoks[1]));
            saw_center = true;
          } else {
            parse_fail(line_no, "unknown header key '" + key + "'");
          }
          break;
        }
        case Section::keypoints: {
          if (toks.size() != 3) parse_fail(line_no, "keypoint needs 'id x y'");
          const KeypointId id = parse_keypoint_id(toks[0], line_no);
          const Vec2 p(parse_double(toks[1]), parse_double(toks[2]));
          if (!tpl.keypoints.emplace(id, p).second) {
            parse_fail(line_no, "duplicate keypoint id " + toks[0]);
          }
          break;
        }
        case Section::boundary: {
          if (toks.size() != 2) parse_fail(line_no, "boundary vertex needs 'x y'");
          tpl.boundary.emplace_back(parse_double(toks[0]), parse_double(toks[1]));
          break;
        }
        case Section::lines: {
          if (toks.size() != 4) parse_fail(line_no, "line needs 'x1 y1 x2 y2'");
          tpl.lines.push_back({Vec2(parse_double(toks[0]), parse_double(toks[1])),
                               Vec2(parse_double(toks[2]), parse_double(toks[3]))});
          break;
        }
        case Section::symmetry: {
          if (toks.size() != 2) parse_fail(line_no, "symmetry pair needs 'id id'");
          const KeypointId a = parse_keypoint_id(toks[0], line_no);
          const KeypointId b = parse_keypoint_id(toks[1], line_no);
          const auto ita = tpl.symmetry_map.find(a);
          const auto itb = tpl.symmetry_map.find(b);
          if ((ita != tpl.symmetry_map.end() && ita->second != b) ||
              (itb != tpl.symmetry_map.end() && itb->second != a)) {
            parse_fail(line_no, "conflicting symmetry pair");
          }
          tpl.symmetry_map[a] = b;
          tpl.symmetry_map[b] = a;
          break;
        }
      }
    } catch (const std::invalid_argument& e) {
      parse_fail(line_no, e.what());
    }
  }

  if (!saw_format) throw TemplateError("template is missing 'format: 1'");
  if (!saw_units) throw TemplateError("template is missing 'units: meters'");
  if (!saw_center) throw TemplateError("template is missing 'center: x y'");
  validate_template(tpl);
  return tpl;
}

FieldTemplate load_template_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TemplateError("cannot open template file '" + path + "'");
  return load_template(in);
}

void save_template(const FieldTemplate& tpl, std::ostream& out) {
  out << "format: 1\n"
      << "units: meters\n"
      << "name: " << tpl.name << "\n"
      << "center: " << fmt(tpl.center.x()) << " " << fmt(tpl.center.y()) << "\n";
  out << "\n[keypoints]\n";
  for (const auto& [id, p] : tpl.keypoints) {
    out << id << " " << fmt(p.x()) << " " << fmt(p.y()) << "\n";
  }
  out << "\n[boundary]\n";
  for (const Vec2& p : tpl.boundary) {
    out << fmt(p.x()) << " " << fmt(p.y()) << "\n";
  }
  if (!tpl.lines.empty()) {
    out << "\n[lines]\n";
    for (const auto& seg : tpl.lines) {
      out << fmt(seg[0].x()) << " " << fmt(seg[0].y()) << " "
          << fmt(seg[1].x()) << " " << fmt(seg[1].y()) << "\n";
    }
  }
  if (!tpl.symmetry_map.empty()) {
    out << "\n[symmetry]\n";
    for (const auto& [a, b] : tpl.symmetry_map) {
      if (a <= b) out << a << " " << b << "\n";
    }
  }
}

void save_template_file(const FieldTemplate& tpl, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TemplateError("cannot write template file '" + path + "'");
  save_template(tpl, out);
}

std::vector<Correspondence> swap_symmetric_identities(
    const FieldTemplate& tpl, std::span<const Correspondence> corrs) {
  std::vector<Correspondence> out;
  out.reserve(corrs.size());
  for (const Correspondence& c : corrs) {
    if (c.source != PointSource::semantic) {
      out.push_back(c);
      continue;
    }
    const auto it = tpl.symmetry_map.find(c.id);
    if (it == tpl.symmetry_map.end()) {
      throw TemplateError("keypoint " + std::to_string(c.id) + " has no symmetry partner");
    }
    Correspondence swapped = c;
    swapped.id = it->second;
    swapped.world = tpl.keypoint(it->second);
    out.push_back(swapped);
  }
  return out;
}

bool player_positions_valid(const FieldTemplate& tpl, const PlayerPositions& players,
                            double margin_m) {
  for (const Vec2& p : players) {
    if (!point_in_dilated_polygon(tpl.boundary, p, margin_m)) return false;
  }
  return true;
}

}  // namespace fieldcal
