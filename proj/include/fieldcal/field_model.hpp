#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldcal/geometry.hpp"
#include "fieldcal/polygon.hpp"
#include "fieldcal/types.hpp"

namespace fieldcal {

struct TemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Planar field model: named keypoints on the ground plane (z = 0, meters), the
// playing-surface boundary, line segments for rendering, and the pairing of
// keypoints under a 180-degree rotation about `center`.
struct FieldTemplate {
  std::string name;
  Vec2 center = Vec2::Zero();
  std::map<KeypointId, Vec2> keypoints;            // ids dense in [1, J]
  Polygon boundary;                                // simple polygon
  std::vector<std::array<Vec2, 2>> lines;
  std::map<KeypointId, KeypointId> symmetry_map;   // involution; may be empty

  std::size_t keypoint_count() const { return keypoints.size(); }
  bool has_keypoint(KeypointId id) const { return keypoints.count(id) > 0; }
  const Vec2& keypoint(KeypointId id) const;

  // Keypoint positions ordered by id.
  std::vector<Vec2> keypoint_positions() const;
};

// Throws TemplateError when any structural invariant fails: ids not dense in
// [1, J], fewer than 4 or collinear keypoints, a non-simple boundary, or a
// symmetry map that is not an involution consistent with the 180-degree
// rotation about the center (within 1e-9 m).
void validate_template(const FieldTemplate& tpl);

FieldTemplate load_template(std::istream& in);
FieldTemplate load_template_file(const std::string& path);
void save_template(const FieldTemplate& tpl, std::ostream& out);
void save_template_file(const FieldTemplate& tpl, const std::string& path);

// Replaces each semantic correspondence with its symmetric partner (id and
// world point); player correspondences pass through unchanged. Applying the
// operation twice returns the input. Throws TemplateError for semantic ids
// without a symmetry partner.
std::vector<Correspondence> swap_symmetric_identities(
    const FieldTemplate& tpl, std::span<const Correspondence> corrs);

// Player ground positions for one frame (meters). Valid positions lie within
// the boundary polygon dilated by a margin (default 5 m).
using PlayerPositions = std::vector<Vec2>;

bool player_positions_valid(const FieldTemplate& tpl, const PlayerPositions& players,
                            double margin_m = 5.0);

}  // namespace fieldcal
