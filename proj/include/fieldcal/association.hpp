#pragma once

#include <span>
#include <vector>

#include "fieldcal/field_model.hpp"
#include "fieldcal/geometry.hpp"
#include "fieldcal/types.hpp"

namespace fieldcal {

// A single image observation: either a semantic keypoint with identity or an
// anonymous player foot point.
struct Detection {
  enum class Kind { semantic, player };

  Kind kind = Kind::semantic;
  KeypointId id = 0;  // semantic detections only
  Vec2 image = Vec2::Zero();
  double confidence = 1.0;
};

// Pairs semantic detections with template keypoints by identity. Duplicate
// ids keep the highest-confidence detection (ties: smallest input index).
// Detections with ids missing from the template are skipped; the optional
// counter reports how many were dropped.
std::vector<Correspondence> match_semantic(std::span<const Detection> detections,
                                           const FieldTemplate& tpl,
                                           int* skipped_unknown = nullptr);

// Back-projects player detections to the ground plane through h0's inverse
// and greedily assigns them one-to-one to known player positions in ascending
// distance order. Pairs farther apart than max_dist_m are dropped. The result
// is invariant to the input ordering of detections and positions.
std::vector<Correspondence> associate_players(const Homography& h0,
                                              std::span<const Detection> player_detections,
                                              std::span<const Vec2> player_positions,
                                              double max_dist_m);

// Re-estimates the homography over semantic plus player correspondences.
// Minimal samples always contain at least two semantic points (players never
// form a hypothesis alone). The inlier mask covers the concatenation
// [semantic..., players...].
RansacResult refine_homography_with_players(std::span<const Correspondence> semantic,
                                            std::span<const Correspondence> players,
                                            const RansacConfig& cfg);

}  // namespace fieldcal
