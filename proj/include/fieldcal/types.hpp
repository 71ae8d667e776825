#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace fieldcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Identifier of a semantic field keypoint. Ids are dense in [1, J] for a
// template with J keypoints; 0 is reserved for detections without identity.
using KeypointId = std::uint32_t;

}  // namespace fieldcal
