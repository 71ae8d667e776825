#include "fieldcal/association.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace fieldcal {

std::vector<Correspondence> match_semantic(std::span<const Detection> detections,
                                           const FieldTemplate& tpl,
                                           int* skipped_unknown) {
  // Best detection per id; ties on confidence keep the earliest detection.
  std::map<KeypointId, const Detection*> best;
  int skipped = 0;
  for (const Detection& d : detections) {
    if (d.kind != Detection::Kind::semantic) continue;
    if (!tpl.has_keypoint(d.id)) {
      ++skipped;
      continue;
    }
    const auto it = best.find(d.id);
    if (it == best.end() || d.confidence > it->second->confidence) {
      best[d.id] = &d;
    }
  }
  if (skipped_unknown) *skipped_unknown = skipped;

  std::vector<Correspondence> out;
  out.reserve(best.size());
  for (const auto& [id, det] : best) {
    Correspondence c;
    c.world = tpl.keypoint(id);
    c.image = det->image;
    c.source = PointSource::semantic;
    c.id = id;
    out.push_back(c);
  }
  return out;
}

std::vector<Correspondence> associate_players(const Homography& h0,
                                              std::span<const Detection> player_detections,
                                              std::span<const Vec2> player_positions,
                                              double max_dist_m) {
  struct Candidate {
    double dist;
    // Geometric tie-breakers keep the greedy pass independent of input order.
    double px, py, ix, iy;
    std::size_t det;
    std::size_t pos;
  };

  const Homography h_inv = h0.inverse();
  std::vector<std::optional<Vec2>> ground(player_detections.size());
  for (std::size_t i = 0; i < player_detections.size(); ++i) {
    if (player_detections[i].kind != Detection::Kind::player) continue;
    ground[i] = h_inv.try_map(player_detections[i].image);
  }

  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < player_detections.size(); ++i) {
    if (!ground[i]) continue;
    for (std::size_t j = 0; j < player_positions.size(); ++j) {
      const double d = (*ground[i] - player_positions[j]).norm();
      if (d > max_dist_m) continue;
      candidates.push_back({d, player_positions[j].x(), player_positions[j].y(),
                            player_detections[i].image.x(),
                            player_detections[i].image.y(), i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist, a.px, a.py, a.ix, a.iy) <
           std::tie(b.dist, b.px, b.py, b.ix, b.iy);
  });

  std::vector<bool> det_used(player_detections.size(), false);
  std::vector<bool> pos_used(player_positions.size(), false);
  std::vector<Correspondence> out;
  for (const Candidate& c : candidates) {
    if (det_used[c.det] || pos_used[c.pos]) continue;
    det_used[c.det] = true;
    pos_used[c.pos] = true;
    Correspondence corr;
    corr.world = player_positions[c.pos];
    corr.image = player_detections[c.det].image;
    corr.source = PointSource::player;
    corr.id = 0;
    out.push_back(corr);
  }

  // Deterministic output order regardless of match discovery order.
  std::sort(out.begin(), out.end(), [](const Correspondence& a, const Correspondence& b) {
    return std::tie(a.world.x(), a.world.y(), a.image.x(), a.image.y()) <
           std::tie(b.world.x(), b.world.y(), b.image.x(), b.image.y());
  });
  return out;
}

RansacResult refine_homography_with_players(std::span<const Correspondence> semantic,
                                            std::span<const Correspondence> players,
                                            const RansacConfig& cfg) {
  std::vector<Correspondence> all;
  all.reserve(semantic.size() + players.size());
  all.insert(all.end(), semantic.begin(), semantic.end());
  all.insert(all.end(), players.begin(), players.end());
  if (all.size() < 4) throw DegenerateConfiguration("insufficient correspondences");

  RansacConfig rcfg = cfg;
  rcfg.min_semantic_in_sample =
      std::min<int>(2, static_cast<int>(semantic.size()));
  return estimate_homography_ransac(all, rcfg);
}

}  // namespace fieldcal
