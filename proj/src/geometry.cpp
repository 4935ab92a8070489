#include "iabsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "iabsim/errors.hpp"
#include "iabsim/random.hpp"

namespace iabsim {

double distance_2d(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double distance_3d(const Position& a, const Position& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

bool Scenario::is_outdoor(double x, double y) const {
  if (!bounds.contains(x, y)) return false;
  return std::none_of(buildings.begin(), buildings.end(),
                      [&](const Building& b) { return b.footprint.contains(x, y); });
}

double Scenario::outdoor_area() const {
  double built = 0.0;
  for (const auto& b : buildings) built += b.footprint.area();
  return bounds.area() - built;
}

Scenario build_manhattan_grid(double block_side, double street_width, int rows, int cols,
                              double building_height) {
  if (!(block_side > 0) || !(street_width > 0) || rows <= 0 || cols <= 0 || !(building_height > 0)) {
    throw ConfigError(fmt::format(
        "manhattan grid needs positive dimensions (block {}, street {}, rows {}, cols {}, height {})",
        block_side, street_width, rows, cols, building_height));
  }
  Scenario s;
  s.block_side = block_side;
  s.street_width = street_width;

  // A lone block gets a street on every side; otherwise streets only run
  // between blocks.
  const bool single = rows == 1 && cols == 1;
  const double margin = single ? street_width : 0.0;
  const double pitch = block_side + street_width;
  const double width = cols * block_side + (cols - 1) * street_width + 2 * margin;
  const double height = rows * block_side + (rows - 1) * street_width + 2 * margin;
  s.bounds = Rect{0.0, 0.0, width, height};

  s.buildings.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double x0 = margin + c * pitch;
      const double y0 = margin + r * pitch;
      s.buildings.push_back(Building{Rect{x0, y0, x0 + block_side, y0 + block_side}, building_height});
    }
  }
  return s;
}

Placement place_nodes(const Scenario& scenario, int n_relays, int n_ues, std::uint64_t seed,
                      const NodeHeights& heights, double relay_distance) {
  if (n_relays < 0 || n_relays > kMaxRelays) {
    throw ConfigError(fmt::format("n_relays must be in 0..{}, got {}", kMaxRelays, n_relays));
  }
  if (n_ues < 0) throw ConfigError(fmt::format("n_ues must be non-negative, got {}", n_ues));
  if (heights.gnb < 0 || heights.ue < 0) throw ConfigError("node heights must be non-negative");

  const Rect& b = scenario.bounds;
  Placement p;
  p.donor = Position{(b.min_x + b.max_x) / 2, (b.min_y + b.max_y) / 2, heights.gnb};

  constexpr double kDir[kMaxRelays][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int i = 0; i < n_relays; ++i) {
    Position r{p.donor.x + kDir[i][0] * relay_distance, p.donor.y + kDir[i][1] * relay_distance,
               heights.gnb};
    if (!b.contains(r.x, r.y)) {
      throw ConfigError(fmt::format("relay ring of radius {} m does not fit in a {} x {} m scenario",
                                    relay_distance, b.width(), b.height()));
    }
    p.relays.push_back(r);
  }

  if (n_ues > 0 && !(scenario.outdoor_area() > 0)) {
    throw ConfigError("scenario has no outdoor area to place UEs");
  }
  auto rng = make_substream(seed, "placement");
  std::uniform_real_distribution<double> ux(b.min_x, b.max_x);
  std::uniform_real_distribution<double> uy(b.min_y, b.max_y);
  p.ues.reserve(static_cast<std::size_t>(n_ues));
  for (int i = 0; i < n_ues; ++i) {
    double x = 0;
    double y = 0;
    do {
      x = ux(rng);
      y = uy(rng);
    } while (!scenario.is_outdoor(x, y));
    p.ues.push_back(Position{x, y, heights.ue});
  }
  return p;
}

std::optional<std::pair<double, double>> clip_segment(const Rect& rect, const Position& a,
                                                      const Position& b) {
  // Liang-Barsky.
  double t0 = 0.0;
  double t1 = 1.0;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - rect.min_x, rect.max_x - a.x, a.y - rect.min_y, rect.max_y - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return std::nullopt;
  }
  return std::pair{t0, t1};
}

bool is_los(const Scenario& scenario, const Position& a, const Position& b) {
  for (const auto& building : scenario.buildings) {
    const auto span = clip_segment(building.footprint, a, b);
    if (!span) continue;
    // Height is linear along the segment, so its minimum over the crossing
    // sits at one of the two ends.
    const double z0 = a.z + span->first * (b.z - a.z);
    const double z1 = a.z + span->second * (b.z - a.z);
    if (std::min(z0, z1) < building.height) return false;
  }
  return true;
}

}  // namespace iabsim
