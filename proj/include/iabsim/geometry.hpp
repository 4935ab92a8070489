#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace iabsim {

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;  // height above ground
  bool operator==(const Position&) const = default;
};

double distance_2d(const Position& a, const Position& b);
double distance_3d(const Position& a, const Position& b);

/// Axis-aligned rectangle in the ground plane. Boundaries are inclusive.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }
  bool contains(double x, double y) const {
    return x >= min_x && x <= max_x && y >= min_y && y <= max_y;
  }
  bool operator==(const Rect&) const = default;
};

struct Building {
  Rect footprint;
  double height = 0.0;
};

struct Scenario {
  std::vector<Building> buildings;
  Rect bounds;
  double street_width = 0.0;
  double block_side = 0.0;

  /// True when (x, y) is inside the bounds and outside every footprint.
  bool is_outdoor(double x, double y) const;
  double outdoor_area() const;
};

/// Regular grid of rows x cols square blocks separated by streets. The grid
/// has no outer ring of streets unless it is a single block, so that a 4x4
/// grid of 50 m blocks with 10 m streets covers 230 m x 230 m.
Scenario build_manhattan_grid(double block_side, double street_width, int rows, int cols,
                              double building_height = 15.0);

struct NodeHeights {
  double gnb = 10.0;
  double ue = 1.6;
};

struct Placement {
  Position donor;
  std::vector<Position> relays;  // east, north, west, south
  std::vector<Position> ues;
};

inline constexpr int kMaxRelays = 4;

/// Donor at the scenario center, relays on the cardinal ring of radius
/// `relay_distance`, UEs uniform over the street area. UE positions depend
/// only on (scenario, n_ues, seed), not on the relay count.
Placement place_nodes(const Scenario& scenario, int n_relays, int n_ues, std::uint64_t seed,
                      const NodeHeights& heights = {}, double relay_distance = 85.0);

/// Parametric interval [t0, t1] of the 2-D segment a->b that lies inside
/// `rect`, or nothing if the segment misses it.
std::optional<std::pair<double, double>> clip_segment(const Rect& rect, const Position& a,
                                                      const Position& b);

/// Line of sight: the segment is blocked by a building when, somewhere over
/// the building's footprint, the segment passes below the roof.
bool is_los(const Scenario& scenario, const Position& a, const Position& b);

}  // namespace iabsim
