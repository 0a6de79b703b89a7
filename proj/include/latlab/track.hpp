#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "latlab/types.hpp"

namespace latlab::track {

struct TrackError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Generator parameters imply curvature the plant cannot steer.
struct FeasibilityError : TrackError {
    using TrackError::TrackError;
};

/// Reference centerline. Arrays are index-aligned; `cumulative_distance`
/// starts at 0 and is strictly increasing; `total_length` includes the
/// closing segment on closed tracks.
struct ReferencePath {
    std::vector<Vec2> waypoints;
    std::vector<double> headings;             ///< rad
    std::vector<double> velocities;           ///< m/s
    std::vector<double> cumulative_distance;  ///< m
    std::vector<double> curvatures;           ///< 1/m, signed (left turn positive)
    bool closed = false;
    double total_length = 0.0;

    std::size_t size() const { return waypoints.size(); }
};

/// (s, d): arc length along the path and signed lateral offset, left positive.
struct FrenetCoord {
    double s = 0.0;
    double d = 0.0;
};

struct DesiredWaypoint {
    Vec2 position;
    double heading = 0.0;
    double velocity = 0.0;
    double s_query = 0.0;  ///< the ego's longitudinal Frenet coordinate s_k
    int index = 0;
};

enum class SegmentClass { Straight, Turn };

constexpr double kDefaultSpacing = 1.0;            // m
constexpr double kTurnCurvatureThreshold = 0.03;   // 1/m
constexpr double kDefaultReferenceVelocity = 10.0; // m/s

/// Build a path from a raw polyline: resample to uniform ~`spacing`,
/// then populate headings, cumulative distance and curvature.
ReferencePath build_path(const std::vector<Vec2>& raw, bool closed,
                         double spacing = kDefaultSpacing,
                         double velocity = kDefaultReferenceVelocity);

/// Load from a CSV with header `x,y`, or from a generator spec string such
/// as "oval:r=30,straight=200" when `source` names no readable file.
ReferencePath load_track(const std::string& source);

ReferencePath load_track_csv(const std::string& path);

ReferencePath generate_oval(double r, double straight, double spacing = kDefaultSpacing);
ReferencePath generate_figure_eight(double r, double spacing = kDefaultSpacing);
ReferencePath generate_chicane(double r, double straight, double amplitude, int cycles,
                               double spacing = kDefaultSpacing);
ReferencePath generate_random_circuit(std::uint64_t seed, double radius = 70.0,
                                      double spacing = kDefaultSpacing);
ReferencePath generate_straight(double length, double spacing = kDefaultSpacing);

/// Project p onto the piecewise-linear path. Nearest segment by
/// perpendicular distance, ties to smaller s.
FrenetCoord frenet_coordinate(const ReferencePath& path, const Vec2& p);

/// First waypoint strictly ahead of the ego's s (wraps on closed tracks).
/// Empty when an open track has been exhausted.
std::optional<DesiredWaypoint> desired_waypoint(const ReferencePath& path, const EgoState& ego);

std::vector<SegmentClass> classify_segments(const ReferencePath& path,
                                            double threshold = kTurnCurvatureThreshold);

inline SegmentClass classify_curvature(double kappa, double threshold = kTurnCurvatureThreshold) {
    return std::abs(kappa) < threshold ? SegmentClass::Straight : SegmentClass::Turn;
}

/// Position/heading at arc length s by linear interpolation (wraps on
/// closed tracks). Used to spawn the ego on the centerline.
void pose_at(const ReferencePath& path, double s, Vec2& position, double& heading);

}  // namespace latlab::track
