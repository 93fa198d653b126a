#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "avtrack/vehicle_model.h"

namespace avtrack {

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double v_ref = 0.0;  // m/s, >= 0
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Which vehicle reference point the tracking errors are measured from.
enum class Frame { kCog, kFrontAxle, kRearAxle };

Point2 FramePoint(const VehicleState& state, Frame frame, const VehicleParams& params);

struct NearestResult {
  Waypoint point;        // interpolated foot point on the nearest segment
  std::size_t index = 0; // start waypoint of that segment
  double t = 0.0;        // fraction along the segment, [0, 1]
  double distance = 0.0;
  double s = 0.0;        // arc length of the foot point
  double tangent = 0.0;  // path heading at the foot point
};

enum class LookaheadStatus {
  kIntersection,  // point lies on the circle of radius d_l
  kFallback,      // circle does not reach the track; next waypoint used
  kEndOfTrack,    // finite track exhausted; clamped to the final waypoint
};

struct LookaheadResult {
  Point2 point;
  double alpha = 0.0;  // angle from heading to the lookahead line, left positive
  std::size_t index = 0;
  LookaheadStatus status = LookaheadStatus::kIntersection;
};

/// Cross-track is positive when the reference lies to the left of the heading.
struct TrackingErrors {
  double cross_track = 0.0;
  double heading = 0.0;  // wrap(path tangent - theta)
  double speed = 0.0;    // v_ref - v
  std::size_t nearest_index = 0;
};

/// Ordered waypoint polyline, immutable after construction.
class Track {
 public:
  /// Throws InvalidInput with fewer than 2 points, non-finite values, negative
  /// v_ref or consecutive points closer than 1e-6 m.
  Track(std::vector<Waypoint> points, bool closed);

  const std::vector<Waypoint>& points() const { return points_; }
  bool closed() const { return closed_; }
  std::size_t size() const { return points_.size(); }
  std::size_t num_segments() const { return closed_ ? points_.size() : points_.size() - 1; }
  double length() const { return cumulative_.back(); }
  double ArcLengthAt(std::size_t index) const { return cumulative_[index]; }

  NearestResult Nearest(Point2 p) const;

  /// Interpolated waypoint and path heading at arc length s. Closed tracks wrap;
  /// finite tracks clamp to the ends.
  Waypoint SampleAt(double s, double* tangent = nullptr) const;

  /// Signed curvature from the change of the midpoint-interpolated tangent
  /// over +/- half_window.
  double CurvatureAt(double s, double half_window = 1.0) const;

  /// Lookahead point for a rear-axle position with the given heading.
  LookaheadResult Lookahead(Point2 rear_axle, double heading, double lookahead_dist) const;

  /// Projection parameter of p onto the final segment without clamping; values
  /// above 1 mean the final waypoint has been passed.
  double FinalSegmentParam(Point2 p) const;

 private:
  std::size_t SegmentEnd(std::size_t i) const { return (i + 1) % points_.size(); }
  double SmoothTangent(double s) const;

  std::vector<Waypoint> points_;
  std::vector<double> cumulative_;  // arc length at each waypoint, plus closing length
  bool closed_;
};

NearestResult NearestPoint(const Track& track, Point2 position);
LookaheadResult LookaheadPoint(const Track& track, Point2 rear_axle, double heading,
                               double lookahead_dist);
TrackingErrors ComputeTrackingErrors(const Track& track, const VehicleState& state, Frame frame,
                                     const VehicleParams& params);

// Generators; waypoint spacing is approximate, at most `spacing` metres.
Track MakeStraightTrack(double length, double v_ref, double spacing = 0.5);
Track MakeCircleTrack(double radius, double v_ref, double spacing = 0.5);
/// Stadium: straight east from the origin, 180 degree left arc, straight west,
/// 180 degree left arc back to the origin.
Track MakeRacetrack(double straight_length, double radius, double v_ref, double spacing = 0.5);

/// CSV with header `x,y,v_ref`.
Track ReadTrackCsv(std::istream& in, bool closed);
Track LoadTrackCsv(const std::string& path, bool closed);
void WriteTrackCsv(std::ostream& out, const Track& track);

}  // namespace avtrack
