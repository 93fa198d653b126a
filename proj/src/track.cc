#include "avtrack/track.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <utility>

#include "avtrack/errors.h"

namespace avtrack {

namespace {

constexpr double kMinSpacing = 1e-6;

struct SegmentHit {
  std::size_t segment = 0;
  double t = 0.0;
  double distance = 0.0;
  Point2 foot;
};

double Cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

}  // namespace

Point2 FramePoint(const VehicleState& state, Frame frame, const VehicleParams& params) {
  const double c = std::cos(state.theta);
  const double s = std::sin(state.theta);
  switch (frame) {
    case Frame::kFrontAxle:
      return {state.x + params.dist_front() * c, state.y + params.dist_front() * s};
    case Frame::kRearAxle:
      return {state.x - params.dist_rear * c, state.y - params.dist_rear * s};
    case Frame::kCog:
      break;
  }
  return {state.x, state.y};
}

Track::Track(std::vector<Waypoint> points, bool closed)
    : points_(std::move(points)), closed_(closed) {
  if (points_.size() < 2) throw InvalidInput("track needs at least 2 waypoints");
  for (const auto& p : points_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.v_ref)) {
      throw InvalidInput("track waypoint must be finite");
    }
    if (p.v_ref < 0.0) throw InvalidInput("track v_ref must be non-negative");
  }
  cumulative_.assign(points_.size() + 1, 0.0);
  for (std::size_t i = 0; i < num_segments(); ++i) {
    const Waypoint& a = points_[i];
    const Waypoint& b = points_[SegmentEnd(i)];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len <= kMinSpacing) throw InvalidInput("consecutive waypoints are coincident");
    cumulative_[i + 1] = cumulative_[i] + len;
  }
  if (!closed_) cumulative_.pop_back();
}

NearestResult Track::Nearest(Point2 p) const {
  SegmentHit best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < num_segments(); ++i) {
    const Waypoint& a = points_[i];
    const Waypoint& b = points_[SegmentEnd(i)];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy);
    t = std::clamp(t, 0.0, 1.0);
    const Point2 foot{a.x + t * dx, a.y + t * dy};
    const double dist = std::hypot(p.x - foot.x, p.y - foot.y);
    if (dist < best.distance) best = {i, t, dist, foot};
  }

  const Waypoint& a = points_[best.segment];
  const Waypoint& b = points_[SegmentEnd(best.segment)];
  NearestResult r;
  r.point = {best.foot.x, best.foot.y, a.v_ref + best.t * (b.v_ref - a.v_ref)};
  r.distance = best.distance;
  r.tangent = std::atan2(b.y - a.y, b.x - a.x);
  r.s = cumulative_[best.segment] + best.t * (cumulative_[best.segment + 1] -
                                              cumulative_[best.segment]);
  r.index = best.segment;
  r.t = best.t;
  if (best.t >= 1.0) {
    // Foot sits on the segment's end waypoint; report that waypoint.
    r.index = SegmentEnd(best.segment);
    r.t = 0.0;
    if (closed_ && r.index == 0) r.s = 0.0;
  }
  return r;
}

Waypoint Track::SampleAt(double s, double* tangent) const {
  const double total = length();
  if (closed_) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
  } else {
    s = std::clamp(s, 0.0, total);
  }
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t seg = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  seg = std::min(seg, num_segments() - 1);
  const Waypoint& a = points_[seg];
  const Waypoint& b = points_[SegmentEnd(seg)];
  const double seg_len = cumulative_[seg + 1] - cumulative_[seg];
  const double t = std::clamp((s - cumulative_[seg]) / seg_len, 0.0, 1.0);
  if (tangent != nullptr) *tangent = std::atan2(b.y - a.y, b.x - a.x);
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.v_ref + t * (b.v_ref - a.v_ref)};
}

double Track::SmoothTangent(double s) const {
  const double total = length();
  if (closed_) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
  } else {
    s = std::clamp(s, 0.0, total);
  }
  const std::size_t n = num_segments();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t seg = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  seg = std::min(seg, n - 1);
  auto heading = [&](std::size_t i) {
    const Waypoint& a = points_[i];
    const Waypoint& b = points_[SegmentEnd(i)];
    return std::atan2(b.y - a.y, b.x - a.x);
  };
  auto mid = [&](std::size_t i) { return 0.5 * (cumulative_[i] + cumulative_[i + 1]); };
  // Heading varies linearly between consecutive segment midpoints.
  std::size_t lo = seg;
  std::size_t hi = seg;
  double mid_lo = mid(seg);
  double mid_hi = mid_lo;
  if (s >= mid(seg)) {
    if (seg + 1 < n) {
      hi = seg + 1;
      mid_hi = mid(hi);
    } else if (closed_) {
      hi = 0;
      mid_hi = total + mid(0);
    }
  } else {
    if (seg > 0) {
      lo = seg - 1;
      mid_lo = mid(lo);
    } else if (closed_) {
      lo = n - 1;
      mid_lo = mid(lo) - total;
    }
  }
  if (lo == hi) return heading(seg);
  const double t = (s - mid_lo) / (mid_hi - mid_lo);
  const double h0 = heading(lo);
  return h0 + t * WrapAngle(heading(hi) - h0);
}

double Track::CurvatureAt(double s, double half_window) const {
  if (!(half_window > 0.0)) throw InvalidInput("curvature window must be positive");
  return WrapAngle(SmoothTangent(s + half_window) - SmoothTangent(s - half_window)) /
         (2.0 * half_window);
}

LookaheadResult Track::Lookahead(Point2 rear, double heading, double d_l) const {
  if (!std::isfinite(d_l) || d_l <= 0.0) throw InvalidInput("lookahead distance must be positive");

  auto make = [&](Point2 pt, std::size_t index, LookaheadStatus status) {
    LookaheadResult r;
    r.point = pt;
    r.index = index;
    r.status = status;
    r.alpha = WrapAngle(std::atan2(pt.y - rear.y, pt.x - rear.x) - heading);
    return r;
  };

  // Segment containing the foot point (before end-waypoint normalisation).
  const NearestResult nearest = Nearest(rear);
  std::size_t seg0 = nearest.index;
  if (nearest.t == 0.0 && nearest.index > 0 && !closed_ && nearest.index == size() - 1) {
    seg0 = nearest.index - 1;
  }

  if (nearest.distance > d_l) {
    std::size_t next = closed_ ? SegmentEnd(seg0) : std::min(seg0 + 1, size() - 1);
    const Waypoint& w = points_[next];
    return make({w.x, w.y}, next, LookaheadStatus::kFallback);
  }

  const std::size_t nseg = num_segments();
  for (std::size_t k = 0; k < nseg; ++k) {
    const std::size_t i = closed_ ? (seg0 + k) % nseg : seg0 + k;
    if (i >= nseg) break;
    const Waypoint& a = points_[i];
    const Waypoint& b = points_[SegmentEnd(i)];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double fx = a.x - rear.x;
    const double fy = a.y - rear.y;
    const double qa = dx * dx + dy * dy;
    const double qb = 2.0 * (fx * dx + fy * dy);
    const double qc = fx * fx + fy * fy - d_l * d_l;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) continue;
    const double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
    if (t < 0.0 || t > 1.0) continue;
    return make({a.x + t * dx, a.y + t * dy}, i, LookaheadStatus::kIntersection);
  }

  if (closed_) {
    // Circle encloses the whole loop.
    const std::size_t next = SegmentEnd(seg0);
    const Waypoint& w = points_[next];
    return make({w.x, w.y}, next, LookaheadStatus::kFallback);
  }
  const Waypoint& last = points_.back();
  return make({last.x, last.y}, size() - 1, LookaheadStatus::kEndOfTrack);
}

double Track::FinalSegmentParam(Point2 p) const {
  const std::size_t i = num_segments() - 1;
  const Waypoint& a = points_[i];
  const Waypoint& b = points_[SegmentEnd(i)];
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return ((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy);
}

NearestResult NearestPoint(const Track& track, Point2 position) { return track.Nearest(position); }

LookaheadResult LookaheadPoint(const Track& track, Point2 rear_axle, double heading,
                               double lookahead_dist) {
  return track.Lookahead(rear_axle, heading, lookahead_dist);
}

TrackingErrors ComputeTrackingErrors(const Track& track, const VehicleState& state, Frame frame,
                                     const VehicleParams& params) {
  if (!IsFinite(state)) throw InvalidInput("vehicle state must be finite");
  const Point2 p = FramePoint(state, frame, params);
  const NearestResult n = track.Nearest(p);
  // Sign from the side of the path the vehicle sits on: a vehicle right of the
  // path sees the reference on its left.
  const double side = Cross(std::cos(n.tangent), std::sin(n.tangent), p.x - n.point.x,
                            p.y - n.point.y);
  // Past either end of an open track only the lateral component counts.
  const bool past_end =
      !track.closed() && ((n.index == 0 && n.t <= 0.0) || n.index + 1 == track.size());
  TrackingErrors e;
  if (past_end) {
    e.cross_track = -side;
  } else {
    e.cross_track = side > 0.0 ? -n.distance : n.distance;
  }
  e.heading = WrapAngle(n.tangent - state.theta);
  e.speed = n.point.v_ref - state.v;
  e.nearest_index = n.index;
  return e;
}

namespace {

std::size_t Divisions(double length, double spacing) {
  if (!(length > 0.0) || !(spacing > 0.0)) throw InvalidInput("track dimensions must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length / spacing - 1e-9)));
}

void AppendArc(std::vector<Waypoint>& pts, double cx, double cy, double radius, double start,
               double sweep, double v_ref, double spacing) {
  const std::size_t n = Divisions(std::abs(sweep) * radius, spacing);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = start + sweep * static_cast<double>(k) / static_cast<double>(n);
    pts.push_back({cx + radius * std::cos(a), cy + radius * std::sin(a), v_ref});
  }
}

void AppendLine(std::vector<Waypoint>& pts, double x0, double y0, double x1, double y1,
                double v_ref, double spacing, bool include_end) {
  const std::size_t n = Divisions(std::hypot(x1 - x0, y1 - y0), spacing);
  const std::size_t last = include_end ? n : n - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n);
    pts.push_back({x0 + t * (x1 - x0), y0 + t * (y1 - y0), v_ref});
  }
}

}  // namespace

Track MakeStraightTrack(double length, double v_ref, double spacing) {
  std::vector<Waypoint> pts;
  AppendLine(pts, 0.0, 0.0, length, 0.0, v_ref, spacing, true);
  return Track(std::move(pts), false);
}

Track MakeCircleTrack(double radius, double v_ref, double spacing) {
  std::vector<Waypoint> pts;
  AppendArc(pts, 0.0, radius, radius, -kPi / 2.0, 2.0 * kPi, v_ref, spacing);
  return Track(std::move(pts), true);
}

Track MakeRacetrack(double straight_length, double radius, double v_ref, double spacing) {
  std::vector<Waypoint> pts;
  const double s = straight_length;
  const double r = radius;
  AppendLine(pts, 0.0, 0.0, s, 0.0, v_ref, spacing, false);
  AppendArc(pts, s, r, r, -kPi / 2.0, kPi, v_ref, spacing);
  AppendLine(pts, s, 2.0 * r, 0.0, 2.0 * r, v_ref, spacing, false);
  AppendArc(pts, 0.0, r, r, kPi / 2.0, kPi, v_ref, spacing);
  return Track(std::move(pts), true);
}

Track ReadTrackCsv(std::istream& in, bool closed) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("track csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,v_ref") throw InvalidInput("track csv header must be x,y,v_ref");
  std::vector<Waypoint> pts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    double values[3];
    int n = 0;
    while (std::getline(row, field, ',')) {
      if (n >= 3) throw InvalidInput("track csv line " + std::to_string(line_no) + ": too many fields");
      char* end = nullptr;
      values[n] = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) {
        throw InvalidInput("track csv line " + std::to_string(line_no) + ": bad number");
      }
      ++n;
    }
    if (n != 3) throw InvalidInput("track csv line " + std::to_string(line_no) + ": need 3 fields");
    pts.push_back({values[0], values[1], values[2]});
  }
  return Track(std::move(pts), closed);
}

Track LoadTrackCsv(const std::string& path, bool closed) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open track file: " + path);
  return ReadTrackCsv(in, closed);
}

void WriteTrackCsv(std::ostream& out, const Track& track) {
  out << "x,y,v_ref\n";
  char buf[96];
  for (const auto& p : track.points()) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", p.x, p.y, p.v_ref);
    out << buf;
  }
}

}  // namespace avtrack
