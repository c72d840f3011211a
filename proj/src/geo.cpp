#include "nowcast/geo.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "nowcast/csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast::geo {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

CoordMode parse_coord_mode(const std::string& s) {
  if (s == "wgs84") return CoordMode::wgs84;
  if (s == "planar") return CoordMode::planar;
  throw ValidationError("unknown geo.mode: " + s + " (expected wgs84|planar)");
}

const char* coord_mode_name(CoordMode m) {
  return m == CoordMode::wgs84 ? "wgs84" : "planar";
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2);
  const double s2 = std::sin(dlon / 2);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double distance_km(const GeoPoint& a, const GeoPoint& b, CoordMode mode) {
  if (mode == CoordMode::planar) {
    const double dx = a.lon - b.lon;
    const double dy = a.lat - b.lat;
    return std::sqrt(dx * dx + dy * dy);
  }
  return haversine_km(a, b);
}

LocalProjection::LocalProjection(const GeoPoint& origin, CoordMode mode)
    : origin_(origin), mode_(mode) {
  if (mode_ == CoordMode::wgs84) cos_lat0_ = std::cos(origin_.lat * kDegToRad);
}

void LocalProjection::project(const GeoPoint& p, double& x_km, double& y_km) const {
  if (mode_ == CoordMode::planar) {
    x_km = p.lon - origin_.lon;
    y_km = p.lat - origin_.lat;
    return;
  }
  x_km = (p.lon - origin_.lon) * kDegToRad * kEarthRadiusKm * cos_lat0_;
  y_km = (p.lat - origin_.lat) * kDegToRad * kEarthRadiusKm;
}

GeoPoint LocalProjection::unproject(double x_km, double y_km) const {
  if (mode_ == CoordMode::planar)
    return GeoPoint{origin_.lat + y_km, origin_.lon + x_km};
  GeoPoint p;
  p.lat = origin_.lat + y_km / (kDegToRad * kEarthRadiusKm);
  p.lon = origin_.lon + (cos_lat0_ != 0.0 ? x_km / (kDegToRad * kEarthRadiusKm * cos_lat0_) : 0.0);
  return p;
}

void Ring::finalize() {
  min_x = max_x = xs.empty() ? 0.0 : xs[0];
  min_y = max_y = ys.empty() ? 0.0 : ys[0];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    min_x = std::min(min_x, xs[i]);
    max_x = std::max(max_x, xs[i]);
    min_y = std::min(min_y, ys[i]);
    max_y = std::max(max_y, ys[i]);
  }
}

namespace {

bool on_segment(double px, double py, double x1, double y1, double x2, double y2) {
  const double cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
  if (cross != 0.0) return false;
  return px >= std::min(x1, x2) && px <= std::max(x1, x2) &&
         py >= std::min(y1, y2) && py <= std::max(y1, y2);
}

}  // namespace

bool contains_point(const RegionGeometry& g, const GeoPoint& p) {
  const double px = p.lon;
  const double py = p.lat;
  if (px < g.min_x || px > g.max_x || py < g.min_y || py > g.max_y) return false;
  bool inside = false;
  for (const Ring& r : g.rings) {
    if (px < r.min_x || px > r.max_x || py < r.min_y || py > r.max_y) continue;
    const std::size_t n = r.xs.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const double xi = r.xs[i], yi = r.ys[i];
      const double xj = r.xs[j], yj = r.ys[j];
      if (on_segment(px, py, xi, yi, xj, yj)) return true;
      const bool crosses = (yi > py) != (yj > py);
      if (crosses && px < (xj - xi) * (py - yi) / (yj - yi) + xi) inside = !inside;
    }
  }
  return inside;
}

namespace {

Ring ring_from_json(const nlohmann::json& coords, const std::string& path) {
  Ring r;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2)
      throw ValidationError("bad ring coordinate in " + path);
    r.xs.push_back(pt[0].get<double>());
    r.ys.push_back(pt[1].get<double>());
  }
  // drop the closing vertex GeoJSON repeats
  if (r.xs.size() >= 2 && r.xs.front() == r.xs.back() && r.ys.front() == r.ys.back()) {
    r.xs.pop_back();
    r.ys.pop_back();
  }
  if (r.xs.size() < 3) throw ValidationError("degenerate ring in " + path);
  r.finalize();
  return r;
}

}  // namespace

std::vector<RegionGeometry> load_geojson(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse GeoJSON " + path + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection")
    throw ValidationError("GeoJSON root must be a FeatureCollection: " + path);

  std::vector<RegionGeometry> out;
  for (const auto& feature : doc["features"]) {
    RegionGeometry g;
    const auto& props = feature.at("properties");
    if (!props.contains("region_id"))
      throw ValidationError("feature without region_id property in " + path);
    g.region_id = props.at("region_id").get<std::string>();
    const auto& geom = feature.at("geometry");
    const std::string type = geom.value("type", "");
    const auto& coords = geom.at("coordinates");
    if (type == "Polygon") {
      for (const auto& ring : coords) g.rings.push_back(ring_from_json(ring, path));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : coords)
        for (const auto& ring : poly) g.rings.push_back(ring_from_json(ring, path));
    } else {
      throw ValidationError("unsupported geometry type '" + type + "' in " + path);
    }
    if (g.rings.empty()) throw ValidationError("feature without rings in " + path);

    g.min_x = g.rings[0].min_x;
    g.max_x = g.rings[0].max_x;
    g.min_y = g.rings[0].min_y;
    g.max_y = g.rings[0].max_y;
    for (const Ring& r : g.rings) {
      g.min_x = std::min(g.min_x, r.min_x);
      g.max_x = std::max(g.max_x, r.max_x);
      g.min_y = std::min(g.min_y, r.min_y);
      g.max_y = std::max(g.max_y, r.max_y);
    }

    // signed shoelace centroid; holes carry opposite orientation and
    // subtract themselves
    double area2 = 0.0, cx = 0.0, cy = 0.0;
    for (const Ring& r : g.rings) {
      const std::size_t n = r.xs.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double cross = r.xs[j] * r.ys[i] - r.xs[i] * r.ys[j];
        area2 += cross;
        cx += (r.xs[j] + r.xs[i]) * cross;
        cy += (r.ys[j] + r.ys[i]) * cross;
      }
    }
    if (std::abs(area2) > 1e-30) {
      g.centroid.lon = cx / (3.0 * area2);
      g.centroid.lat = cy / (3.0 * area2);
    } else {
      g.centroid.lon = (g.min_x + g.max_x) / 2;
      g.centroid.lat = (g.min_y + g.max_y) / 2;
    }
    out.push_back(std::move(g));
  }
  if (out.empty()) throw ValidationError("GeoJSON has no features: " + path);
  return out;
}

}  // namespace nowcast::geo
