#pragma once

#include <string>
#include <vector>

namespace nowcast::geo {

/// In planar mode coordinates are plain kilometers (lat ≡ y, lon ≡ x) and
/// distances are Euclidean; used by tests and synthetic fixtures.
enum class CoordMode { wgs84, planar };

CoordMode parse_coord_mode(const std::string& s);
const char* coord_mode_name(CoordMode m);

constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

double haversine_km(const GeoPoint& a, const GeoPoint& b);
double distance_km(const GeoPoint& a, const GeoPoint& b, CoordMode mode);

/// Equirectangular projection about a reference point; adequate at
/// municipal scale and exact along the reference meridian.
class LocalProjection {
 public:
  LocalProjection(const GeoPoint& origin, CoordMode mode);

  void project(const GeoPoint& p, double& x_km, double& y_km) const;
  GeoPoint unproject(double x_km, double y_km) const;

 private:
  GeoPoint origin_;
  CoordMode mode_;
  double cos_lat0_ = 1.0;
};

/// One linear ring in (lon, lat) order as GeoJSON stores it.
struct Ring {
  std::vector<double> xs;  // lon
  std::vector<double> ys;  // lat
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;

  void finalize();
};

struct RegionGeometry {
  std::string region_id;
  std::vector<Ring> rings;  // outer rings and holes of all polygon parts
  GeoPoint centroid;        // area-weighted shoelace centroid
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
};

/// Even-odd ray casting over every ring; points exactly on a segment count
/// as contained.
bool contains_point(const RegionGeometry& g, const GeoPoint& p);

/// GeoJSON FeatureCollection of (Multi)Polygons with a `region_id` property.
std::vector<RegionGeometry> load_geojson(const std::string& path);

}  // namespace nowcast::geo
