#include "tgf/plot.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tgf {

namespace {

struct Bounds {
  double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
  void grow(const Vec2& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
};

class SvgWriter {
 public:
  SvgWriter(const Bounds& b, double size) : size_(size) {
    const double span_x = std::max(b.max_x - b.min_x, 1.0);
    const double span_y = std::max(b.max_y - b.min_y, 1.0);
    scale_ = (size - 2.0 * margin_) / std::max(span_x, span_y);
    origin_ = Vec2(b.min_x, b.min_y);
  }

  std::string map(const Vec2& p) const {
    // SVG y grows downward.
    const double x = margin_ + (p.x() - origin_.x()) * scale_;
    const double y = size_ - margin_ - (p.y() - origin_.y()) * scale_;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f", x, y);
    return buf;
  }

  double map_radius(double r) const { return std::max(r * scale_, 1.0); }

 private:
  double size_;
  double margin_ = 20.0;
  double scale_ = 1.0;
  Vec2 origin_;
};

template <typename Pts>
void polyline(std::ostringstream& os, const SvgWriter& w, const Pts& points,
              const std::string& cls, const std::string& color, double width) {
  os << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color
     << "\" stroke-width=\"" << width << "\" points=\"";
  bool first = true;
  for (const auto& p : points) {
    if (!first) os << " ";
    os << w.map(p);
    first = false;
  }
  os << "\"/>\n";
}

}  // namespace

void plot_scene(const NormalizedScene& scene, const ForecastOutput& prediction,
                const std::string& out_path) {
  if (scene.scene_id != prediction.scene_id) {
    throw ValidationError("plot: scene id " + scene.scene_id + " does not match prediction " +
                          prediction.scene_id);
  }

  Bounds bounds;
  for (const auto& lane : scene.lanes) {
    for (const auto& p : lane.centerline) bounds.grow(p);
  }
  std::vector<Vec2> observed;
  for (const auto& p : scene.aoi().positions) {
    if (p.t < kObsSteps) {
      observed.push_back(p.pos);
      bounds.grow(p.pos);
    }
  }
  for (const auto& p : scene.gt_future) bounds.grow(p);
  for (const auto& traj : prediction.trajectories) {
    for (int r = 0; r < traj.rows(); ++r) bounds.grow(traj.row(r).transpose());
  }

  const double size = 800.0;
  const SvgWriter w(bounds, size);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (const auto& lane : scene.lanes) {
    polyline(os, w, lane.centerline, "lane", "#9e9e9e", 2.0);
  }
  if (observed.size() >= 2) {
    polyline(os, w, observed, "aoi-observed", "#1565c0", 3.0);
  }
  if (scene.gt_future.size() >= 2) {
    polyline(os, w, scene.gt_future, "gt-future", "#2e7d32", 3.0);
  }
  for (std::size_t k = 0; k < prediction.trajectories.size(); ++k) {
    const Matrix& traj = prediction.trajectories[k];
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(traj.rows()));
    for (int r = 0; r < traj.rows(); ++r) pts.push_back(traj.row(r).transpose());
    polyline(os, w, pts, "prediction", "#ef6c00", 2.0);
    const double prob = prediction.probabilities(static_cast<Eigen::Index>(k));
    char marker[160];
    const Vec2 end = pts.back();
    std::snprintf(marker, sizeof(marker),
                  "<circle class=\"endpoint\" cx=\"%s\" r=\"%.2f\" fill=\"#ef6c00\" "
                  "fill-opacity=\"0.7\"/>\n",
                  w.map(end).c_str(), w.map_radius(0.4 + 2.0 * prob));
    // map() yields "x,y"; split for the circle attributes.
    std::string m = marker;
    const auto comma = m.find(',');
    m = m.substr(0, comma) + "\" cy=\"" + m.substr(comma + 1);
    os << m;
  }
  os << "</svg>\n";

  std::ofstream file(out_path, std::ios::trunc | std::ios::binary);
  if (!file) throw IoError("cannot open " + out_path + " for writing");
  file << os.str();
  if (!file) throw IoError("write failed: " + out_path);
}

}  // namespace tgf
