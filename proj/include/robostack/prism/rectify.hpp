#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robostack/prism/homography.hpp"

namespace robostack::prism {

/// Row-major raster of integer labels. Cell (r, c) covers
/// [origin.x + c*res, origin.x + (c+1)*res) x [origin.y + r*res, ...).
/// Image rasters use origin (0, 0) and res 1 (one pixel per cell).
struct Raster {
  int rows = 0;
  int cols = 0;
  Vec2 origin = Vec2::Zero();
  double resolution = 1.0;
  std::vector<int> cells;

  int at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
  int& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }

  Vec2 center(int r, int c) const {
    return origin + Vec2((c + 0.5) * resolution, (r + 0.5) * resolution);
  }

  /// Nearest-neighbour lookup; nullopt outside the raster.
  std::optional<int> sample(const Vec2& p) const {
    const double fc = std::floor((p.x() - origin.x()) / resolution);
    const double fr = std::floor((p.y() - origin.y()) / resolution);
    if (!std::isfinite(fc) || !std::isfinite(fr) || fc < 0 || fr < 0 || fc >= cols || fr >= rows) return std::nullopt;
    return at(static_cast<int>(fr), static_cast<int>(fc));
  }

  bool operator==(const Raster&) const = default;
};

/// Label evidence attached to a detection. Points and raster live in image
/// pixels before rectification and in model-plane meters after.
struct Payload {
  std::string text;
  std::vector<Vec2> points;
  std::optional<Raster> grid;

  static Payload from_json(const nlohmann::json& j) {
    Payload p;
    if (j.is_string()) {
      p.text = j.get<std::string>();
      return p;
    }
    p.text = j.value("text", std::string{});
    for (const auto& q : j.value("points", nlohmann::json::array()))
      p.points.emplace_back(q.at(0).get<double>(), q.at(1).get<double>());
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      Raster r;
      const auto rows = g.at("cells");
      r.rows = static_cast<int>(rows.size());
      r.cols = r.rows ? static_cast<int>(rows[0].size()) : 0;
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != r.cols) throw DegenerateConfiguration("ragged payload grid");
        for (const auto& v : row) r.cells.push_back(v.get<int>());
      }
      if (g.contains("origin")) r.origin = Vec2(g["origin"][0].get<double>(), g["origin"][1].get<double>());
      r.resolution = g.value("resolution", 1.0);
      p.grid = std::move(r);
    }
    return p;
  }
};

struct RectifyOptions {
  double resolution = 0.002;  // meters per output cell
  // Model-plane region [min, max] to resample; defaults to the image
  // raster's footprint pulled back through H.
  std::optional<std::pair<Vec2, Vec2>> region;
  int fill = 0;  // value for cells that map outside the image
};

namespace detail {

inline std::pair<Vec2, Vec2> footprint(const Homography& inv, const Raster& img) {
  const Vec2 lo = img.origin;
  const Vec2 hi = img.origin + Vec2(img.cols, img.rows) * img.resolution;
  Vec2 mn = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 mx = -mn;
  for (const Vec2& corner : {lo, Vec2(hi.x(), lo.y()), hi, Vec2(lo.x(), hi.y())}) {
    const Vec2 m = inv.apply(corner);
    mn = mn.cwiseMin(m);
    mx = mx.cwiseMax(m);
  }
  return {mn, mx};
}

}  // namespace detail

/// Pulls `payload` back onto the model plane: points through H^-1, the raster
/// by nearest-neighbour sampling of the image at H(cell center).
inline Payload rectify(const Homography& h, const Payload& payload, const RectifyOptions& opts = {}) {
  if (!(opts.resolution > 0)) throw DegenerateConfiguration("rectification resolution must be positive");
  const Homography inv = h.inverse();
  Payload out;
  out.text = payload.text;
  for (const auto& p : payload.points) out.points.push_back(inv.apply(p));
  if (payload.grid) {
    const auto [lo, hi] = opts.region ? *opts.region : detail::footprint(inv, *payload.grid);
    if (!lo.allFinite() || !hi.allFinite()) throw SingularHomography("image footprint is unbounded on the model plane");
    Raster r;
    r.origin = lo;
    r.resolution = opts.resolution;
    // the small slack keeps exact multiples of the resolution from gaining a cell
    r.cols = std::max(1, static_cast<int>(std::ceil((hi.x() - lo.x()) / opts.resolution - 1e-9)));
    r.rows = std::max(1, static_cast<int>(std::ceil((hi.y() - lo.y()) / opts.resolution - 1e-9)));
    r.cells.assign(static_cast<std::size_t>(r.rows) * r.cols, opts.fill);
    for (int i = 0; i < r.rows; ++i)
      for (int j = 0; j < r.cols; ++j)
        if (auto v = payload.grid->sample(h.apply(r.center(i, j)))) r.at(i, j) = *v;
    out.grid = std::move(r);
  }
  return out;
}

struct Label {
  std::string text;
  double confidence = 0.0;
};

/// Plug-in point for text recognition on rectified payloads.
class LabelExtractor {
 public:
  virtual ~LabelExtractor() = default;
  virtual Label extract(const Payload& rectified) const = 0;
};

inline std::string trim(const std::string& s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

/// Reads text embedded in the payload verbatim.
class PassThroughExtractor : public LabelExtractor {
 public:
  Label extract(const Payload& rectified) const override {
    std::string text = trim(rectified.text);
    if (text.empty()) throw EmptyLabel("payload carries no text");
    return {std::move(text), 1.0};
  }
};

}  // namespace robostack::prism
