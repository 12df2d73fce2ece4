#pragma once

// DOTA-format annotation parsing/writing and annotation-space patch tiling.

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "orp/geometry.hpp"

namespace orp {

struct ParseError : std::runtime_error {
  std::size_t line = 0;
  ParseError(std::size_t line_no, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + reason), line(line_no) {}
};

struct DotaRecord {
  QuadBox box{};  // x1 y1 x2 y2 x3 y3 x4 y4, as written in the file
  std::string class_name;
  int difficulty = 0;
};

// One record per line: 8 coordinates, class token, difficulty flag. Leading
// metadata lines starting with "imagesource" or "gsd" are skipped.
inline std::vector<DotaRecord> parse_dota(const std::string& text) {
  std::vector<DotaRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens[0].rfind("imagesource", 0) == 0 || tokens[0].rfind("gsd", 0) == 0) continue;
    if (tokens.size() < 9 || tokens.size() > 10) {
      throw ParseError(line_no, "expected 8 coordinates, class name and optional difficulty");
    }
    DotaRecord rec;
    for (std::size_t i = 0; i < 8; ++i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tokens[i], &used);
        if (used != tokens[i].size() || !std::isfinite(v)) {
          throw ParseError(line_no, "bad coordinate '" + tokens[i] + "'");
        }
        (i % 2 == 0 ? rec.box[i / 2].x : rec.box[i / 2].y) = v;
      } catch (const std::invalid_argument&) {
        throw ParseError(line_no, "bad coordinate '" + tokens[i] + "'");
      } catch (const std::out_of_range&) {
        throw ParseError(line_no, "coordinate out of range '" + tokens[i] + "'");
      }
    }
    rec.class_name = tokens[8];
    if (tokens.size() == 10) {
      try {
        rec.difficulty = std::stoi(tokens[9]);
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad difficulty '" + tokens[9] + "'");
      }
      if (rec.difficulty != 0 && rec.difficulty != 1) {
        throw ParseError(line_no, "difficulty must be 0 or 1");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

inline std::string format_coord(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string write_dota(const std::vector<DotaRecord>& records) {
  std::ostringstream os;
  for (const DotaRecord& r : records) {
    for (std::size_t i = 0; i < 4; ++i) {
      os << format_coord(r.box[i].x) << ' ' << format_coord(r.box[i].y) << ' ';
    }
    os << r.class_name << ' ' << r.difficulty << '\n';
  }
  return os.str();
}

struct TileSpec {
  double patch_size = 1024.0;
  double stride = 824.0;
  double min_area_fraction = 0.3;  // clipped boxes below this fraction are dropped
};

struct Tile {
  Point2 origin{};  // tile window is [origin, origin + patch_size]^2
  std::vector<DotaRecord> records;  // tile-local coordinates
};

inline std::vector<double> tile_origins(double extent, const TileSpec& spec) {
  std::vector<double> origins;
  double o = 0.0;
  while (true) {
    // Final tile clamped to the border.
    const double clamped = std::max(0.0, std::min(o, extent - spec.patch_size));
    if (origins.empty() || clamped > origins.back()) origins.push_back(clamped);
    if (o + spec.patch_size >= extent) break;
    o += spec.stride;
  }
  return origins;
}

// Tiles laid at stride intervals covering the extent; each record goes to
// every tile it intersects, shifted to tile-local coordinates and clipped to
// the tile window. Records whose clipped area falls below the retention
// fraction are dropped.
inline std::vector<Tile> tile_annotations(const std::vector<DotaRecord>& records, double width,
                                          double height, const TileSpec& spec) {
  if (spec.stride <= 0.0 || spec.stride > spec.patch_size) {
    throw InvalidArgument("tile stride must be in (0, patch_size]");
  }
  const auto xs = tile_origins(width, spec);
  const auto ys = tile_origins(height, spec);
  std::vector<Tile> tiles;
  for (double oy : ys) {
    for (double ox : xs) {
      Tile tile;
      tile.origin = {ox, oy};
      const ConvexPolygon window{{{ox, oy},
                                  {ox + spec.patch_size, oy},
                                  {ox + spec.patch_size, oy + spec.patch_size},
                                  {ox, oy + spec.patch_size}}};
      for (const DotaRecord& rec : records) {
        QuadBox b = rec.box;
        if (polygon_area(b) < 0) std::reverse(b.begin(), b.end());
        const double full_area = polygon_area(b);
        if (full_area <= kGeomTol) continue;
        const auto clipped = convex_intersect(to_polygon(b), window);
        if (!clipped) continue;
        if (polygon_area(*clipped) < spec.min_area_fraction * full_area) continue;
        DotaRecord local = rec;
        for (Point2& p : local.box) {
          p.x -= ox;
          p.y -= oy;
        }
        tile.records.push_back(std::move(local));
      }
      tiles.push_back(std::move(tile));
    }
  }
  return tiles;
}

}  // namespace orp
