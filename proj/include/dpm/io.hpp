#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpm/agent.hpp"
#include "dpm/common.hpp"
#include "dpm/field.hpp"
#include "dpm/geometry.hpp"

namespace dpm::io {

// Binary P5 PGM, maxval 255.
GrayImage read_pgm_image(const std::string& path, double spacing_mm = 1.0);
/// Pixel values must be 0 or 255; throws NonBinaryMask otherwise.
BinaryMask read_pgm_mask(const std::string& path);
/// Values are clamped to [0, 1] and rounded to the nearest of 256 levels.
void write_pgm(const GrayImage& img, const std::string& path);
/// Writes 0 / 255.
void write_pgm(const BinaryMask& mask, const std::string& path);

// "x,y" header, one vertex per row, closure implicit.
void write_contour_csv(const geometry::Contour& c, const std::string& path);
geometry::Contour read_contour_csv(const std::string& path);

// "t,x,y,hx,hy" header, one row per state.
void write_trajectory_csv(const agent::Trajectory& traj, const std::string& path);
agent::Trajectory read_trajectory_csv(const std::string& path);

/// Shortest round-tripping decimal representation.
std::string format_double(double v);

struct SvgLayers {
  const field::FieldBundle* field = nullptr;
  const agent::Trajectory* trajectory = nullptr;
  const geometry::Contour* contour = nullptr;
  int width = 0;   // canvas size; inferred from the field when zero
  int height = 0;
};

/// Field arrows every 8th pixel, trajectory polyline, one closed contour path.
/// Throws NothingToRender when no layer is present.
std::string render_svg(const SvgLayers& layers);
void render_svg(const SvgLayers& layers, const std::string& path);

struct ManifestPair {
  std::string image;
  std::string mask;
};

struct Manifest {
  std::vector<ManifestPair> pairs;
  nlohmann::json spec;
};

/// Relative paths in the manifest are resolved against its directory.
Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& m, const std::string& path);

std::string read_text(const std::string& path);
void write_text(const std::string& text, const std::string& path);

}  // namespace dpm::io
