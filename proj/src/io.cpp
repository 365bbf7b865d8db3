#include "dpm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dpm::io {
namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error(Errc::Io, "write to '" + path + "' failed");
}

// Next header integer, skipping whitespace and '#' comments.
long read_header_int(std::istream& in, const std::string& path) {
  int c = in.get();
  while (true) {
    if (c == EOF) throw Error(Errc::TruncatedFile, "PGM header of '" + path + "' ends early");
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (!std::isdigit(c)) throw Error(Errc::BadMagic, "malformed PGM header in '" + path + "'");
  long v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1'000'000) throw Error(Errc::BadMagic, "PGM header value too large in '" + path + "'");
    c = in.get();
  }
  if (c == EOF) throw Error(Errc::TruncatedFile, "PGM header of '" + path + "' ends early");
  if (!std::isspace(c)) throw Error(Errc::BadMagic, "malformed PGM header in '" + path + "'");
  return v;
}

struct RawPgm {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> bytes;
};

RawPgm read_raw_pgm(const std::string& path) {
  auto in = open_in(path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') {
    throw Error(Errc::BadMagic, "'" + path + "' is not a binary PGM (P5)");
  }
  RawPgm raw;
  const long w = read_header_int(in, path);
  const long h = read_header_int(in, path);
  const long maxval = read_header_int(in, path);
  if (w <= 0 || h <= 0) throw Error(Errc::BadMagic, "PGM dimensions must be positive");
  if (maxval != 255) throw Error(Errc::BadMaxval, "maxval " + std::to_string(maxval) + " (only 255 supported)");
  raw.width = static_cast<int>(w);
  raw.height = static_cast<int>(h);
  raw.bytes.resize(static_cast<std::size_t>(w * h));
  in.read(reinterpret_cast<char*>(raw.bytes.data()), static_cast<std::streamsize>(raw.bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.bytes.size()) {
    throw Error(Errc::TruncatedFile, "PGM pixel data of '" + path + "' is truncated");
  }
  return raw;
}

void write_raw_pgm(int w, int h, const std::vector<unsigned char>& bytes, const std::string& path) {
  auto out = open_out(path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  finish(out, path);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw Error(Errc::BadConfig, path + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

// Rows of a CSV with the exact given header; a trailing '\r' is tolerated.
std::vector<std::vector<double>> read_csv(const std::string& path, const std::string& header) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::TruncatedFile, "'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw Error(Errc::BadMagic, "'" + path + "' must start with header '" + header + "'");
  const std::size_t n_fields = split_fields(header).size();
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_fields) {
      throw Error(Errc::BadConfig, path + ":" + std::to_string(line_no) + ": expected " +
                                       std::to_string(n_fields) + " fields");
    }
    std::vector<double> row;
    row.reserve(n_fields);
    for (const auto& f : fields) row.push_back(parse_double(f, path, line_no));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace

GrayImage read_pgm_image(const std::string& path, double spacing_mm) {
  const auto raw = read_raw_pgm(path);
  GrayImage img{Grid<float>(raw.width, raw.height), spacing_mm};
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) img.pixels[i] = static_cast<float>(raw.bytes[i] / 255.0);
  return img;
}

BinaryMask read_pgm_mask(const std::string& path) {
  const auto raw = read_raw_pgm(path);
  BinaryMask mask(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) {
    const unsigned char b = raw.bytes[i];
    if (b != 0 && b != 255) {
      throw Error(Errc::NonBinaryMask, "mask '" + path + "' contains value " + std::to_string(b));
    }
    mask[i] = b ? 1 : 0;
  }
  return mask;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::vector<unsigned char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.pixels[i]), 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  write_raw_pgm(img.width(), img.height(), bytes, path);
}

void write_pgm(const BinaryMask& mask, const std::string& path) {
  std::vector<unsigned char> bytes(mask.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask[i] ? 255 : 0;
  write_raw_pgm(mask.width(), mask.height(), bytes, path);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_contour_csv(const geometry::Contour& c, const std::string& path) {
  auto out = open_out(path);
  out << "x,y\n";
  for (const Vec2& p : c) out << format_double(p.x) << ',' << format_double(p.y) << '\n';
  finish(out, path);
}

geometry::Contour read_contour_csv(const std::string& path) {
  geometry::Contour c;
  for (const auto& row : read_csv(path, "x,y")) c.push_back({row[0], row[1]});
  return c;
}

void write_trajectory_csv(const agent::Trajectory& traj, const std::string& path) {
  auto out = open_out(path);
  out << "t,x,y,hx,hy\n";
  for (const auto& s : traj) {
    out << s.t << ',' << format_double(s.position.x) << ',' << format_double(s.position.y) << ','
        << format_double(s.heading.x) << ',' << format_double(s.heading.y) << '\n';
  }
  finish(out, path);
}

agent::Trajectory read_trajectory_csv(const std::string& path) {
  agent::Trajectory traj;
  for (const auto& row : read_csv(path, "t,x,y,hx,hy")) {
    agent::AgentState s;
    s.t = static_cast<std::int64_t>(row[0]);
    s.position = {row[1], row[2]};
    s.heading = {row[3], row[4]};
    traj.push_back(s);
  }
  return traj;
}

std::string render_svg(const SvgLayers& layers) {
  if (!layers.field && !layers.trajectory && !layers.contour) {
    throw Error(Errc::NothingToRender, "no field, trajectory or contour given");
  }
  int w = layers.width;
  int h = layers.height;
  if ((w <= 0 || h <= 0) && layers.field) {
    w = layers.field->width();
    h = layers.field->height();
  }
  if (w <= 0 || h <= 0) {
    double mx = 0.0, my = 0.0;
    auto grow = [&](Vec2 p) {
      mx = std::max(mx, p.x);
      my = std::max(my, p.y);
    };
    if (layers.trajectory) for (const auto& s : *layers.trajectory) grow(s.position);
    if (layers.contour) for (const Vec2& p : *layers.contour) grow(p);
    w = static_cast<int>(std::ceil(mx)) + 1;
    h = static_cast<int>(std::ceil(my)) + 1;
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"-0.5 -0.5 " << w << ' ' << h << "\">\n";
  svg << "<rect x=\"-0.5\" y=\"-0.5\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  if (layers.field) {
    constexpr int kStride = 8;
    constexpr double kArrow = 6.0;
    const auto& fb = *layers.field;
    svg << "<g stroke=\"#1f77b4\" stroke-width=\"0.6\">\n";
    for (int y = 0; y < fb.height(); y += kStride) {
      for (int x = 0; x < fb.width(); x += kStride) {
        if (fb.singular(x, y)) continue;
        const Vec2 v = fb.v(x, y);
        const Vec2 tip{x + kArrow * v.x, y + kArrow * v.y};
        const Vec2 l = tip - 2.0 * rotate(v, 0.5);
        const Vec2 r = tip - 2.0 * rotate(v, -0.5);
        svg << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << fixed2(tip.x) << "\" y2=\""
            << fixed2(tip.y) << "\"/>";
        svg << "<polyline fill=\"none\" points=\"" << fixed2(l.x) << ',' << fixed2(l.y) << ' '
            << fixed2(tip.x) << ',' << fixed2(tip.y) << ' ' << fixed2(r.x) << ',' << fixed2(r.y) << "\"/>\n";
      }
    }
    svg << "</g>\n";
  }
  if (layers.trajectory && !layers.trajectory->empty()) {
    svg << "<polyline fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"0.8\" points=\"";
    bool first = true;
    for (const auto& s : *layers.trajectory) {
      svg << (first ? "" : " ") << fixed2(s.position.x) << ',' << fixed2(s.position.y);
      first = false;
    }
    svg << "\"/>\n";
  }
  if (layers.contour && !layers.contour->empty()) {
    svg << "<path fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.2\" d=\"";
    bool first = true;
    for (const Vec2& p : *layers.contour) {
      svg << (first ? "M" : " L") << fixed2(p.x) << ' ' << fixed2(p.y);
      first = false;
    }
    svg << " Z\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_svg(const SvgLayers& layers, const std::string& path) { write_text(render_svg(layers), path); }

Manifest read_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, "manifest '" + path + "': " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return (fp.is_absolute() ? fp : dir / fp).string();
  };
  Manifest m;
  try {
    for (const auto& pair : j.at("pairs")) {
      m.pairs.push_back({resolve(pair.at("image").get<std::string>()), resolve(pair.at("mask").get<std::string>())});
    }
    m.spec = j.value("spec", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, "manifest '" + path + "': " + e.what());
  }
  return m;
}

void write_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : m.pairs) pairs.push_back({{"image", p.image}, {"mask", p.mask}});
  write_text(nlohmann::json{{"pairs", pairs}, {"spec", m.spec}}.dump(2) + "\n", path);
}

std::string read_text(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& text, const std::string& path) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace dpm::io
