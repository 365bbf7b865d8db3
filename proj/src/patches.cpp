#include "dpm/patches.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "dpm/binary.hpp"

namespace dpm::patches {
namespace {

float sample_clamped(const Grid<float>& img, double x, double y) {
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(y), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img(x0, y0) + fx * img(x1, y0);
  const double bottom = (1.0 - fx) * img(x0, y1) + fx * img(x1, y1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

void check_frame(const PatchFrame& frame) {
  if (frame.size < 8 || frame.size % 2 != 0) {
    throw Error(Errc::ShapeMismatch, "patch size must be even and >= 8");
  }
}

}  // namespace

PatchFrame patch_frame_at(const field::FieldBundle& fb, Vec2 center, double offset, int size) {
  const Vec2 v = field::sample_field(fb, center);
  if (norm(v) < 1e-6) throw Error(Errc::DegenerateDirection, "field vanishes at patch centre");
  return {center, wrap_angle(angle_of(v) + offset), size};
}

void extract_patch(const GrayImage& img, const PatchFrame& frame, std::span<float> out) {
  check_frame(frame);
  const int p = frame.size;
  if (out.size() != static_cast<std::size_t>(p) * p) {
    throw Error(Errc::ShapeMismatch, "patch buffer size does not match frame");
  }
  const double c = std::cos(frame.phi);
  const double s = std::sin(frame.phi);
  const double half = (p - 1) / 2.0;
  for (int b = 0; b < p; ++b) {
    const double pb = b - half;
    for (int a = 0; a < p; ++a) {
      const double pa = a - half;
      const double x = frame.center.x + c * pa - s * pb;
      const double y = frame.center.y + s * pa + c * pb;
      out[static_cast<std::size_t>(b) * p + a] = sample_clamped(img.pixels, x, y);
    }
  }
}

std::vector<float> extract_patch(const GrayImage& img, const PatchFrame& frame) {
  check_frame(frame);
  std::vector<float> out(static_cast<std::size_t>(frame.size) * frame.size);
  extract_patch(img, frame, out);
  return out;
}

void standardize(std::span<float> patch) {
  if (patch.empty()) return;
  double mean = 0.0;
  for (float v : patch) mean += v;
  mean /= static_cast<double>(patch.size());
  double var = 0.0;
  for (float v : patch) var += (v - mean) * (v - mean);
  var /= static_cast<double>(patch.size());
  const double inv = 1.0 / std::sqrt(std::max(var, 1e-6));
  for (float& v : patch) v = static_cast<float>((v - mean) * inv);
}

std::vector<PlannedSample> plan_dataset(const std::vector<ImageMaskPair>& pairs,
                                        const DatasetConfig& cfg, Exec exec) {
  std::vector<double> offsets{0.0};
  for (double o : cfg.offsets) {
    if (o != 0.0) offsets.push_back(o);
  }

  std::vector<std::vector<PlannedSample>> per_image(pairs.size());
  for_each_index(exec, static_cast<std::int64_t>(pairs.size()), [&](std::int64_t i) {
    const auto& [img, mask] = pairs[static_cast<std::size_t>(i)];
    if (img.width() != mask.width() || img.height() != mask.height()) {
      throw Error(Errc::DimensionMismatch, "image and mask dimensions differ");
    }
    const auto df = field::distance_transform(mask, Exec::Serial);
    const auto fb = field::build_dynamic(df, Exec::Serial);

    std::vector<std::int32_t> band;
    for (std::size_t p = 0; p < df.d.size(); ++p) {
      if (df.d[p] <= cfg.band_px && !fb.singular[p]) band.push_back(static_cast<std::int32_t>(p));
    }
    if (band.empty()) throw Error(Errc::EmptyBand, "no non-singular pixels within the band");

    const auto count = static_cast<std::size_t>(std::floor(cfg.rho * static_cast<double>(band.size())));
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    for (std::size_t k = 0; k < std::min(count, band.size()); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, band.size() - 1);
      std::swap(band[k], band[pick(rng)]);
    }

    auto& out = per_image[static_cast<std::size_t>(i)];
    out.reserve(count * offsets.size());
    const int w = mask.width();
    for (std::size_t k = 0; k < count; ++k) {
      const Vec2 center{static_cast<double>(band[k] % w), static_cast<double>(band[k] / w)};
      const Vec2 v = field::sample_field(fb, center);
      for (double offset : offsets) {
        const PatchFrame frame = patch_frame_at(fb, center, offset, cfg.patch_size);
        out.push_back({static_cast<std::int32_t>(i), frame, to_patch_coords(cfg.h * v, frame)});
      }
    }
  });

  std::vector<PlannedSample> plan;
  for (auto& part : per_image) plan.insert(plan.end(), part.begin(), part.end());
  return plan;
}

std::vector<PatchSample> build_dataset(const std::vector<ImageMaskPair>& pairs,
                                       const DatasetConfig& cfg, Exec exec) {
  const auto plan = plan_dataset(pairs, cfg, exec);
  std::vector<PatchSample> out(plan.size());
  for_each_index(exec, static_cast<std::int64_t>(plan.size()), [&](std::int64_t i) {
    const auto& ps = plan[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = {extract_patch(pairs[static_cast<std::size_t>(ps.image)].first, ps.frame),
                                        ps.target};
  });
  return out;
}

MemorySource::MemorySource(std::vector<PatchSample> samples, int patch_size, double h)
    : samples_(std::move(samples)), patch_size_(patch_size), h_(h) {
  for (const auto& s : samples_) {
    if (s.pixels.size() != static_cast<std::size_t>(patch_size) * patch_size) {
      throw Error(Errc::ShapeMismatch, "sample pixel count does not match patch size");
    }
  }
}

void MemorySource::fetch(std::size_t i, std::span<float> pixels, Vec2& target) const {
  const auto& s = samples_.at(i);
  std::copy(s.pixels.begin(), s.pixels.end(), pixels.begin());
  target = s.target;
}

LazySource::LazySource(const std::vector<ImageMaskPair>& pairs, std::vector<PlannedSample> plan,
                       int patch_size, double h)
    : pairs_(&pairs), plan_(std::move(plan)), patch_size_(patch_size), h_(h) {}

void LazySource::fetch(std::size_t i, std::span<float> pixels, Vec2& target) const {
  const auto& ps = plan_.at(i);
  extract_patch((*pairs_)[static_cast<std::size_t>(ps.image)].first, ps.frame, pixels);
  target = ps.target;
}

FileSource::FileSource(const std::string& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw Error(Errc::Io, "cannot open " + path);
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw Error(Errc::Io, "cannot stat " + path);
  }
  length_ = static_cast<std::size_t>(st.st_size);
  if (length_ == 0) {
    ::close(fd);
    throw Error(Errc::TruncatedFile, "empty dataset file " + path);
  }
  void* addr = ::mmap(nullptr, length_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (addr == MAP_FAILED) throw Error(Errc::Io, "cannot map " + path);
  base_ = static_cast<const unsigned char*>(addr);

  auto fail = [&](Errc code, const std::string& msg) {
    ::munmap(const_cast<unsigned char*>(base_), length_);
    base_ = nullptr;
    throw Error(code, msg);
  };
  const std::string magic = "DPMDS1\n";
  if (length_ < magic.size() || std::string(reinterpret_cast<const char*>(base_), magic.size()) != magic) {
    fail(Errc::BadMagic, "expected DPMDS1 in " + path);
  }
  const auto* begin = reinterpret_cast<const char*>(base_) + magic.size();
  const auto* end = reinterpret_cast<const char*>(base_) + length_;
  const auto* eol = std::find(begin, end, '\n');
  if (eol == end) fail(Errc::TruncatedFile, "missing dataset header line");
  try {
    const auto header = nlohmann::json::parse(std::string(begin, eol));
    count_ = header.at("count").get<std::size_t>();
    patch_size_ = header.at("P").get<int>();
    h_ = header.at("h").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::BadMagic, std::string("bad dataset header: ") + e.what());
  }
  data_offset_ = static_cast<std::size_t>(eol + 1 - reinterpret_cast<const char*>(base_));
  const std::size_t record = (static_cast<std::size_t>(patch_size_) * patch_size_ + 2) * 4;
  const std::size_t need = data_offset_ + record * count_;
  if (length_ < need) fail(Errc::TruncatedFile, "dataset file shorter than header declares");
  if (length_ > need) fail(Errc::ShapeMismatch, "dataset file longer than header declares");
}

FileSource::~FileSource() {
  if (base_) ::munmap(const_cast<unsigned char*>(base_), length_);
}

void FileSource::fetch(std::size_t i, std::span<float> pixels, Vec2& target) const {
  if (i >= count_) throw Error(Errc::OutOfBounds, "sample index out of range");
  const std::size_t pp = static_cast<std::size_t>(patch_size_) * patch_size_;
  const unsigned char* rec = base_ + data_offset_ + i * (pp + 2) * 4;
  for (std::size_t k = 0; k < pp; ++k) pixels[k] = binary::get_f32(rec + 4 * k);
  target = {binary::get_f32(rec + 4 * pp), binary::get_f32(rec + 4 * pp + 4)};
}

void serialize_dataset(const SampleSource& src,
                       const std::function<void(const char*, std::size_t)>& sink) {
  const std::string magic = "DPMDS1\n";
  sink(magic.data(), magic.size());
  nlohmann::json header{{"count", src.size()}, {"P", src.patch_size()}, {"h", src.step()}};
  const std::string line = header.dump() + "\n";
  sink(line.data(), line.size());

  const std::size_t pp = static_cast<std::size_t>(src.patch_size()) * src.patch_size();
  std::vector<float> pixels(pp);
  std::vector<char> record((pp + 2) * 4);
  for (std::size_t i = 0; i < src.size(); ++i) {
    Vec2 target;
    src.fetch(i, pixels, target);
    for (std::size_t k = 0; k < pp; ++k) {
      const std::uint32_t bits = binary::to_le(std::bit_cast<std::uint32_t>(pixels[k]));
      std::memcpy(&record[4 * k], &bits, 4);
    }
    const std::uint32_t du = binary::to_le(std::bit_cast<std::uint32_t>(static_cast<float>(target.x)));
    const std::uint32_t dv = binary::to_le(std::bit_cast<std::uint32_t>(static_cast<float>(target.y)));
    std::memcpy(&record[4 * pp], &du, 4);
    std::memcpy(&record[4 * pp + 4], &dv, 4);
    sink(record.data(), record.size());
  }
}

void write_dataset(const SampleSource& src, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
  serialize_dataset(src, [&](const char* data, std::size_t n) {
    out.write(data, static_cast<std::streamsize>(n));
  });
  if (!out) throw Error(Errc::Io, "write failed for " + path);
}

std::uint64_t dataset_digest(const SampleSource& src) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  serialize_dataset(src, [&](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= static_cast<unsigned char>(data[i]);
      hash *= 0x100000001b3ULL;
    }
  });
  return hash;
}

}  // namespace dpm::patches
