#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpm/common.hpp"
#include "dpm/field.hpp"

// Oriented patch sampling and the patch <-> image coordinate transforms.
namespace dpm::patches {

struct PatchFrame {
  Vec2 center;
  double phi = 0.0;  // sampling direction, (-pi, pi]
  int size = 64;     // P, even and >= 8
};

struct PatchSample {
  std::vector<float> pixels;  // P*P, row b holds patch y = b
  Vec2 target;                // displacement in patch coordinates (px)
};

/// Frame whose +x axis follows the interpolated field at `center`, rotated by
/// `offset`. Throws DegenerateDirection when the field magnitude is < 1e-6.
PatchFrame patch_frame_at(const field::FieldBundle& fb, Vec2 center, double offset, int size = 64);

/// Bilinear sampling at center + R(phi) (a - (P-1)/2, b - (P-1)/2), with
/// out-of-image coordinates clamped to the nearest edge.
void extract_patch(const GrayImage& img, const PatchFrame& frame, std::span<float> out);
std::vector<float> extract_patch(const GrayImage& img, const PatchFrame& frame);

inline Vec2 to_patch_coords(Vec2 v_image, const PatchFrame& frame) { return rotate(v_image, -frame.phi); }
inline Vec2 to_image_coords(Vec2 v_patch, const PatchFrame& frame) { return rotate(v_patch, frame.phi); }

/// In-place zero-mean, unit-variance rescaling (variance floored at 1e-6).
void standardize(std::span<float> patch);

struct DatasetConfig {
  double rho = 0.05;
  double band_px = 32.0;
  std::vector<double> offsets = {kPi / 4.0, -kPi / 4.0};  // radians
  double h = 2.0;
  int patch_size = 64;
  std::uint64_t seed = 0;
};

/// A sample described by its source image and frame; pixels are extracted on demand.
struct PlannedSample {
  std::int32_t image = 0;
  PatchFrame frame;
  Vec2 target;
};

using ImageMaskPair = std::pair<GrayImage, BinaryMask>;

/// Frames and targets for every sample, in the order they are emitted.
/// Per image: floor(rho * |band|) centres drawn without replacement from
/// {d <= band_px, non-singular}; one sample per offset in {0} + offsets.
std::vector<PlannedSample> plan_dataset(const std::vector<ImageMaskPair>& pairs,
                                        const DatasetConfig& cfg, Exec exec = Exec::Parallel);

std::vector<PatchSample> build_dataset(const std::vector<ImageMaskPair>& pairs,
                                       const DatasetConfig& cfg, Exec exec = Exec::Parallel);

/// Random-access view of a patch dataset.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int patch_size() const = 0;
  virtual double step() const = 0;
  virtual void fetch(std::size_t i, std::span<float> pixels, Vec2& target) const = 0;
};

class MemorySource final : public SampleSource {
 public:
  MemorySource(std::vector<PatchSample> samples, int patch_size, double h);
  std::size_t size() const override { return samples_.size(); }
  int patch_size() const override { return patch_size_; }
  double step() const override { return h_; }
  void fetch(std::size_t i, std::span<float> pixels, Vec2& target) const override;

 private:
  std::vector<PatchSample> samples_;
  int patch_size_;
  double h_;
};

/// Extracts patches from the source images at fetch time.
class LazySource final : public SampleSource {
 public:
  LazySource(const std::vector<ImageMaskPair>& pairs, std::vector<PlannedSample> plan,
             int patch_size, double h);
  std::size_t size() const override { return plan_.size(); }
  int patch_size() const override { return patch_size_; }
  double step() const override { return h_; }
  void fetch(std::size_t i, std::span<float> pixels, Vec2& target) const override;

 private:
  const std::vector<ImageMaskPair>* pairs_;
  std::vector<PlannedSample> plan_;
  int patch_size_;
  double h_;
};

/// Memory-mapped dataset file.
class FileSource final : public SampleSource {
 public:
  explicit FileSource(const std::string& path);
  ~FileSource() override;
  FileSource(const FileSource&) = delete;
  FileSource& operator=(const FileSource&) = delete;

  std::size_t size() const override { return count_; }
  int patch_size() const override { return patch_size_; }
  double step() const override { return h_; }
  void fetch(std::size_t i, std::span<float> pixels, Vec2& target) const override;

 private:
  const unsigned char* base_ = nullptr;
  std::size_t length_ = 0;
  std::size_t data_offset_ = 0;
  std::size_t count_ = 0;
  int patch_size_ = 0;
  double h_ = 0.0;
};

/// Streams the dataset file bytes: "DPMDS1\n", a one-line JSON header
/// {count, P, h}, then per sample P*P float32 pixels and (du, dv).
void serialize_dataset(const SampleSource& src,
                       const std::function<void(const char*, std::size_t)>& sink);
void write_dataset(const SampleSource& src, const std::string& path);

/// FNV-1a over the serialized bytes.
std::uint64_t dataset_digest(const SampleSource& src);

}  // namespace dpm::patches
