#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jotlas/tensor.hpp"

namespace jotlas {

enum class MaskPattern { radial, vds, equispaced, vista_like, full, external };

MaskPattern mask_pattern_from_string(const std::string& name);
std::string to_string(MaskPattern pattern);

/// Binary Cartesian k-space sampling mask, centered convention: the DC
/// sample sits at (height/2, width/2). Regenerating with identical
/// parameters and seed is bit-identical.
struct SamplingMask {
  int height = 0;
  int width = 0;
  int frames = 0;
  MaskPattern pattern = MaskPattern::full;
  std::uint64_t seed = 0;
  double nominal_accel = 1.0;
  std::vector<std::uint8_t> bits;  // layout (h*W + w)*T + t, matching DynamicImage

  bool at(int h, int w, int t) const {
    return bits[(static_cast<std::size_t>(h) * width + w) * frames + t] != 0;
  }
  std::size_t sampled_count() const;
  std::size_t frame_sampled_count(int t) const;
  double measured_accel() const;
};

/// One pseudo-radial frame: `lines` straight lines through the DC location,
/// uniformly spaced in angle with the given offset, rasterized onto the grid.
std::vector<std::uint8_t> radial_frame_bits(int h, int w, int lines, double angle_offset);

/// Column-selection density used by the vds and vista-like generators,
/// peaked at the DC column: (1 - d/dmax)^4 + 0.02.
std::vector<double> vds_column_density(int width);

SamplingMask make_radial_mask(int h, int w, int frames, int lines, std::uint64_t seed);
SamplingMask make_vds_mask(int h, int w, int frames, double accel, std::uint64_t seed);
SamplingMask make_equispaced_mask(int h, int w, int frames, int accel, int acs);
SamplingMask make_vista_like_mask(int h, int w, int frames, double accel, std::uint64_t seed);
SamplingMask make_full_mask(int h, int w, int frames);

/// Per-coil complex sensitivity maps, shared across frames and normalized so
/// the squared magnitudes sum to one at every pixel.
struct CoilSensitivities {
  int coils = 0;
  int height = 0;
  int width = 0;
  std::vector<Complex> maps;  // layout (c*H + h)*W + w

  const Complex& at(int c, int h, int w) const {
    return maps[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
  Complex& at(int c, int h, int w) {
    return maps[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
};

/// Acquired k-space samples per (coil, h, w, frame), centered convention and
/// aligned with the generating mask; unsampled entries are exactly zero.
struct KSpaceData {
  int coils = 0;
  int height = 0;
  int width = 0;
  int frames = 0;
  std::vector<Complex> samples;  // layout ((c*H + h)*W + w)*T + t

  KSpaceData() = default;
  KSpaceData(int coils, int height, int width, int frames);

  std::size_t index(int c, int h, int w, int t) const {
    return ((static_cast<std::size_t>(c) * height + h) * width + w) * static_cast<std::size_t>(frames) + t;
  }
  const Complex& at(int c, int h, int w, int t) const { return samples[index(c, h, w, t)]; }
  Complex& at(int c, int h, int w, int t) { return samples[index(c, h, w, t)]; }

  double norm() const;
  Complex* coil_block(int c) { return samples.data() + static_cast<std::size_t>(c) * height * width * frames; }
  const Complex* coil_block(int c) const {
    return samples.data() + static_cast<std::size_t>(c) * height * width * frames;
  }
};

KSpaceData ksub(const KSpaceData& a, const KSpaceData& b);
Complex kinner(const KSpaceData& a, const KSpaceData& b);

/// The sampling operator A = M o F o S: optional coil weighting, unitary 2D
/// spatial DFT per frame, then masking in the centered k-space grid. The
/// operator is immutable after construction; forward/adjoint are pure and
/// safe to call concurrently.
class AcquisitionOperator {
 public:
  explicit AcquisitionOperator(SamplingMask mask,
                               std::optional<CoilSensitivities> csm = std::nullopt);

  const SamplingMask& mask() const { return mask_; }
  const std::optional<CoilSensitivities>& csm() const { return csm_; }
  int coils() const { return csm_ ? csm_->coils : 1; }
  int height() const { return mask_.height; }
  int width() const { return mask_.width; }
  int frames() const { return mask_.frames; }

  KSpaceData forward(const DynamicImage& x) const;
  DynamicImage adjoint(const KSpaceData& b) const;
  /// A^H b, the standard no-prior baseline.
  DynamicImage zero_filled(const KSpaceData& b) const { return adjoint(b); }

 private:
  SamplingMask mask_;
  std::optional<CoilSensitivities> csm_;
  std::shared_ptr<class FramewiseFft> fft_;
};

/// Per-pixel sqrt of the sum over coils of squared magnitudes.
DynamicImage rss_combine(const std::vector<DynamicImage>& coil_images);

// JOTL file adapters (values for masks are {0,1} real64; complex data is
// complex128).
void save_mask_jotl(const std::string& path, const SamplingMask& mask);
SamplingMask load_mask_jotl(const std::string& path);
void save_kspace_jotl(const std::string& path, const KSpaceData& data);
KSpaceData load_kspace_jotl(const std::string& path);
void save_csm_jotl(const std::string& path, const CoilSensitivities& csm);
CoilSensitivities load_csm_jotl(const std::string& path);

}  // namespace jotlas
