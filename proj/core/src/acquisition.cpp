#include "jotlas/acquisition.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>

#include "jotlas/errors.hpp"
#include "jotlas/jotl_io.hpp"

namespace jotlas {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t frame_major_index(int w, int frames, int h, int ww, int t) {
  return (static_cast<std::size_t>(h) * w + ww) * frames + t;
}

}  // namespace

// Unitary 2D spatial DFT applied to every frame of a frame-fastest tensor
// block. Plans are created once; execution on caller buffers is thread-safe.
class FramewiseFft {
 public:
  FramewiseFft(int height, int width, int frames)
      : height_(height), width_(width), frames_(frames),
        scale_(1.0 / std::sqrt(static_cast<double>(height) * width)) {
    const std::size_t n = static_cast<std::size_t>(height) * width * frames;
    std::vector<Complex> dummy_in(n), dummy_out(n);
    int dims[2] = {height, width};
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_ = fftw_plan_many_dft(2, dims, frames, reinterpret_cast<fftw_complex*>(dummy_in.data()),
                              nullptr, frames, 1, reinterpret_cast<fftw_complex*>(dummy_out.data()),
                              nullptr, frames, 1, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    bwd_ = fftw_plan_many_dft(2, dims, frames, reinterpret_cast<fftw_complex*>(dummy_in.data()),
                              nullptr, frames, 1, reinterpret_cast<fftw_complex*>(dummy_out.data()),
                              nullptr, frames, 1, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (fwd_ == nullptr || bwd_ == nullptr) {
      throw NumericalError("FFTW plan creation failed");
    }
  }

  ~FramewiseFft() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }

  FramewiseFft(const FramewiseFft&) = delete;
  FramewiseFft& operator=(const FramewiseFft&) = delete;

  // Unnormalized transforms; callers apply unitary_scale() themselves.
  void forward(const Complex* in, Complex* out) const {
    fftw_execute_dft(fwd_, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }
  void backward(const Complex* in, Complex* out) const {
    fftw_execute_dft(bwd_, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }
  double unitary_scale() const { return scale_; }

 private:
  int height_, width_, frames_;
  double scale_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

MaskPattern mask_pattern_from_string(const std::string& name) {
  if (name == "radial") return MaskPattern::radial;
  if (name == "vds") return MaskPattern::vds;
  if (name == "equispaced") return MaskPattern::equispaced;
  if (name == "vista-like") return MaskPattern::vista_like;
  if (name == "full") return MaskPattern::full;
  throw std::invalid_argument("unknown mask pattern '" + name +
                              "' (allowed: radial, vds, equispaced, vista-like, full)");
}

std::string to_string(MaskPattern pattern) {
  switch (pattern) {
    case MaskPattern::radial: return "radial";
    case MaskPattern::vds: return "vds";
    case MaskPattern::equispaced: return "equispaced";
    case MaskPattern::vista_like: return "vista-like";
    case MaskPattern::full: return "full";
    case MaskPattern::external: return "external";
  }
  return "?";
}

std::size_t SamplingMask::sampled_count() const {
  std::size_t n = 0;
  for (std::uint8_t b : bits) n += (b != 0);
  return n;
}

std::size_t SamplingMask::frame_sampled_count(int t) const {
  std::size_t n = 0;
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      n += at(h, w, t) ? 1 : 0;
    }
  }
  return n;
}

double SamplingMask::measured_accel() const {
  const std::size_t sampled = sampled_count();
  if (sampled == 0) return 0.0;
  return static_cast<double>(bits.size()) / static_cast<double>(sampled);
}

namespace {

SamplingMask blank_mask(int h, int w, int frames, MaskPattern pattern, std::uint64_t seed) {
  if (h <= 0 || w <= 0 || frames <= 0) {
    throw std::invalid_argument("mask dimensions must be positive");
  }
  SamplingMask m;
  m.height = h;
  m.width = w;
  m.frames = frames;
  m.pattern = pattern;
  m.seed = seed;
  m.bits.assign(static_cast<std::size_t>(h) * w * frames, 0);
  return m;
}

void set_column(SamplingMask& m, int col, int t) {
  for (int h = 0; h < m.height; ++h) {
    m.bits[frame_major_index(m.width, m.frames, h, col, t)] = 1;
  }
}

}  // namespace

std::vector<std::uint8_t> radial_frame_bits(int h, int w, int lines, double angle_offset) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(h) * w, 0);
  const int ch = h / 2;
  const int cw = w / 2;
  const int reach = h + w;
  for (int k = 0; k < lines; ++k) {
    const double theta = angle_offset + k * std::numbers::pi / lines;
    double dh = std::sin(theta);
    double dw = std::cos(theta);
    // March one cell per step along the dominant axis so a line covers about
    // max(h, w) cells regardless of its angle.
    const double scale = 1.0 / std::max(std::abs(dh), std::abs(dw));
    dh *= scale;
    dw *= scale;
    for (int s = -reach; s <= reach; ++s) {
      const int hh = static_cast<int>(std::lround(ch + s * dh));
      const int ww = static_cast<int>(std::lround(cw + s * dw));
      if (hh >= 0 && hh < h && ww >= 0 && ww < w) {
        bits[static_cast<std::size_t>(hh) * w + ww] = 1;
      }
    }
  }
  bits[static_cast<std::size_t>(ch) * w + cw] = 1;
  return bits;
}

SamplingMask make_radial_mask(int h, int w, int frames, int lines, std::uint64_t seed) {
  if (lines < 1) throw std::invalid_argument("radial mask needs lines >= 1");
  if (lines > std::max(h, w)) {
    throw std::invalid_argument("radial mask: lines=" + std::to_string(lines) +
                                " exceeds grid capacity max(h,w)=" +
                                std::to_string(std::max(h, w)));
  }
  SamplingMask m = blank_mask(h, w, frames, MaskPattern::radial, seed);
  m.nominal_accel = std::max(1.0, static_cast<double>(h) * w /
                                      (static_cast<double>(lines) * std::max(h, w)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset_dist(0.0, std::numbers::pi / lines);
  for (int t = 0; t < frames; ++t) {
    const double offset = offset_dist(rng);
    const std::vector<std::uint8_t> frame = radial_frame_bits(h, w, lines, offset);
    for (int hh = 0; hh < h; ++hh) {
      for (int ww = 0; ww < w; ++ww) {
        if (frame[static_cast<std::size_t>(hh) * w + ww]) {
          m.bits[frame_major_index(w, frames, hh, ww, t)] = 1;
        }
      }
    }
  }
  return m;
}

std::vector<double> vds_column_density(int width) {
  std::vector<double> density(width);
  const int dc = width / 2;
  double dmax = 0.0;
  for (int c = 0; c < width; ++c) dmax = std::max(dmax, std::abs(static_cast<double>(c - dc)));
  if (dmax == 0.0) dmax = 1.0;
  for (int c = 0; c < width; ++c) {
    const double d = std::abs(static_cast<double>(c - dc)) / dmax;
    density[c] = std::pow(1.0 - d, 4) + 0.02;
  }
  return density;
}

SamplingMask make_vds_mask(int h, int w, int frames, double accel, std::uint64_t seed) {
  if (accel < 1.0) throw std::invalid_argument("vds mask needs accel >= 1");
  if (accel > w) {
    throw std::invalid_argument("vds mask: accel=" + std::to_string(accel) +
                                " exceeds width " + std::to_string(w));
  }
  SamplingMask m = blank_mask(h, w, frames, MaskPattern::vds, seed);
  const int n_cols = std::max<int>(1, static_cast<int>(std::lround(w / accel)));
  m.nominal_accel = static_cast<double>(w) / n_cols;
  const std::vector<double> density = vds_column_density(w);
  const int dc = w / 2;
  std::mt19937_64 rng(seed);

  for (int t = 0; t < frames; ++t) {
    std::vector<int> available;
    available.reserve(w);
    for (int c = 0; c < w; ++c) {
      if (c != dc) available.push_back(c);
    }
    std::vector<int> chosen{dc};
    while (static_cast<int>(chosen.size()) < n_cols && !available.empty()) {
      double total = 0.0;
      for (int c : available) total += density[c];
      std::uniform_real_distribution<double> dist(0.0, total);
      double r = dist(rng);
      std::size_t pick = available.size() - 1;
      for (std::size_t i = 0; i < available.size(); ++i) {
        r -= density[available[i]];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      chosen.push_back(available[pick]);
      available.erase(available.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    for (int c : chosen) set_column(m, c, t);
  }
  return m;
}

SamplingMask make_equispaced_mask(int h, int w, int frames, int accel, int acs) {
  if (accel < 1) throw std::invalid_argument("equispaced mask needs accel >= 1");
  if (acs < 0 || acs > w) throw std::invalid_argument("equispaced mask needs 0 <= acs <= width");
  SamplingMask m = blank_mask(h, w, frames, MaskPattern::equispaced, 0);
  const int acs_start = (w - acs) / 2;
  for (int t = 0; t < frames; ++t) {
    const int offset = t % accel;
    bool any = false;
    for (int c = offset; c < w; c += accel) {
      set_column(m, c, t);
      any = true;
    }
    for (int c = acs_start; c < acs_start + acs; ++c) {
      set_column(m, c, t);
      any = true;
    }
    if (!any) {
      set_column(m, w / 2, t);
    }
  }
  m.nominal_accel = m.measured_accel();
  return m;
}

SamplingMask make_vista_like_mask(int h, int w, int frames, double accel, std::uint64_t seed) {
  if (accel < 1.0) throw std::invalid_argument("vista-like mask needs accel >= 1");
  if (accel > w) {
    throw std::invalid_argument("vista-like mask: accel=" + std::to_string(accel) +
                                " exceeds width " + std::to_string(w));
  }
  SamplingMask m = blank_mask(h, w, frames, MaskPattern::vista_like, seed);
  const int n_per_frame = std::max<int>(1, static_cast<int>(std::lround(w / accel)));
  m.nominal_accel = static_cast<double>(w) / n_per_frame;
  const std::vector<double> density = vds_column_density(w);
  const int dc = w / 2;

  // Seeded tie-break jitter per (column, frame).
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter_dist(0.0, 1e-6);
  std::vector<double> jitter(static_cast<std::size_t>(w) * frames);
  for (double& j : jitter) j = jitter_dist(rng);

  // Greedy max-min placement in the (column, frame) plane; frame distance is
  // weighted so a column reused in a nearby frame scores poorly. The density
  // enters through its square root, keeping edge columns reachable once the
  // center is crowded.
  const double beta = 4.0;
  const double far = std::hypot(static_cast<double>(w), beta * frames);
  std::vector<double> weight(density.size());
  for (std::size_t i = 0; i < density.size(); ++i) weight[i] = std::sqrt(density[i]);
  std::vector<std::pair<int, int>> placed;  // (column, frame)
  placed.reserve(static_cast<std::size_t>(n_per_frame) * frames);

  for (int t = 0; t < frames; ++t) {
    std::vector<std::uint8_t> used(w, 0);
    auto commit = [&](int c) {
      used[c] = 1;
      placed.emplace_back(c, t);
      set_column(m, c, t);
    };
    commit(dc);
    for (int j = 1; j < n_per_frame; ++j) {
      double best_score = -1.0;
      int best_col = -1;
      for (int c = 0; c < w; ++c) {
        if (used[c]) continue;
        double dmin = far;
        for (const auto& [pc, pt] : placed) {
          const double d = std::hypot(static_cast<double>(c - pc), beta * (t - pt));
          dmin = std::min(dmin, d);
        }
        const double score =
            weight[c] * (dmin + jitter[static_cast<std::size_t>(c) * frames + t]);
        if (score > best_score) {
          best_score = score;
          best_col = c;
        }
      }
      if (best_col < 0) break;
      commit(best_col);
    }
  }
  return m;
}

SamplingMask make_full_mask(int h, int w, int frames) {
  SamplingMask m = blank_mask(h, w, frames, MaskPattern::full, 0);
  std::fill(m.bits.begin(), m.bits.end(), 1);
  m.nominal_accel = 1.0;
  return m;
}

KSpaceData::KSpaceData(int coils, int height, int width, int frames)
    : coils(coils), height(height), width(width), frames(frames) {
  if (coils <= 0 || height <= 0 || width <= 0 || frames <= 0) {
    throw std::invalid_argument("KSpaceData dimensions must be positive");
  }
  samples.assign(static_cast<std::size_t>(coils) * height * width * frames, Complex(0.0, 0.0));
}

double KSpaceData::norm() const {
  double acc = 0.0;
  for (const Complex& v : samples) acc += std::norm(v);
  return std::sqrt(acc);
}

KSpaceData ksub(const KSpaceData& a, const KSpaceData& b) {
  if (a.coils != b.coils || a.height != b.height || a.width != b.width || a.frames != b.frames) {
    throw std::invalid_argument("k-space shape mismatch");
  }
  KSpaceData out = a;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] -= b.samples[i];
  return out;
}

Complex kinner(const KSpaceData& a, const KSpaceData& b) {
  if (a.samples.size() != b.samples.size()) {
    throw std::invalid_argument("k-space shape mismatch");
  }
  Complex acc(0.0, 0.0);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    acc += std::conj(a.samples[i]) * b.samples[i];
  }
  return acc;
}

AcquisitionOperator::AcquisitionOperator(SamplingMask mask, std::optional<CoilSensitivities> csm)
    : mask_(std::move(mask)), csm_(std::move(csm)) {
  if (csm_) {
    if (csm_->height != mask_.height || csm_->width != mask_.width) {
      throw std::invalid_argument("coil map dimensions do not match the mask");
    }
    if (csm_->coils < 1) throw std::invalid_argument("need at least one coil");
  }
  fft_ = std::make_shared<FramewiseFft>(mask_.height, mask_.width, mask_.frames);
}

KSpaceData AcquisitionOperator::forward(const DynamicImage& x) const {
  if (x.height() != mask_.height || x.width() != mask_.width || x.frames() != mask_.frames) {
    throw std::invalid_argument("forward: image dimensions do not match the operator");
  }
  const int H = mask_.height, W = mask_.width, T = mask_.frames;
  const int C = coils();
  const double scale = fft_->unitary_scale();
  KSpaceData out(C, H, W, T);
  std::vector<Complex> tmp(x.size());
  std::vector<Complex> freq(x.size());

  for (int c = 0; c < C; ++c) {
    if (csm_) {
      for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
          const Complex s = csm_->at(c, h, w);
          const std::size_t base = frame_major_index(W, T, h, w, 0);
          for (int t = 0; t < T; ++t) tmp[base + t] = s * x.data()[base + t];
        }
      }
      fft_->forward(tmp.data(), freq.data());
    } else {
      fft_->forward(x.data(), freq.data());
    }
    // Write to the centered grid, zeroing unsampled locations.
    for (int hc = 0; hc < H; ++hc) {
      const int hu = (hc + (H + 1) / 2) % H;
      for (int wc = 0; wc < W; ++wc) {
        const int wu = (wc + (W + 1) / 2) % W;
        const std::size_t src = frame_major_index(W, T, hu, wu, 0);
        const std::size_t dst = out.index(c, hc, wc, 0);
        for (int t = 0; t < T; ++t) {
          out.samples[dst + t] =
              mask_.at(hc, wc, t) ? freq[src + t] * scale : Complex(0.0, 0.0);
        }
      }
    }
  }
  return out;
}

DynamicImage AcquisitionOperator::adjoint(const KSpaceData& b) const {
  if (b.height != mask_.height || b.width != mask_.width || b.frames != mask_.frames ||
      b.coils != coils()) {
    throw std::invalid_argument("adjoint: k-space dimensions do not match the operator");
  }
  const int H = mask_.height, W = mask_.width, T = mask_.frames;
  const int C = coils();
  const double scale = fft_->unitary_scale();
  DynamicImage out(H, W, T);
  std::vector<Complex> tmp(out.size());
  std::vector<Complex> img(out.size());

  for (int c = 0; c < C; ++c) {
    for (int hu = 0; hu < H; ++hu) {
      const int hc = (hu + H / 2) % H;
      for (int wu = 0; wu < W; ++wu) {
        const int wc = (wu + W / 2) % W;
        const std::size_t dst = frame_major_index(W, T, hu, wu, 0);
        const std::size_t src = b.index(c, hc, wc, 0);
        for (int t = 0; t < T; ++t) {
          tmp[dst + t] = mask_.at(hc, wc, t) ? b.samples[src + t] : Complex(0.0, 0.0);
        }
      }
    }
    fft_->backward(tmp.data(), img.data());
    if (csm_) {
      for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
          const Complex s = std::conj(csm_->at(c, h, w));
          const std::size_t base = frame_major_index(W, T, h, w, 0);
          for (int t = 0; t < T; ++t) out.data()[base + t] += s * img[base + t] * scale;
        }
      }
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += img[i] * scale;
    }
  }
  return out;
}

DynamicImage rss_combine(const std::vector<DynamicImage>& coil_images) {
  if (coil_images.empty()) throw std::invalid_argument("rss_combine needs at least one coil");
  const DynamicImage& first = coil_images.front();
  for (const DynamicImage& ci : coil_images) {
    if (!ci.same_shape(first)) throw std::invalid_argument("rss_combine: coil shape mismatch");
  }
  DynamicImage out(first.height(), first.width(), first.frames());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (const DynamicImage& ci : coil_images) acc += std::norm(ci.data()[i]);
    out.data()[i] = Complex(std::sqrt(acc), 0.0);
  }
  return out;
}

void save_mask_jotl(const std::string& path, const SamplingMask& mask) {
  JotlTensor t;
  t.dtype = JotlDtype::real64;
  t.dims = {static_cast<std::uint32_t>(mask.height), static_cast<std::uint32_t>(mask.width),
            static_cast<std::uint32_t>(mask.frames)};
  t.rvalues.resize(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) t.rvalues[i] = mask.bits[i] ? 1.0 : 0.0;
  save_jotl(path, t);
}

SamplingMask load_mask_jotl(const std::string& path) {
  JotlTensor t = load_jotl(path);
  if (t.dims.size() != 3 || t.dtype != JotlDtype::real64) {
    throw IoError("'" + path + "' is not a mask file (want real64 with dims {H,W,T})");
  }
  SamplingMask m;
  m.height = static_cast<int>(t.dims[0]);
  m.width = static_cast<int>(t.dims[1]);
  m.frames = static_cast<int>(t.dims[2]);
  m.pattern = MaskPattern::external;
  m.seed = 0;
  m.bits.resize(t.rvalues.size());
  for (std::size_t i = 0; i < t.rvalues.size(); ++i) m.bits[i] = t.rvalues[i] != 0.0 ? 1 : 0;
  m.nominal_accel = m.measured_accel();
  return m;
}

void save_kspace_jotl(const std::string& path, const KSpaceData& data) {
  JotlTensor t;
  t.dtype = JotlDtype::complex128;
  t.dims = {static_cast<std::uint32_t>(data.coils), static_cast<std::uint32_t>(data.height),
            static_cast<std::uint32_t>(data.width), static_cast<std::uint32_t>(data.frames)};
  t.cvalues = data.samples;
  save_jotl(path, t);
}

KSpaceData load_kspace_jotl(const std::string& path) {
  JotlTensor t = load_jotl(path);
  if (t.dims.size() != 4 || t.dtype == JotlDtype::real64) {
    throw IoError("'" + path + "' is not a k-space file (want complex with dims {C,H,W,T})");
  }
  KSpaceData data(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  static_cast<int>(t.dims[2]), static_cast<int>(t.dims[3]));
  data.samples = std::move(t.cvalues);
  return data;
}

void save_csm_jotl(const std::string& path, const CoilSensitivities& csm) {
  JotlTensor t;
  t.dtype = JotlDtype::complex128;
  t.dims = {static_cast<std::uint32_t>(csm.coils), static_cast<std::uint32_t>(csm.height),
            static_cast<std::uint32_t>(csm.width)};
  t.cvalues = csm.maps;
  save_jotl(path, t);
}

CoilSensitivities load_csm_jotl(const std::string& path) {
  JotlTensor t = load_jotl(path);
  if (t.dims.size() != 3 || t.dtype == JotlDtype::real64) {
    throw IoError("'" + path + "' is not a coil map file (want complex with dims {C,H,W})");
  }
  CoilSensitivities csm;
  csm.coils = static_cast<int>(t.dims[0]);
  csm.height = static_cast<int>(t.dims[1]);
  csm.width = static_cast<int>(t.dims[2]);
  csm.maps = std::move(t.cvalues);
  return csm;
}

}  // namespace jotlas
