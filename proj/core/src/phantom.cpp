#include "jotlas/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace jotlas {

PhantomKind phantom_kind_from_string(const std::string& name) {
  if (name == "moving-ellipses") return PhantomKind::moving_ellipses;
  if (name == "lowrank-plus-sparse") return PhantomKind::lowrank_plus_sparse;
  if (name == "static") return PhantomKind::static_scene;
  throw std::invalid_argument("unknown phantom kind '" + name +
                              "' (allowed: moving-ellipses, lowrank-plus-sparse, static)");
}

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::moving_ellipses: return "moving-ellipses";
    case PhantomKind::lowrank_plus_sparse: return "lowrank-plus-sparse";
    case PhantomKind::static_scene: return "static";
  }
  return "?";
}

namespace {

struct Ellipse {
  double ch, cw;        // center
  double a, b;          // semi-axes
  double angle;         // orientation
  double intensity;
  double motion_phase;  // temporal phase offset
  double motion_dir;    // direction of oscillation
};

// Smooth profile: intensity * (1 - q)^2 inside the unit quadratic form.
void add_ellipse(std::vector<double>& frame, int h, int w, const Ellipse& e, double dch,
                 double dcw) {
  const double ca = std::cos(e.angle);
  const double sa = std::sin(e.angle);
  const double ch = e.ch + dch;
  const double cw = e.cw + dcw;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double dh = i - ch;
      const double dw = j - cw;
      const double u = (dh * ca + dw * sa) / e.a;
      const double v = (-dh * sa + dw * ca) / e.b;
      const double q = u * u + v * v;
      if (q < 1.0) {
        frame[static_cast<std::size_t>(i) * w + j] += e.intensity * (1.0 - q) * (1.0 - q);
      }
    }
  }
}

std::vector<double> render_ellipse_frame(const PhantomSpec& spec,
                                         const std::vector<Ellipse>& ellipses, int t) {
  std::vector<double> frame(static_cast<std::size_t>(spec.height) * spec.width, 0.0);
  Ellipse body;
  body.ch = spec.height / 2.0;
  body.cw = spec.width / 2.0;
  body.a = 0.44 * spec.height;
  body.b = 0.44 * spec.width;
  body.angle = 0.0;
  body.intensity = 0.3;
  add_ellipse(frame, spec.height, spec.width, body, 0.0, 0.0);
  for (const Ellipse& e : ellipses) {
    const double phase = 2.0 * std::numbers::pi * t / spec.frames + e.motion_phase;
    const double off = spec.motion_amplitude * std::sin(phase);
    add_ellipse(frame, spec.height, spec.width, e, off * std::sin(e.motion_dir),
                off * std::cos(e.motion_dir));
  }
  return frame;
}

std::vector<Ellipse> draw_ellipses(const PhantomSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Ellipse> ellipses;
  const double scale = std::min(spec.height, spec.width);
  for (int i = 0; i < spec.n_ellipses; ++i) {
    Ellipse e;
    e.ch = spec.height * (0.25 + 0.5 * uni(rng));
    e.cw = spec.width * (0.25 + 0.5 * uni(rng));
    e.a = scale * (0.06 + 0.10 * uni(rng));
    e.b = scale * (0.06 + 0.10 * uni(rng));
    e.angle = std::numbers::pi * uni(rng);
    e.intensity = 0.4 + 0.6 * uni(rng);
    e.motion_phase = 2.0 * std::numbers::pi * uni(rng);
    e.motion_dir = 2.0 * std::numbers::pi * uni(rng);
    ellipses.push_back(e);
  }
  return ellipses;
}

void normalize_max_abs(DynamicImage& img) {
  const double peak = img.max_abs();
  if (peak > 0.0) {
    for (Complex& v : img.values()) v /= peak;
  }
}

DynamicImage make_moving_ellipses(const PhantomSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::vector<Ellipse> ellipses = draw_ellipses(spec, rng);
  DynamicImage img(spec.height, spec.width, spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    const std::vector<double> frame = render_ellipse_frame(spec, ellipses, t);
    for (int i = 0; i < spec.height; ++i) {
      for (int j = 0; j < spec.width; ++j) {
        img(i, j, t) = Complex(frame[static_cast<std::size_t>(i) * spec.width + j], 0.0);
      }
    }
  }
  normalize_max_abs(img);
  return img;
}

DynamicImage make_static(const PhantomSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::vector<Ellipse> ellipses = draw_ellipses(spec, rng);
  const std::vector<double> frame = render_ellipse_frame(spec, ellipses, 0);
  DynamicImage img(spec.height, spec.width, spec.frames);
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      const Complex v(frame[static_cast<std::size_t>(i) * spec.width + j], 0.0);
      for (int t = 0; t < spec.frames; ++t) img(i, j, t) = v;
    }
  }
  normalize_max_abs(img);
  return img;
}

std::vector<double> smooth_map(int h, int w, int blobs, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> m(static_cast<std::size_t>(h) * w, 0.0);
  for (int b = 0; b < blobs; ++b) {
    const double ch = h * (0.2 + 0.6 * uni(rng));
    const double cw = w * (0.2 + 0.6 * uni(rng));
    const double sigma = std::min(h, w) * (0.12 + 0.18 * uni(rng));
    const double inten = amplitude * (0.5 + 0.5 * uni(rng));
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double d2 = (i - ch) * (i - ch) + (j - cw) * (j - cw);
        m[static_cast<std::size_t>(i) * w + j] += inten * std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }
  return m;
}

// Rank-3 Casorati background (three spatial maps times the temporal modes
// {1, cos, sin}) plus blinking single-pixel dots. The dots sit at pixels
// carved out of the spatial maps and blink at temporal frequency 2, so they
// stay orthogonal to the background and the best rank-3 approximation leaves
// exactly the dot voxels as residual.
DynamicImage make_lowrank_plus_sparse(const PhantomSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int H = spec.height, W = spec.width, T = spec.frames;

  std::vector<double> u1 = smooth_map(H, W, 4, 1.0, rng);
  std::vector<double> u2 = smooth_map(H, W, 2, 0.30, rng);
  std::vector<double> u3 = smooth_map(H, W, 2, 0.30, rng);

  const int margin_h = H > 8 ? 4 : 0;
  const int margin_w = W > 8 ? 4 : 0;
  const int dots = std::min<int>(std::max(0, spec.n_ellipses),
                                 (H - 2 * margin_h) * (W - 2 * margin_w) / 2);
  std::vector<std::pair<int, int>> dot_pos;
  while (static_cast<int>(dot_pos.size()) < dots) {
    const int i = margin_h + std::min(H - 2 * margin_h - 1,
                                      static_cast<int>(uni(rng) * (H - 2 * margin_h)));
    const int j = margin_w + std::min(W - 2 * margin_w - 1,
                                      static_cast<int>(uni(rng) * (W - 2 * margin_w)));
    bool taken = false;
    for (const auto& [pi, pj] : dot_pos) taken = taken || (pi == i && pj == j);
    if (!taken) dot_pos.emplace_back(i, j);
  }
  for (const auto& [i, j] : dot_pos) {
    const std::size_t p = static_cast<std::size_t>(i) * W + j;
    u1[p] = u2[p] = u3[p] = 0.0;
  }

  // sigma_3 of the background bounds the dot amplitudes from above so the
  // dots never enter the leading rank-3 subspace.
  Eigen::MatrixXd uu(static_cast<Eigen::Index>(H) * W, 3);
  for (Eigen::Index p = 0; p < uu.rows(); ++p) {
    uu(p, 0) = u1[static_cast<std::size_t>(p)];
    uu(p, 1) = u2[static_cast<std::size_t>(p)];
    uu(p, 2) = u3[static_cast<std::size_t>(p)];
  }
  Eigen::MatrixXd vv(T, 3);
  for (int t = 0; t < T; ++t) {
    const double w0 = 2.0 * std::numbers::pi * t / T;
    vv(t, 0) = 1.0;
    vv(t, 1) = std::cos(w0);
    vv(t, 2) = std::sin(w0);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> small_svd(uu * vv.transpose());
  const Eigen::VectorXd bg_sv = small_svd.singularValues();
  const double sigma3 = bg_sv.size() >= 3 ? bg_sv(2) : 0.0;

  std::vector<double> dot_amp(dot_pos.size());
  std::vector<double> dot_phase(dot_pos.size());
  const double blink_norm = std::sqrt(T / 2.0);
  for (std::size_t d = 0; d < dot_pos.size(); ++d) {
    dot_amp[d] = 0.3 + 0.3 * uni(rng);
    dot_phase[d] = 2.0 * std::numbers::pi * uni(rng);
    if (sigma3 > 0.0 && dot_amp[d] * blink_norm > 0.8 * sigma3) {
      dot_amp[d] = 0.8 * sigma3 / blink_norm;
    }
  }

  DynamicImage img(H, W, T);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const std::size_t p = static_cast<std::size_t>(i) * W + j;
      for (int t = 0; t < T; ++t) {
        img(i, j, t) = Complex(u1[p] * vv(t, 0) + u2[p] * vv(t, 1) + u3[p] * vv(t, 2), 0.0);
      }
    }
  }
  for (std::size_t d = 0; d < dot_pos.size(); ++d) {
    const auto& [i, j] = dot_pos[d];
    for (int t = 0; t < T; ++t) {
      const double blink = dot_amp[d] * std::cos(4.0 * std::numbers::pi * t / T + dot_phase[d]);
      img(i, j, t) = Complex(blink, 0.0);
    }
  }
  normalize_max_abs(img);
  return img;
}

}  // namespace

DynamicImage make_phantom(const PhantomSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0 || spec.frames <= 0) {
    throw std::invalid_argument("phantom dimensions must be positive");
  }
  if (spec.motion_amplitude < 0.0) {
    throw std::invalid_argument("phantom motion_amplitude must be >= 0");
  }
  switch (spec.kind) {
    case PhantomKind::moving_ellipses: return make_moving_ellipses(spec);
    case PhantomKind::lowrank_plus_sparse: return make_lowrank_plus_sparse(spec);
    case PhantomKind::static_scene: return make_static(spec);
  }
  throw std::invalid_argument("unknown phantom kind");
}

CoilSensitivities make_synthetic_csm(int height, int width, int coils, std::uint64_t seed) {
  if (coils < 1) throw std::invalid_argument("make_synthetic_csm needs coils >= 1");
  if (height <= 0 || width <= 0) throw std::invalid_argument("csm dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  CoilSensitivities csm;
  csm.coils = coils;
  csm.height = height;
  csm.width = width;
  csm.maps.assign(static_cast<std::size_t>(coils) * height * width, Complex(0.0, 0.0));

  const double sigma_base = 0.55 * std::hypot(static_cast<double>(height), width);
  for (int c = 0; c < coils; ++c) {
    const double theta = 2.0 * std::numbers::pi * c / coils + 0.4 * (uni(rng) - 0.5);
    const double ch = height / 2.0 * (1.0 + 1.1 * std::sin(theta));
    const double cw = width / 2.0 * (1.0 + 1.1 * std::cos(theta));
    const double sigma = sigma_base * (0.9 + 0.2 * uni(rng));
    const double alpha = (uni(rng) - 0.5) * 2.0 * std::numbers::pi / height;
    const double beta = (uni(rng) - 0.5) * 2.0 * std::numbers::pi / width;
    const double phi0 = 2.0 * std::numbers::pi * c / coils;
    for (int i = 0; i < height; ++i) {
      for (int j = 0; j < width; ++j) {
        const double d2 = (i - ch) * (i - ch) + (j - cw) * (j - cw);
        const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
        const double phase = alpha * i + beta * j + phi0;
        csm.at(c, i, j) = mag * Complex(std::cos(phase), std::sin(phase));
      }
    }
  }
  // Normalize so the coil energies sum to one at every pixel.
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      double acc = 0.0;
      for (int c = 0; c < coils; ++c) acc += std::norm(csm.at(c, i, j));
      const double den = std::sqrt(acc);
      for (int c = 0; c < coils; ++c) csm.at(c, i, j) /= den;
    }
  }
  return csm;
}

}  // namespace jotlas
