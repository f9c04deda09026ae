#include "jotlas/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jotlas {

double psnr(std::span<const double> x, std::span<const double> reference) {
  if (x.size() != reference.size() || x.empty()) {
    throw std::invalid_argument("psnr: size mismatch");
  }
  double peak = 0.0;
  double sq_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    peak = std::max(peak, std::abs(reference[i]));
    const double d = x[i] - reference[i];
    sq_err += d * d;
  }
  if (sq_err == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sq_err / static_cast<double>(x.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const DynamicImage& x, const DynamicImage& reference) {
  if (!x.same_shape(reference)) throw std::invalid_argument("psnr: shape mismatch");
  std::vector<double> xm(x.size()), rm(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm[i] = std::abs(x.data()[i]);
    rm[i] = std::abs(reference.data()[i]);
  }
  return psnr(std::span<const double>(xm), std::span<const double>(rm));
}

namespace {

// Summed-area table; sums(i, j) holds the sum over rows < i, cols < j.
Eigen::MatrixXd integral_image(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m.rows() + 1, m.cols() + 1);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double row_acc = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row_acc += m(i, j);
      s(i + 1, j + 1) = s(i, j + 1) + row_acc;
    }
  }
  return s;
}

double window_sum(const Eigen::MatrixXd& s, Eigen::Index r0, Eigen::Index r1, Eigen::Index c0,
                  Eigen::Index c1) {
  return s(r1 + 1, c1 + 1) - s(r0, c1 + 1) - s(r1 + 1, c0) + s(r0, c0);
}

}  // namespace

double ssim_frame(const Eigen::MatrixXd& x, const Eigen::MatrixXd& reference, double peak) {
  if (x.rows() != reference.rows() || x.cols() != reference.cols()) {
    throw std::invalid_argument("ssim_frame: shape mismatch");
  }
  const double L = peak > 0.0 ? peak : 1.0;
  const double c1 = (0.01 * L) * (0.01 * L);
  const double c2 = (0.03 * L) * (0.03 * L);
  const int radius = 3;  // 7x7 window

  const Eigen::MatrixXd sx = integral_image(x);
  const Eigen::MatrixXd sy = integral_image(reference);
  const Eigen::MatrixXd sxx = integral_image(x.cwiseProduct(x));
  const Eigen::MatrixXd syy = integral_image(reference.cwiseProduct(reference));
  const Eigen::MatrixXd sxy = integral_image(x.cwiseProduct(reference));

  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index r0 = std::max<Eigen::Index>(0, i - radius);
    const Eigen::Index r1 = std::min<Eigen::Index>(x.rows() - 1, i + radius);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::Index c0 = std::max<Eigen::Index>(0, j - radius);
      const Eigen::Index cc1 = std::min<Eigen::Index>(x.cols() - 1, j + radius);
      const double n = static_cast<double>((r1 - r0 + 1) * (cc1 - c0 + 1));
      const double mx = window_sum(sx, r0, r1, c0, cc1) / n;
      const double my = window_sum(sy, r0, r1, c0, cc1) / n;
      const double vx = window_sum(sxx, r0, r1, c0, cc1) / n - mx * mx;
      const double vy = window_sum(syy, r0, r1, c0, cc1) / n - my * my;
      const double cxy = window_sum(sxy, r0, r1, c0, cc1) / n - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      acc += num / den;
    }
  }
  return acc / static_cast<double>(x.rows() * x.cols());
}

double ssim(const DynamicImage& x, const DynamicImage& reference) {
  if (!x.same_shape(reference)) throw std::invalid_argument("ssim: shape mismatch");
  const double peak = reference.max_abs();
  double acc = 0.0;
  for (int t = 0; t < x.frames(); ++t) {
    acc += ssim_frame(magnitude_frame(x, t), magnitude_frame(reference, t), peak);
  }
  return acc / static_cast<double>(x.frames());
}

Eigen::MatrixXd magnitude_frame(const DynamicImage& x, int t) {
  Eigen::MatrixXd m(x.height(), x.width());
  for (int h = 0; h < x.height(); ++h) {
    for (int w = 0; w < x.width(); ++w) {
      m(h, w) = std::abs(x(h, w, t));
    }
  }
  return m;
}

}  // namespace jotlas
