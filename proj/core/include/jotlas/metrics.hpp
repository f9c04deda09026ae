#pragma once

#include <span>

#include <Eigen/Dense>

#include "jotlas/tensor.hpp"

namespace jotlas {

/// 10*log10(peak^2 / MSE) with peak taken from the reference. Returns +inf
/// when the inputs are identical. Complex tensors are compared by magnitude.
double psnr(std::span<const double> x, std::span<const double> reference);
double psnr(const DynamicImage& x, const DynamicImage& reference);

/// Mean over frames of single-frame SSIM with a 7x7 uniform window
/// (truncated at borders), C1=(0.01 L)^2, C2=(0.03 L)^2, L = max magnitude
/// of the reference tensor. Complex tensors are compared by magnitude.
double ssim(const DynamicImage& x, const DynamicImage& reference);
double ssim_frame(const Eigen::MatrixXd& x, const Eigen::MatrixXd& reference, double peak);

/// |x(:,:,t)| as a real matrix.
Eigen::MatrixXd magnitude_frame(const DynamicImage& x, int t);

}  // namespace jotlas
