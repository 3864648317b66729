#pragma once

#include "rmf/image.hpp"

namespace rmf {

inline constexpr double kPsnrCap = 99.0;

/// -10 log10(MSE) for images in [0, 1]; 99 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) and all
/// three channels, K1 = 0.01, K2 = 0.03, dynamic range 1. Both sides must
/// be at least 11 pixels.
double ssim(const Image& a, const Image& b);

}  // namespace rmf
