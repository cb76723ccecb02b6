#pragma once

#include <string>
#include <vector>

#include "idr/image.hpp"

namespace idr {

// 10*log10(peak^2/MSE) on inputs clamped to [0,peak]. Identical images
// return +infinity as the sentinel.
double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), C1=0.01^2,
// C2=0.03^2 on the [0,1] range, valid windows only, channels averaged.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

struct MetricReport {
    std::vector<std::string> file;
    std::vector<double> psnr;
    std::vector<double> ssim;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;

    void add(const std::string& name, double p, double s);
    void finalize();
};

}  // namespace idr
