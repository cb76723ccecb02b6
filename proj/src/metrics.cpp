#include "idr/metrics.hpp"

#include <cmath>
#include <limits>

#include "idr/errors.hpp"

namespace idr {
namespace {

void require_match(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": image shapes differ (" + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + "x" + std::to_string(a.c) + " vs " + std::to_string(b.h) +
                         "x" + std::to_string(b.w) + "x" + std::to_string(b.c) + ")");
}

constexpr int kWin = 11;

// normalized 1-d Gaussian taps, sigma 1.5
const double* ssim_window() {
    static double g[kWin];
    static bool init = false;
    if (!init) {
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - (kWin - 1) / 2.0;
            g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += g[i];
        }
        for (int i = 0; i < kWin; ++i) g[i] /= sum;
        init = true;
    }
    return g;
}

// separable valid-mode weighted filter: (h, w) -> (h - kWin + 1, w - kWin + 1)
std::vector<double> window_filter(const std::vector<double>& in, int h, int w) {
    const double* g = ssim_window();
    const int ow = w - kWin + 1, oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[k] * in[static_cast<std::size_t>(y) * w + x + k];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

double clamp01d(float v) { return std::min(1.0, std::max(0.0, static_cast<double>(v))); }

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak) {
    require_match(a, b, "psnr");
    if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
    double se = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double av = std::min(peak, std::max(0.0, static_cast<double>(a.v[i])));
        const double bv = std::min(peak, std::max(0.0, static_cast<double>(b.v[i])));
        const double d = av - bv;
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.v.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    require_match(a, b, "ssim");
    if (a.h < kWin || a.w < kWin)
        throw ShapeError("ssim: image " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " is smaller than the " + std::to_string(kWin) + "x" + std::to_string(kWin) +
                         " window");
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;

    const std::size_t plane = a.pixels();
    double total = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < a.c; ++ch) {
        std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            const double xv = clamp01d(a.v[static_cast<std::size_t>(ch) * plane + i]);
            const double yv = clamp01d(b.v[static_cast<std::size_t>(ch) * plane + i]);
            x[i] = xv;
            y[i] = yv;
            xx[i] = xv * xv;
            yy[i] = yv * yv;
            xy[i] = xv * yv;
        }
        const auto mu_x = window_filter(x, a.h, a.w);
        const auto mu_y = window_filter(y, a.h, a.w);
        const auto m_xx = window_filter(xx, a.h, a.w);
        const auto m_yy = window_filter(yy, a.h, a.w);
        const auto m_xy = window_filter(xy, a.h, a.w);
        for (std::size_t i = 0; i < mu_x.size(); ++i) {
            const double ux = mu_x[i], uy = mu_y[i];
            const double px = ux * ux, py = uy * uy, pxy = ux * uy;
            const double vx = m_xx[i] - px;
            const double vy = m_yy[i] - py;
            const double cxy = m_xy[i] - pxy;
            // numerator terms mirror the denominator's expression shape so
            // ssim(a,a) lands on exactly 1.0 in floating point
            const double num = ((pxy + pxy) + C1) * ((cxy + cxy) + C2);
            const double den = ((px + py) + C1) * ((vx + vy) + C2);
            total += num / den;
        }
        count += mu_x.size();
    }
    return total / static_cast<double>(count);
}

void MetricReport::add(const std::string& name, double p, double s) {
    file.push_back(name);
    psnr.push_back(p);
    ssim.push_back(s);
}

void MetricReport::finalize() {
    mean_psnr = 0.0;
    mean_ssim = 0.0;
    if (psnr.empty()) return;
    for (double p : psnr) mean_psnr += p;
    for (double s : ssim) mean_ssim += s;
    mean_psnr /= static_cast<double>(psnr.size());
    mean_ssim /= static_cast<double>(ssim.size());
}

}  // namespace idr
