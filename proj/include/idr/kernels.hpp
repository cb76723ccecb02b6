#pragma once

// Data-parallel kernels behind the tensor ops. Every kernel is written as a
// set of independent tasks with a fixed per-element accumulation order, so
// the parallel path is bit-identical to sequential execution for any thread
// count. Reductions use a fixed block partition combined in block order.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace idr::kernels {

// Effective worker count. 1 runs everything on the calling thread.
int threads();
// 0 = auto-detect hardware threads, 1 = sequential, n = exactly n.
void set_threads(int n);

namespace detail {

#if defined(_OPENMP)
void run_tasks_omp(std::int64_t count, int nthreads, void* ctx, void (*body)(void*, std::int64_t));
#endif

template <typename F>
inline void parallel_tasks(std::int64_t count, F&& fn) {
    const int t = threads();
#if defined(_OPENMP)
    if (t > 1 && count > 1) {
        auto thunk = [](void* ctx, std::int64_t i) { (*static_cast<F*>(ctx))(i); };
        run_tasks_omp(count, t, &fn, thunk);
        return;
    }
#endif
    for (std::int64_t i = 0; i < count; ++i) fn(i);
}

inline constexpr std::int64_t kBlock = 4096;

inline std::int64_t block_count(std::int64_t n) { return (n + kBlock - 1) / kBlock; }

}  // namespace detail

// Deterministic sum: per-block serial partials combined in block order,
// independent of the thread count.
template <typename T, typename Term>
T blocked_sum(std::int64_t n, Term&& term) {
    const std::int64_t nb = detail::block_count(n);
    std::vector<T> partial(static_cast<std::size_t>(nb), T(0));
    detail::parallel_tasks(nb, [&](std::int64_t k) {
        const std::int64_t lo = k * detail::kBlock;
        const std::int64_t hi = std::min(n, lo + detail::kBlock);
        T s = 0;
        for (std::int64_t i = lo; i < hi; ++i) s += term(i);
        partial[static_cast<std::size_t>(k)] = s;
    });
    T total = 0;
    for (std::int64_t k = 0; k < nb; ++k) total += partial[static_cast<std::size_t>(k)];
    return total;
}

template <typename F>
void parallel_elementwise(std::int64_t n, F&& fn) {
    detail::parallel_tasks(detail::block_count(n), [&](std::int64_t k) {
        const std::int64_t lo = k * detail::kBlock;
        const std::int64_t hi = std::min(n, lo + detail::kBlock);
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
}

struct Conv2dDims {
    int n;   // batch
    int ci;  // input channels
    int h;   // spatial height (preserved by same-padding)
    int w;   // spatial width
    int co;  // output channels
    int k;   // kernel extent, odd
};

namespace detail {

// Input planes copied into a zero-padded scratch so the tap loops need no
// boundary clipping. Pad width is k/2 on every side.
template <typename T>
std::vector<T> pad_planes(const T* src, std::int64_t planes, int h, int w, int p) {
    const int ph = h + 2 * p, pw = w + 2 * p;
    std::vector<T> pad(static_cast<std::size_t>(planes) * ph * pw, T(0));
    parallel_tasks(planes, [&](std::int64_t pl) {
        const T* sp = src + static_cast<std::size_t>(pl) * h * w;
        T* dp = pad.data() + static_cast<std::size_t>(pl) * ph * pw;
        for (int y = 0; y < h; ++y)
            std::copy_n(sp + static_cast<std::size_t>(y) * w, w,
                        dp + (static_cast<std::size_t>(y) + p) * pw + p);
    });
    return pad;
}

// 3x3 fast path: all nine taps applied in one sweep per row. The per-element
// accumulation chain is bias, then taps in (ci,ky,kx) order — identical to
// the generic path and the hand reference.
template <typename T>
void conv2d_forward_k3(const T* in, const T* w, const T* bias, T* out, const Conv2dDims& d) {
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    const int pw = d.w + 2;
    const std::vector<T> pad = pad_planes(in, static_cast<std::int64_t>(d.n) * d.ci, d.h, d.w, 1);
    parallel_tasks(static_cast<std::int64_t>(d.n) * d.co, [&](std::int64_t task) {
        const int n = static_cast<int>(task / d.co);
        const int co = static_cast<int>(task % d.co);
        T* op = out + (static_cast<std::size_t>(n) * d.co + co) * hw;
        const T bv = bias ? bias[co] : T(0);
        for (std::size_t i = 0; i < hw; ++i) op[i] = bv;
        for (int ci = 0; ci < d.ci; ++ci) {
            const T* pp = pad.data() + (static_cast<std::size_t>(n) * d.ci + ci) * (d.h + 2) * pw;
            const T* __restrict wp = w + (static_cast<std::size_t>(co) * d.ci + ci) * 9;
            for (int oy = 0; oy < d.h; ++oy) {
                const T* __restrict r0 = pp + static_cast<std::size_t>(oy) * pw;
                const T* __restrict r1 = r0 + pw;
                const T* __restrict r2 = r1 + pw;
                T* __restrict orow = op + static_cast<std::size_t>(oy) * d.w;
                for (int ox = 0; ox < d.w; ++ox) {
                    T acc = orow[ox];
                    acc += wp[0] * r0[ox];
                    acc += wp[1] * r0[ox + 1];
                    acc += wp[2] * r0[ox + 2];
                    acc += wp[3] * r1[ox];
                    acc += wp[4] * r1[ox + 1];
                    acc += wp[5] * r1[ox + 2];
                    acc += wp[6] * r2[ox];
                    acc += wp[7] * r2[ox + 1];
                    acc += wp[8] * r2[ox + 2];
                    orow[ox] = acc;
                }
            }
        }
    });
}

template <typename T>
void conv2d_forward_generic(const T* in, const T* w, const T* bias, T* out, const Conv2dDims& d) {
    const int p = d.k / 2;
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    parallel_tasks(static_cast<std::int64_t>(d.n) * d.co, [&](std::int64_t task) {
        const int n = static_cast<int>(task / d.co);
        const int co = static_cast<int>(task % d.co);
        T* op = out + (static_cast<std::size_t>(n) * d.co + co) * hw;
        const T bv = bias ? bias[co] : T(0);
        for (std::size_t i = 0; i < hw; ++i) op[i] = bv;
        for (int ci = 0; ci < d.ci; ++ci) {
            const T* ip = in + (static_cast<std::size_t>(n) * d.ci + ci) * hw;
            const T* wp = w + (static_cast<std::size_t>(co) * d.ci + ci) * d.k * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
                const int oy0 = std::max(0, p - ky);
                const int oy1 = std::min(d.h, d.h + p - ky);
                for (int kx = 0; kx < d.k; ++kx) {
                    const T wv = wp[ky * d.k + kx];
                    const int ox0 = std::max(0, p - kx);
                    const int ox1 = std::min(d.w, d.w + p - kx);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const T* __restrict irow = ip + static_cast<std::size_t>(oy + ky - p) * d.w + (kx - p);
                        T* __restrict orow = op + static_cast<std::size_t>(oy) * d.w;
                        for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox];
                    }
                }
            }
        }
    });
}

}  // namespace detail

// out[n,co,y,x] = bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * in[n,ci,y+ky-p,x+kx-p]
// Zero padding. Accumulation order per output element is (ci,ky,kx).
template <typename T>
void conv2d_forward(const T* in, const T* w, const T* bias, T* out, const Conv2dDims& d) {
    if (d.k == 3)
        detail::conv2d_forward_k3(in, w, bias, out, d);
    else
        detail::conv2d_forward_generic(in, w, bias, out, d);
}

namespace detail {

// 3x3 fast path over padded upstream gradients. Per din element the taps
// arrive in (co,ky,kx) order; tap (ky,kx) reads the padded dout plane at row
// iy+2-ky, column ix+2-kx.
template <typename T>
void conv2d_backward_input_k3(const T* dout, const T* w, T* din, const Conv2dDims& d) {
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    const int pw = d.w + 2;
    const std::vector<T> pad = pad_planes(dout, static_cast<std::int64_t>(d.n) * d.co, d.h, d.w, 1);
    parallel_tasks(static_cast<std::int64_t>(d.n) * d.ci, [&](std::int64_t task) {
        const int n = static_cast<int>(task / d.ci);
        const int ci = static_cast<int>(task % d.ci);
        T* gp = din + (static_cast<std::size_t>(n) * d.ci + ci) * hw;
        for (int co = 0; co < d.co; ++co) {
            const T* pp = pad.data() + (static_cast<std::size_t>(n) * d.co + co) * (d.h + 2) * pw;
            const T* __restrict wp = w + (static_cast<std::size_t>(co) * d.ci + ci) * 9;
            for (int iy = 0; iy < d.h; ++iy) {
                const T* __restrict r0 = pp + static_cast<std::size_t>(iy + 2) * pw;  // ky = 0
                const T* __restrict r1 = r0 - pw;                                     // ky = 1
                const T* __restrict r2 = r1 - pw;                                     // ky = 2
                T* __restrict grow = gp + static_cast<std::size_t>(iy) * d.w;
                for (int ix = 0; ix < d.w; ++ix) {
                    T acc = grow[ix];
                    acc += wp[0] * r0[ix + 2];
                    acc += wp[1] * r0[ix + 1];
                    acc += wp[2] * r0[ix];
                    acc += wp[3] * r1[ix + 2];
                    acc += wp[4] * r1[ix + 1];
                    acc += wp[5] * r1[ix];
                    acc += wp[6] * r2[ix + 2];
                    acc += wp[7] * r2[ix + 1];
                    acc += wp[8] * r2[ix];
                    grow[ix] = acc;
                }
            }
        }
    });
}

template <typename T>
void conv2d_backward_input_generic(const T* dout, const T* w, T* din, const Conv2dDims& d) {
    const int p = d.k / 2;
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    parallel_tasks(static_cast<std::int64_t>(d.n) * d.ci, [&](std::int64_t task) {
        const int n = static_cast<int>(task / d.ci);
        const int ci = static_cast<int>(task % d.ci);
        T* gp = din + (static_cast<std::size_t>(n) * d.ci + ci) * hw;
        for (int co = 0; co < d.co; ++co) {
            const T* dp = dout + (static_cast<std::size_t>(n) * d.co + co) * hw;
            const T* wp = w + (static_cast<std::size_t>(co) * d.ci + ci) * d.k * d.k;
            for (int ky = 0; ky < d.k; ++ky) {
                const int iy0 = std::max(0, ky - p);
                const int iy1 = std::min(d.h, d.h + ky - p);
                for (int kx = 0; kx < d.k; ++kx) {
                    const T wv = wp[ky * d.k + kx];
                    const int ix0 = std::max(0, kx - p);
                    const int ix1 = std::min(d.w, d.w + kx - p);
                    for (int iy = iy0; iy < iy1; ++iy) {
                        const T* __restrict drow = dp + static_cast<std::size_t>(iy - ky + p) * d.w + (p - kx);
                        T* __restrict grow = gp + static_cast<std::size_t>(iy) * d.w;
                        for (int ix = ix0; ix < ix1; ++ix) grow[ix] += wv * drow[ix];
                    }
                }
            }
        }
    });
}

}  // namespace detail

// din[n,ci,y,x] += sum_{co,ky,kx} w[co,ci,ky,kx] * dout[n,co,y-ky+p,x-kx+p]
template <typename T>
void conv2d_backward_input(const T* dout, const T* w, T* din, const Conv2dDims& d) {
    if (d.k == 3)
        detail::conv2d_backward_input_k3(dout, w, din, d);
    else
        detail::conv2d_backward_input_generic(dout, w, din, d);
}

namespace detail {

// Eight-lane strided row dot product. The lane assignment depends only on
// the element position within the row segment, so the summation order is
// fixed for any thread count.
template <typename T>
inline void lane_dot_row(const T* __restrict a, const T* __restrict b, int n, T* __restrict lanes) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        lanes[0] += a[i + 0] * b[i + 0];
        lanes[1] += a[i + 1] * b[i + 1];
        lanes[2] += a[i + 2] * b[i + 2];
        lanes[3] += a[i + 3] * b[i + 3];
        lanes[4] += a[i + 4] * b[i + 4];
        lanes[5] += a[i + 5] * b[i + 5];
        lanes[6] += a[i + 6] * b[i + 6];
        lanes[7] += a[i + 7] * b[i + 7];
    }
    for (int j = 0; i < n; ++i, ++j) lanes[j] += a[i] * b[i];
}

template <typename T>
inline void lane_sum_row(const T* __restrict a, int n, T* __restrict lanes) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        lanes[0] += a[i + 0];
        lanes[1] += a[i + 1];
        lanes[2] += a[i + 2];
        lanes[3] += a[i + 3];
        lanes[4] += a[i + 4];
        lanes[5] += a[i + 5];
        lanes[6] += a[i + 6];
        lanes[7] += a[i + 7];
    }
    for (int j = 0; i < n; ++i, ++j) lanes[j] += a[i];
}

template <typename T>
inline T combine_lanes(const T* lanes) {
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
           ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

// Dots of a against b shifted by 0/1/2, all in one pass. Lane assignment
// depends only on the element index, so the order is thread-count invariant.
template <typename T>
inline void lane_dot_row3(const T* __restrict a, const T* __restrict b, int n, T* __restrict l0,
                          T* __restrict l1, T* __restrict l2) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        for (int j = 0; j < 8; ++j) l0[j] += a[i + j] * b[i + j];
        for (int j = 0; j < 8; ++j) l1[j] += a[i + j] * b[i + j + 1];
        for (int j = 0; j < 8; ++j) l2[j] += a[i + j] * b[i + j + 2];
    }
    for (int j = 0; i < n; ++i, ++j) {
        l0[j] += a[i] * b[i];
        l1[j] += a[i] * b[i + 1];
        l2[j] += a[i] * b[i + 2];
    }
}

}  // namespace detail

namespace detail {

// 3x3 fast path: per (co,ci) pair one sweep over the batch accumulates all
// nine taps into fixed 8-lane partials over the padded input plane.
template <typename T>
void conv2d_backward_params_k3(const T* dout, const T* pad, T* dw, const Conv2dDims& d) {
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    const int pw = d.w + 2;
    const std::size_t phw = static_cast<std::size_t>(d.h + 2) * pw;
    parallel_tasks(static_cast<std::int64_t>(d.co) * d.ci, [&](std::int64_t task) {
        const int co = static_cast<int>(task / d.ci);
        const int ci = static_cast<int>(task % d.ci);
        T lanes[9][8] = {};
        for (int n = 0; n < d.n; ++n) {
            const T* dp = dout + (static_cast<std::size_t>(n) * d.co + co) * hw;
            const T* pp = pad + (static_cast<std::size_t>(n) * d.ci + ci) * phw;
            for (int oy = 0; oy < d.h; ++oy) {
                const T* drow = dp + static_cast<std::size_t>(oy) * d.w;
                const T* prow = pp + static_cast<std::size_t>(oy) * pw;  // ky = 0 row
                lane_dot_row3(drow, prow, d.w, lanes[0], lanes[1], lanes[2]);
                lane_dot_row3(drow, prow + pw, d.w, lanes[3], lanes[4], lanes[5]);
                lane_dot_row3(drow, prow + 2 * pw, d.w, lanes[6], lanes[7], lanes[8]);
            }
        }
        T* wg = dw + (static_cast<std::size_t>(co) * d.ci + ci) * 9;
        for (int t = 0; t < 9; ++t) wg[t] += combine_lanes(lanes[t]);
    });
}

template <typename T>
void conv2d_backward_params_generic(const T* dout, const T* in, T* dw, const Conv2dDims& d) {
    const int p = d.k / 2;
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    parallel_tasks(static_cast<std::int64_t>(d.co) * d.ci, [&](std::int64_t task) {
        const int co = static_cast<int>(task / d.ci);
        const int ci = static_cast<int>(task % d.ci);
        T* wg = dw + (static_cast<std::size_t>(co) * d.ci + ci) * d.k * d.k;
        for (int ky = 0; ky < d.k; ++ky) {
            const int oy0 = std::max(0, p - ky);
            const int oy1 = std::min(d.h, d.h + p - ky);
            for (int kx = 0; kx < d.k; ++kx) {
                const int ox0 = std::max(0, p - kx);
                const int ox1 = std::min(d.w, d.w + p - kx);
                T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
                for (int n = 0; n < d.n; ++n) {
                    const T* dp = dout + (static_cast<std::size_t>(n) * d.co + co) * hw;
                    const T* ip = in + (static_cast<std::size_t>(n) * d.ci + ci) * hw;
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const T* drow = dp + static_cast<std::size_t>(oy) * d.w + ox0;
                        const T* irow =
                            ip + static_cast<std::size_t>(oy + ky - p) * d.w + (ox0 + kx - p);
                        lane_dot_row(drow, irow, ox1 - ox0, lanes);
                    }
                }
                wg[ky * d.k + kx] += combine_lanes(lanes);
            }
        }
    });
}

}  // namespace detail

// dw[co,ci,ky,kx] += sum_{n,y,x} dout[n,co,y,x] * in[n,ci,y+ky-p,x+kx-p]
// db[co] += sum_{n,y,x} dout[n,co,y,x]. Either destination may be null.
template <typename T>
void conv2d_backward_params(const T* dout, const T* in, T* dw, T* db, const Conv2dDims& d) {
    const std::size_t hw = static_cast<std::size_t>(d.h) * d.w;
    if (dw) {
        if (d.k == 3) {
            const std::vector<T> pad =
                detail::pad_planes(in, static_cast<std::int64_t>(d.n) * d.ci, d.h, d.w, 1);
            detail::conv2d_backward_params_k3(dout, pad.data(), dw, d);
        } else {
            detail::conv2d_backward_params_generic(dout, in, dw, d);
        }
    }
    if (db) {
        detail::parallel_tasks(d.co, [&](std::int64_t co) {
            T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
            for (int n = 0; n < d.n; ++n) {
                const T* dp = dout + (static_cast<std::size_t>(n) * d.co + co) * hw;
                for (int oy = 0; oy < d.h; ++oy)
                    detail::lane_sum_row(dp + static_cast<std::size_t>(oy) * d.w, d.w, lanes);
            }
            db[co] += detail::combine_lanes(lanes);
        });
    }
}

template <typename T>
void leaky_relu_forward(const T* __restrict in, T* __restrict out, std::int64_t n, T slope) {
    parallel_elementwise(n, [&](std::int64_t i) { out[i] = in[i] > T(0) ? in[i] : slope * in[i]; });
}

template <typename T>
void leaky_relu_backward(const T* __restrict in, const T* __restrict dout, T* __restrict din,
                         std::int64_t n, T slope) {
    parallel_elementwise(n, [&](std::int64_t i) { din[i] += dout[i] * (in[i] > T(0) ? T(1) : slope); });
}

// 2x2 non-overlapping max. argmax stores 0..3 (row-major within the window,
// first occurrence wins on ties).
template <typename T>
void maxpool2_forward(const T* __restrict in, T* __restrict out, std::uint8_t* __restrict argmax,
                      std::int64_t planes, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    const std::size_t ihw = static_cast<std::size_t>(h) * w;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    detail::parallel_tasks(planes, [&](std::int64_t pl) {
        const T* ip = in + static_cast<std::size_t>(pl) * ihw;
        T* op = out + static_cast<std::size_t>(pl) * ohw;
        std::uint8_t* ap = argmax + static_cast<std::size_t>(pl) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
            const T* r0 = ip + static_cast<std::size_t>(2 * oy) * w;
            const T* r1 = r0 + w;
            for (int ox = 0; ox < ow; ++ox) {
                const T cand[4] = {r0[2 * ox], r0[2 * ox + 1], r1[2 * ox], r1[2 * ox + 1]};
                int best = 0;
                for (int j = 1; j < 4; ++j)
                    if (cand[j] > cand[best]) best = j;
                op[static_cast<std::size_t>(oy) * ow + ox] = cand[best];
                ap[static_cast<std::size_t>(oy) * ow + ox] = static_cast<std::uint8_t>(best);
            }
        }
    });
}

template <typename T>
void maxpool2_backward(const T* __restrict dout, const std::uint8_t* __restrict argmax,
                       T* __restrict din, std::int64_t planes, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    const std::size_t ihw = static_cast<std::size_t>(h) * w;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    detail::parallel_tasks(planes, [&](std::int64_t pl) {
        const T* dp = dout + static_cast<std::size_t>(pl) * ohw;
        const std::uint8_t* ap = argmax + static_cast<std::size_t>(pl) * ohw;
        T* gp = din + static_cast<std::size_t>(pl) * ihw;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const int j = ap[static_cast<std::size_t>(oy) * ow + ox];
                const int iy = 2 * oy + j / 2;
                const int ix = 2 * ox + j % 2;
                gp[static_cast<std::size_t>(iy) * w + ix] += dp[static_cast<std::size_t>(oy) * ow + ox];
            }
        }
    });
}

// Nearest-neighbour 2x upsampling.
template <typename T>
void upsample2_forward(const T* __restrict in, T* __restrict out, std::int64_t planes, int h, int w) {
    const int oh = 2 * h, ow = 2 * w;
    const std::size_t ihw = static_cast<std::size_t>(h) * w;
    const std::size_t ohw = static_cast<std::size_t>(oh) * ow;
    detail::parallel_tasks(planes, [&](std::int64_t pl) {
        const T* ip = in + static_cast<std::size_t>(pl) * ihw;
        T* op = out + static_cast<std::size_t>(pl) * ohw;
        for (int oy = 0; oy < oh; ++oy) {
            const T* irow = ip + static_cast<std::size_t>(oy / 2) * w;
            T* orow = op + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) orow[ox] = irow[ox / 2];
        }
    });
}

// Gradient of each input element is the sum over its four replicas, added in
// row-major replica order.
template <typename T>
void upsample2_backward(const T* __restrict dout, T* __restrict din, std::int64_t planes, int h, int w) {
    const int ow = 2 * w;
    const std::size_t ihw = static_cast<std::size_t>(h) * w;
    const std::size_t ohw = static_cast<std::size_t>(4) * ihw;
    detail::parallel_tasks(planes, [&](std::int64_t pl) {
        const T* dp = dout + static_cast<std::size_t>(pl) * ohw;
        T* gp = din + static_cast<std::size_t>(pl) * ihw;
        for (int iy = 0; iy < h; ++iy) {
            const T* d0 = dp + static_cast<std::size_t>(2 * iy) * ow;
            const T* d1 = d0 + ow;
            T* grow = gp + static_cast<std::size_t>(iy) * w;
            for (int ix = 0; ix < w; ++ix)
                grow[ix] += ((d0[2 * ix] + d0[2 * ix + 1]) + (d1[2 * ix] + d1[2 * ix + 1]));
        }
    });
}

// Mean absolute difference with the deterministic blocked reduction.
template <typename T>
T l1_loss_value(const T* a, const T* b, std::int64_t n) {
    const T sum = blocked_sum<T>(n, [&](std::int64_t i) {
        const T d = a[i] - b[i];
        return d < T(0) ? -d : d;
    });
    return sum / static_cast<T>(n);
}

// d(loss)/da = sign(a-b)/n (sign(0) = 0); db gets the negation.
template <typename T>
void l1_loss_backward(const T* __restrict a, const T* __restrict b, T upstream, T* __restrict da,
                      T* __restrict db, std::int64_t n) {
    const T scale = upstream / static_cast<T>(n);
    parallel_elementwise(n, [&](std::int64_t i) {
        const T d = a[i] - b[i];
        const T s = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
        if (da) da[i] += s;
        if (db) db[i] -= s;
    });
}

template <typename T>
void add_inplace(T* __restrict dst, const T* __restrict src, std::int64_t n) {
    parallel_elementwise(n, [&](std::int64_t i) { dst[i] += src[i]; });
}

}  // namespace idr::kernels
