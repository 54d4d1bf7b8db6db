#pragma once

// Numerical inverse Laplace transform on a Bromwich line.
//
// With s_k = gamma + i omega_k on a uniform grid of spacing 2 pi / T,
//
//     f(t) ~ e^{gamma t} (d omega / 2 pi) sum_k F(s_k) e^{i omega_k t},
//
// which is one FFT. The sum equals sum_m f(t + m T) e^{-gamma m T}, so the
// wrap-around error is e^{-gamma T} max|f|. An analytic pole series
// sum_n c_n / (s + a)^{n+1} is subtracted first and added back in closed form,
// leaving a remainder that decays fast enough to truncate the omega range.

#include "cavityqed/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace cavityqed {

using cplx = std::complex<double>;

/// sum_n c_n / (s + a)^{n+1}, inverse sum_n c_n t^n e^{-a t} / n!.
template <std::size_t K>
struct pole_series {
    using vec = std::array<cplx, K>;
    cplx a{0.0};
    std::vector<vec> c;

    [[nodiscard]] vec laplace(cplx s) const {
        vec out{};
        const cplx q = 1.0 / (s + a);
        cplx qn = q;
        for (const auto& cn : c) {
            for (std::size_t i = 0; i < K; ++i) out[i] += cn[i] * qn;
            qn *= q;
        }
        return out;
    }

    [[nodiscard]] vec time(double t) const {
        vec out{};
        if (t < 0) return out;
        const cplx e = std::exp(-a * t);
        double tn = 1.0;
        for (std::size_t n = 0; n < c.size(); ++n) {
            for (std::size_t i = 0; i < K; ++i) out[i] += c[n][i] * tn * e;
            tn *= t / static_cast<double>(n + 1);
        }
        return out;
    }
};

struct bromwich_options {
    /// Period T of the implied time window in units of the last requested time.
    double period_factor{4.0};
    /// gamma T; sets the wrap-around error e^{-gamma T}.
    double damping_exponent{16.0};
    /// Initial half width of the omega window; doubled until the edges decay.
    double omega_half_width{100.0};
    double edge_tol{1e-8};
    double alias_energy_tol{1e-6};
    double certify_tol{1e-4};
    bool certify{true};
    /// Optional spectral filter exp(-(omega / width)^(2 order)) on the remainder.
    double filter_width{0.0};
    int filter_order{8};
    std::size_t max_samples{std::size_t(1) << 23};
};

template <std::size_t K>
struct bromwich_result {
    double dt{0};
    std::vector<std::array<cplx, K>> values;
    double gamma{0};
    double omega_half_width{0};
    std::size_t samples{0};
    double edge_ratio{0};
    double alias_ratio{0};
    double certify_change{-1};
};

namespace detail {

template <std::size_t K>
struct bromwich_pass {
    std::vector<std::array<cplx, K>> values;
    double edge_ratio{0};
    double alias_ratio{0};
    std::size_t samples{0};
    double omega{0};
};

template <std::size_t K, class F>
bromwich_pass<K> bromwich_once(const F& transform, const pole_series<K>& asym, double dt, std::size_t nt,
                               double period, double omega_half, const bromwich_options& opt) {
    const auto m = static_cast<std::size_t>(std::ceil(period / dt - 1e-9));
    const double T = static_cast<double>(m) * dt;
    const double dw = 2.0 * std::numbers::pi / T;
    std::size_t r = static_cast<std::size_t>(std::ceil(2.0 * omega_half / (dw * static_cast<double>(m))));
    r = std::max<std::size_t>(r, 1);
    if ((m * r) % 2) ++r;
    const std::size_t N = m * r;
    if (N > opt.max_samples) throw convergence_error("inverse_laplace: sample cap exceeded");
    const double gamma = opt.damping_exponent / T;
    const double w0 = -0.5 * static_cast<double>(N) * dw;

    bromwich_pass<K> out;
    out.samples = N;
    out.omega = -w0;
    std::vector<std::array<cplx, K>> rem(N);
    double peak = 0, edge = 0, total = 0, outer = 0;
    const std::size_t band = std::max<std::size_t>(1, N / 40);
    for (std::size_t k = 0; k < N; ++k) {
        const double w = w0 + static_cast<double>(k) * dw;
        const cplx s(gamma, w);
        const auto full = transform(s);
        const auto sub = asym.laplace(s);
        const double sigma = opt.filter_width > 0 ? std::exp(-std::pow(w / opt.filter_width, 2 * opt.filter_order)) : 1.0;
        double fa = 0, ra = 0;
        for (std::size_t i = 0; i < K; ++i) {
            rem[k][i] = sigma * (full[i] - sub[i]);
            fa = std::max(fa, std::abs(full[i]));
            ra = std::max(ra, std::abs(rem[k][i]));
            total += std::norm(full[i]);
            if (k < band || k >= N - band) outer += std::norm(rem[k][i]);
        }
        peak = std::max(peak, fa);
        if (k == 0 || k == N - 1) edge = std::max(edge, ra);
    }
    out.edge_ratio = peak > 0 ? edge / peak : 0.0;
    out.alias_ratio = total > 0 ? outer / total : 0.0;
    if (out.edge_ratio > opt.edge_tol) return out;

    std::vector<cplx> buf(N);
    out.values.assign(nt, {});
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(N), reinterpret_cast<fftw_complex*>(buf.data()),
                                      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_BACKWARD, FFTW_ESTIMATE);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t k = 0; k < N; ++k) buf[k] = rem[k][i];
        fftw_execute(plan);
        for (std::size_t n = 0; n < nt; ++n) {
            const double t = static_cast<double>(n) * dt;
            // sample n of the requested grid sits at FFT index n r
            const cplx phase = std::exp(cplx(gamma * t, w0 * t));
            out.values[n][i] = phase * buf[n * r] * dw / (2.0 * std::numbers::pi);
        }
    }
    fftw_destroy_plan(plan);
    for (std::size_t n = 0; n < nt; ++n) {
        const auto a = asym.time(static_cast<double>(n) * dt);
        for (std::size_t i = 0; i < K; ++i) out.values[n][i] += a[i];
    }
    return out;
}

} // namespace detail

/// Inverse transform of `transform` (s -> std::array<cplx, K>) on t_n = n dt,
/// n < nt. The omega window grows until the remainder has decayed at the
/// edges; with opt.certify the answer is recomputed with doubled range and
/// density and must agree within opt.certify_tol of its maximum.
template <std::size_t K, class F>
[[nodiscard]] bromwich_result<K> inverse_laplace(const F& transform, const pole_series<K>& asym, double dt,
                                                 std::size_t nt, const bromwich_options& opt = {}) {
    if (!(dt > 0) || nt < 2) throw domain_error("inverse_laplace: need dt > 0 and two or more samples");
    if (!(opt.omega_half_width > 0) || !(opt.period_factor > 1)) throw domain_error("inverse_laplace: bad options");
    const double period = opt.period_factor * dt * static_cast<double>(nt - 1);
    double omega = opt.omega_half_width;
    detail::bromwich_pass<K> pass;
    for (;;) {
        pass = detail::bromwich_once(transform, asym, dt, nt, period, omega, opt);
        if (pass.edge_ratio <= opt.edge_tol) break;
        omega *= 2.0;
        if (static_cast<double>(pass.samples) * 2.0 > static_cast<double>(opt.max_samples))
            throw convergence_error("inverse_laplace: transform has not decayed at the window edges (ratio " +
                                    std::to_string(pass.edge_ratio) + ")");
    }
    if (pass.alias_ratio > opt.alias_energy_tol)
        throw convergence_error("inverse_laplace: spectral energy near the window edges (aliasing)");

    bromwich_result<K> res;
    res.dt = dt;
    res.gamma = opt.damping_exponent / (std::ceil(period / dt - 1e-9) * dt);
    res.omega_half_width = pass.omega;
    res.samples = pass.samples;
    res.edge_ratio = pass.edge_ratio;
    res.alias_ratio = pass.alias_ratio;
    res.values = std::move(pass.values);
    if (opt.certify) {
        auto wide = opt;
        wide.damping_exponent = 2.0 * opt.damping_exponent;
        const auto check = detail::bromwich_once(transform, asym, dt, nt, 2.0 * period, 2.0 * pass.omega, wide);
        if (check.values.empty()) throw convergence_error("inverse_laplace: certification pass lost edge decay");
        double diff = 0, peak = 0;
        for (std::size_t n = 0; n < nt; ++n)
            for (std::size_t i = 0; i < K; ++i) {
                diff = std::max(diff, std::abs(check.values[n][i] - res.values[n][i]));
                peak = std::max(peak, std::abs(res.values[n][i]));
            }
        res.certify_change = peak > 0 ? diff / peak : diff;
        if (res.certify_change > opt.certify_tol)
            throw convergence_error("inverse_laplace: doubling range and density changed the result by " +
                                    std::to_string(res.certify_change));
    }
    return res;
}

} // namespace cavityqed
