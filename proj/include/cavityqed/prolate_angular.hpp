#pragma once

// Angular prolate spheroidal functions of azimuthal order m = 1,
//
//     ((1 - eta^2) S')' + (lambda - c^2 eta^2 - 1/(1 - eta^2)) S = 0,
//
// expanded in normalized associated Legendre functions P_l^1, l >= 1.
// Multiplication by eta^2 is pentadiagonal in l and decouples into two
// symmetric tridiagonal parity blocks. Channel n = 1, 2, ... is the n-th
// eigenvalue; S then has n - 1 zeros in (-1, 1) and parity (-1)^(n-1).
//
// The reduced function Q = S / sqrt(1 - eta^2) is regular at eta = +-1.

#include "cavityqed/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cavityqed::prolate {

namespace detail {

// <l+1| eta |l> in the normalized P_l^1 basis.
inline double eta_coupling(int l) {
    const double ld = l;
    return std::sqrt(ld * (ld + 2.0) / ((2.0 * ld + 1.0) * (2.0 * ld + 3.0)));
}

struct tridiagonal {
    std::vector<double> diag;
    std::vector<double> off; // off[i] couples i and i+1
};

// Number of eigenvalues strictly below x (Sturm sequence count).
inline int count_below(const tridiagonal& t, double x) {
    int count = 0;
    double d = 1.0;
    for (std::size_t i = 0; i < t.diag.size(); ++i) {
        const double o2 = i == 0 ? 0.0 : t.off[i - 1] * t.off[i - 1];
        d = t.diag[i] - x - (i == 0 ? 0.0 : o2 / d);
        if (d == 0.0) d = -1e-300;
        if (d < 0) ++count;
    }
    return count;
}

} // namespace detail

inline int parity_of_channel(int n) { return (n - 1) % 2; }

inline int legendre_degree(int parity, int i) { return 1 + parity + 2 * i; }

/// Square of eta in one parity block: symmetric tridiagonal in i.
inline detail::tridiagonal eta_squared_block(int parity, int size) {
    detail::tridiagonal t;
    t.diag.resize(size);
    t.off.resize(std::max(0, size - 1));
    for (int i = 0; i < size; ++i) {
        const int l = legendre_degree(parity, i);
        const double up = detail::eta_coupling(l);
        const double down = l > 1 ? detail::eta_coupling(l - 1) : 0.0;
        t.diag[i] = up * up + down * down;
        if (i + 1 < size) t.off[i] = up * detail::eta_coupling(l + 1);
    }
    return t;
}

/// Block of l(l+1) + c^2 eta^2.
inline detail::tridiagonal operator_block(double c, int parity, int size) {
    auto t = eta_squared_block(parity, size);
    const double c2 = c * c;
    for (int i = 0; i < size; ++i) {
        const double l = legendre_degree(parity, i);
        t.diag[i] = l * (l + 1.0) + c2 * t.diag[i];
    }
    for (auto& o : t.off) o *= c2;
    return t;
}

/// Block size large enough for channel n at bandwidth parameter c.
inline int block_size_for(int n, double c) {
    return n / 2 + static_cast<int>(std::ceil(c)) + 40;
}

/// Eigenvalue of channel n (1-based) by Sturm bisection.
inline double eigenvalue(double c, int n) {
    if (n < 1) throw domain_error("prolate channel index starts at 1");
    const int parity = parity_of_channel(n);
    const int index = (n - 1) / 2;
    const int size = block_size_for(n, c);
    const auto t = operator_block(c, parity, size);
    double lo = t.diag[0], hi = t.diag[0];
    for (int i = 0; i < size; ++i) {
        const double r = (i > 0 ? std::abs(t.off[i - 1]) : 0.0) + (i + 1 < size ? std::abs(t.off[i]) : 0.0);
        lo = std::min(lo, t.diag[i] - r);
        hi = std::max(hi, t.diag[i] + r);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (detail::count_below(t, mid) > index)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

/// Expansion of one angular function.
struct angular_function {
    double c{0};
    int channel{1};
    double lambda{0};
    std::vector<double> coeff; ///< unit vector in the normalized P_l^1 basis

    [[nodiscard]] int parity() const { return parity_of_channel(channel); }

    /// Q(1) for the unit-normalized S.
    [[nodiscard]] double focal_value() const {
        double s = 0;
        for (std::size_t i = 0; i < coeff.size(); ++i) {
            const double l = legendre_degree(parity(), static_cast<int>(i));
            s += coeff[i] * std::sqrt(l * (l + 1.0) * (2.0 * l + 1.0) / 8.0);
        }
        return s;
    }

    /// Integral of eta^2 S^2 over [-1, 1] for the unit-normalized S.
    [[nodiscard]] double eta2_moment() const {
        const auto t = eta_squared_block(parity(), static_cast<int>(coeff.size()));
        double s = 0;
        for (std::size_t i = 0; i < coeff.size(); ++i) {
            s += t.diag[i] * coeff[i] * coeff[i];
            if (i + 1 < coeff.size()) s += 2.0 * t.off[i] * coeff[i] * coeff[i + 1];
        }
        return s;
    }

    /// Reduced function Q(eta) = S / sqrt(1 - eta^2) and dQ/deta.
    [[nodiscard]] std::pair<double, double> reduced(double eta) const {
        // q_l = P_l^1 / sqrt(1 - x^2): q_1 = 1, q_2 = 3x,
        // q_{l+1} = ((2l+1) x q_l - (l+1) q_{l-1}) / l; derivatives alongside.
        double q_prev = 0, q = 1, dq_prev = 0, dq = 0;
        double value = 0, deriv = 0;
        const int lmax = legendre_degree(parity(), static_cast<int>(coeff.size()) - 1);
        std::size_t next = 0;
        for (int l = 1; l <= lmax; ++l) {
            if (l == legendre_degree(parity(), static_cast<int>(next))) {
                const double norm = std::sqrt((2.0 * l + 1.0) / (2.0 * l * (l + 1.0)));
                value += coeff[next] * q * norm;
                deriv += coeff[next] * dq * norm;
                ++next;
            }
            const double q_next = ((2.0 * l + 1.0) * eta * q - (l + 1.0) * q_prev) / l;
            const double dq_next = ((2.0 * l + 1.0) * (q + eta * dq) - (l + 1.0) * dq_prev) / l;
            q_prev = q;
            q = q_next;
            dq_prev = dq;
            dq = dq_next;
        }
        return {value, deriv};
    }
};

/// Eigenvalue and eigenvector of channel n, eigenvector by inverse iteration.
inline angular_function solve(double c, int n) {
    angular_function f;
    f.c = c;
    f.channel = n;
    f.lambda = eigenvalue(c, n);
    const int parity = parity_of_channel(n);
    const int size = block_size_for(n, c);
    const auto t = operator_block(c, parity, size);
    const double shift = f.lambda + 1e-10 * std::max(1.0, std::abs(f.lambda));
    std::vector<double> x(size, 1.0), diag(size), upper(size), rhs(size);
    for (int sweep = 0; sweep < 3; ++sweep) {
        // Thomas algorithm with partial safeguarding against zero pivots.
        rhs = x;
        for (int i = 0; i < size; ++i) diag[i] = t.diag[i] - shift;
        for (int i = 0; i + 1 < size; ++i) upper[i] = t.off[i];
        for (int i = 1; i < size; ++i) {
            double piv = diag[i - 1];
            if (piv == 0.0) piv = 1e-300;
            const double m = t.off[i - 1] / piv;
            diag[i] -= m * upper[i - 1];
            rhs[i] -= m * rhs[i - 1];
        }
        if (diag[size - 1] == 0.0) diag[size - 1] = 1e-300;
        x[size - 1] = rhs[size - 1] / diag[size - 1];
        for (int i = size - 2; i >= 0; --i) {
            double piv = diag[i] == 0.0 ? 1e-300 : diag[i];
            x[i] = (rhs[i] - upper[i] * x[i + 1]) / piv;
        }
        double norm = 0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : x) v /= norm;
    }
    // sign convention: Q(1) > 0
    f.coeff = std::move(x);
    if (f.focal_value() < 0)
        for (double& v : f.coeff) v = -v;
    return f;
}

} // namespace cavityqed::prolate
