#include "cavityqed/field.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cavityqed;

namespace {

struct small_cavity {
    cavity_spec cav{prolate_ellipsoid{1.0, 0.8}};
    physical_constants pc;
    mode_basis basis = quantize_exact(cav, pc, 5.0, 12.0);
    kernel_matrix km{basis, {{1, 8.0, 0.05}, {2, 8.0, 0.05}}};
};

const small_cavity& fixture() {
    static const small_cavity s;
    return s;
}

} // namespace

TEST(Field, VacuumIsDark) {
    const auto& s = fixture();
    ASSERT_GE(s.basis.modes.size(), 4u);
    const std::vector<cplx> phi(s.basis.modes.size(), 0.0);
    EXPECT_EQ(energy_density_at(s.basis, phi, 0.3, 0.2), 0.0);
    const auto snap = snapshots(s.basis, s.km, std::vector<double>{0.0}, {phi}, default_grid(s.cav, 21, 31), 1.0);
    for (double v : snap[0].density) EXPECT_TRUE(v == 0.0 || v == snap[0].mask_sentinel);
    EXPECT_THROW((void)energy_density_at(s.basis, phi, 5.0, 0.0), domain_error);
}

TEST(Field, QuadratureEnergyMatchesPhotonEnergy) {
    const auto& s = fixture();
    const std::size_t M = s.basis.modes.size();
    // single modes, then a superposition whose cross terms must integrate to zero
    std::vector<std::vector<cplx>> sets;
    for (std::size_t j : {std::size_t(0), M / 2, M - 1}) {
        std::vector<cplx> phi(M, 0.0);
        phi[j] = 1.0;
        sets.push_back(phi);
    }
    std::vector<cplx> mix(M);
    for (std::size_t j = 0; j < M; ++j) mix[j] = cplx(std::cos(1.7 * j), std::sin(0.9 * j)) / std::sqrt(double(M));
    sets.push_back(mix);
    const auto E = field_energy(s.basis, sets);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        double expect = 0;
        for (std::size_t j = 0; j < M; ++j) expect += s.pc.hbar * s.basis.modes[j].omega * std::norm(sets[i][j]);
        EXPECT_NEAR(E[i] / expect, 1.0, 2e-3) << "set " << i;
    }
}

TEST(Field, NonNegativeAndMirrorSymmetric) {
    const auto& s = fixture();
    const std::size_t M = s.basis.modes.size();
    std::vector<cplx> phi(M), mirrored(M);
    for (std::size_t j = 0; j < M; ++j) {
        phi[j] = cplx(std::sin(0.7 * j + 0.1), std::cos(1.3 * j)) / std::sqrt(double(M));
        // reflection z -> -z multiplies a mode by its parity sign
        mirrored[j] = s.basis.modes[j].parity() == 0 ? phi[j] : -phi[j];
    }
    const auto grid = default_grid(s.cav, 25, 41);
    const auto snap = snapshots(s.basis, s.km, std::vector<double>{1.0, 1.0}, {phi, mirrored}, grid, 1.0);
    const auto& a = snap[0].density;
    const auto& b = snap[1].density;
    double peak = 0;
    for (double v : a) peak = std::max(peak, v);
    ASSERT_GT(peak, 0.0);
    for (std::size_t iz = 0; iz < grid.n_z; ++iz)
        for (std::size_t ir = 0; ir < grid.n_rho; ++ir) {
            const double v = a[iz * grid.n_rho + ir];
            if (v == snap[0].mask_sentinel) continue;
            EXPECT_GE(v, 0.0);
            // axial symmetry: rho and -rho columns agree
            EXPECT_NEAR(v, a[iz * grid.n_rho + (grid.n_rho - 1 - ir)], 1e-9 * peak);
            EXPECT_NEAR(v, b[(grid.n_z - 1 - iz) * grid.n_rho + ir], 1e-7 * peak);
        }
}

TEST(Field, ElectricOnlyIsBoundedByTotal) {
    const auto& s = fixture();
    const std::size_t M = s.basis.modes.size();
    std::vector<cplx> phi(M);
    for (std::size_t j = 0; j < M; ++j) phi[j] = cplx(1.0, 0.3 * j) / double(M);
    for (double z : {-0.4, 0.0, 0.5}) {
        const double tot = energy_density_at(s.basis, phi, 0.4, z);
        const double el = energy_density_at(s.basis, phi, 0.4, z, true);
        EXPECT_GE(el, 0.0);
        EXPECT_LE(el, tot);
    }
}
