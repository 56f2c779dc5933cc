#pragma once

// Cloud-in-cell deposition of the velocity moments the field solve and the
// diagnostics need. Each marker contributes w/(1+hat(p).hat(x)) times
// {1, hat(p1), hat(p2), sqrt(1+|p|^2), p1} to {rho, j1, j2, kin_e, kin_p}
// at the two bracketing nodes; hyp gets the conserved weight w directly,
// so sum_i hyp_i * dx == sum w to round-off.

#include <stdexcept>
#include <string>
#include <vector>

#include "hvm/geometry.hpp"
#include "hvm/markers.hpp"
#include "hvm/util.hpp"

namespace hvm {

struct MomentGrid1D {
    UniformGrid g;
    std::vector<double> rho, j1, j2, kin_e, kin_p, hyp;

    explicit MomentGrid1D(const UniformGrid& grid = {})
        : g(grid),
          rho(grid.n, 0.0),
          j1(grid.n, 0.0),
          j2(grid.n, 0.0),
          kin_e(grid.n, 0.0),
          kin_p(grid.n, 0.0),
          hyp(grid.n, 0.0) {}

    double rho_at(double x) const { return interp(g, rho, x); }
    double j2_at(double x) const { return interp(g, j2, x); }
    double hyp_at(double x) const { return interp(g, hyp, x); }
};

inline MomentGrid1D deposit_moments(const std::vector<Marker1D>& markers,
                                    const UniformGrid& grid, int threads = 1) {
    struct Buf {
        std::vector<double> rho, j1, j2, kin_e, kin_p, hyp;
    };
    const size_t nchunks = chunk_count(markers.size());
    std::vector<Buf> bufs(nchunks);

    parallel_chunks(markers.size(), threads, [&](size_t lo, size_t hi, size_t c) {
        Buf& b = bufs[c];
        b.rho.assign(grid.n, 0.0);
        b.j1.assign(grid.n, 0.0);
        b.j2.assign(grid.n, 0.0);
        b.kin_e.assign(grid.n, 0.0);
        b.kin_p.assign(grid.n, 0.0);
        b.hyp.assign(grid.n, 0.0);
        const double inv_h = 1.0 / grid.dx;
        for (size_t m = lo; m < hi; ++m) {
            const Marker1D& mk = markers[m];
            if (mk.x < grid.x0 || mk.x > grid.back())
                throw std::runtime_error(
                    "deposit_moments: marker " + std::to_string(m) + " at x=" +
                    std::to_string(mk.x) +
                    " outside the grid window (window must cover R0 + tau_end/2)");
            const auto cell = grid.locate(mk.x);
            const double gam = std::sqrt(1.0 + mk.p1 * mk.p1 + mk.p2 * mk.p2);
            // relativistic velocities use the full momentum norm
            const double v1 = mk.p1 / gam, v2 = mk.p2 / gam;
            const double c0 = mk.w / (1.0 + v1 * hat(mk.x));
            const double wl = (1.0 - cell.frac) * inv_h, wr = cell.frac * inv_h;
            const int i = cell.i;
            b.rho[i] += wl * c0;        b.rho[i + 1] += wr * c0;
            b.j1[i] += wl * c0 * v1;    b.j1[i + 1] += wr * c0 * v1;
            b.j2[i] += wl * c0 * v2;    b.j2[i + 1] += wr * c0 * v2;
            b.kin_e[i] += wl * c0 * gam;     b.kin_e[i + 1] += wr * c0 * gam;
            b.kin_p[i] += wl * c0 * mk.p1;   b.kin_p[i + 1] += wr * c0 * mk.p1;
            b.hyp[i] += wl * mk.w;           b.hyp[i + 1] += wr * mk.w;
        }
    });

    MomentGrid1D out(grid);
    for (size_t c = 0; c < nchunks; ++c) {  // fixed merge order: bit-reproducible
        const Buf& b = bufs[c];
        if (b.rho.empty()) continue;
        for (int i = 0; i < grid.n; ++i) {
            out.rho[i] += b.rho[i];
            out.j1[i] += b.j1[i];
            out.j2[i] += b.j2[i];
            out.kin_e[i] += b.kin_e[i];
            out.kin_p[i] += b.kin_p[i];
            out.hyp[i] += b.hyp[i];
        }
    }
    return out;
}

}  // namespace hvm
