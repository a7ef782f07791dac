#pragma once

// Immersed maps F: torus -> R^{d+2} stored as an affine base plus a periodic
// displacement, F(x) = B x + u(x). The base matrix carries the non-periodic
// (winding / plane) part: graphs use the identity embedding, product tori use
// B = 0. Spectral calculus acts on u; first derivatives add the base column.
//
// PointSampler evaluates periodic fields at off-grid points: one spectral
// upsampling to an 8x grid, then degree-8 Lagrange interpolation, which keeps
// interpolation error below ~1e-11 for dealiased spectra.

#include <array>
#include <cmath>
#include <vector>

#include "smcf/grid.hpp"

namespace smcf {

struct Immersion {
    Grid grid;
    int ambient = 3;                 // d + 2
    std::vector<double> base;        // ambient x dim, row-major: base[c*dim + a]
    RField u;                        // periodic part, comps == ambient
    double time = 0.0;

    Immersion() = default;
    Immersion(const Grid& g, double t = 0.0)
        : grid(g), ambient(g.dim + 2), base(std::size_t(ambient) * g.dim, 0.0),
          u(g, g.dim + 2), time(t) {}

    double base_at(int c, int a) const { return base[std::size_t(c) * grid.dim + a]; }
    double& base_at(int c, int a) { return base[std::size_t(c) * grid.dim + a]; }

    // full map value at grid node p
    std::array<double, 4> value(std::size_t p) const {
        const int i0 = int(p) / grid.n[1], i1 = int(p) % grid.n[1];
        const double x0 = grid.coord(0, i0);
        const double x1 = grid.dim == 2 ? grid.coord(1, i1) : 0.0;
        std::array<double, 4> f{};
        for (int c = 0; c < ambient; ++c) {
            f[c] = u.at(p, c) + base_at(c, 0) * x0;
            if (grid.dim == 2) f[c] += base_at(c, 1) * x1;
        }
        return f;
    }

    // dF/dx_axis as a field (base column + spectral derivative of u)
    RField deriv1(int axis) const {
        RField d = spectral_derivative(u, axis, 1);
        for (std::size_t p = 0; p < d.points(); ++p)
            for (int c = 0; c < ambient; ++c) d.at(p, c) += base_at(c, axis);
        return d;
    }

    RField deriv2(int a, int b) const {
        if (a == b) return spectral_derivative(u, a, 2);
        return spectral_derivative(spectral_derivative(u, a, 1), b, 1);
    }
};

// L2 distance of the full maps (same grid, same base assumed for u-difference
// to be meaningful; callers compare trajectories of one immersion family).
inline double map_l2_distance(const Immersion& a, const Immersion& b) {
    if (a.grid != b.grid) throw FrameMismatch("map_l2_distance: grid mismatch");
    double acc = 0;
    for (std::size_t p = 0; p < a.grid.points(); ++p) {
        const auto fa = a.value(p), fb = b.value(p);
        for (int c = 0; c < a.ambient; ++c) acc += sq(fa[c] - fb[c]);
    }
    return std::sqrt(acc * a.grid.cell_volume());
}

inline double map_linf_distance(const Immersion& a, const Immersion& b) {
    if (a.grid != b.grid) throw FrameMismatch("map_linf_distance: grid mismatch");
    double m = 0;
    for (std::size_t p = 0; p < a.grid.points(); ++p) {
        const auto fa = a.value(p), fb = b.value(p);
        for (int c = 0; c < a.ambient; ++c) m = std::max(m, std::abs(fa[c] - fb[c]));
    }
    return m;
}

// ---------------------------------------------------------------------------
// off-grid evaluation
// ---------------------------------------------------------------------------

class PointSampler {
  public:
    explicit PointSampler(const RField& f, int upsample = 8)
        : comps_(f.comps), coarse_(f.grid) {
        Grid fine(f.grid.dim,
                  {f.grid.n[0] * upsample, f.grid.dim == 2 ? f.grid.n[1] * upsample : 1},
                  f.grid.len);
        fine_ = resample(f, fine);
    }

    // periodic evaluation of all components at (x0, x1)
    void eval(double x0, double x1, double* out) const {
        const Grid& g = fine_.grid;
        std::array<double, 9> wx{}, wy{};
        int ix0 = 0, iy0 = 0;
        weights(x0, 0, ix0, wx);
        if (g.dim == 2) weights(x1, 1, iy0, wy);
        for (int c = 0; c < comps_; ++c) out[c] = 0;
        if (g.dim == 1) {
            for (int i = 0; i < 9; ++i) {
                const std::size_t p = wrap(ix0 + i, g.n[0]);
                for (int c = 0; c < comps_; ++c) out[c] += wx[i] * fine_.at(p, c);
            }
            return;
        }
        for (int i = 0; i < 9; ++i) {
            const int px = wrap(ix0 + i, g.n[0]);
            for (int j = 0; j < 9; ++j) {
                const std::size_t p = std::size_t(px) * g.n[1] + wrap(iy0 + j, g.n[1]);
                const double w = wx[i] * wy[j];
                for (int c = 0; c < comps_; ++c) out[c] += w * fine_.at(p, c);
            }
        }
    }

    int comps() const { return comps_; }

  private:
    static int wrap(int i, int n) {
        i %= n;
        return i < 0 ? i + n : i;
    }

    // degree-8 Lagrange weights on the fine grid, stencil centered at x
    void weights(double x, int axis, int& i0, std::array<double, 9>& w) const {
        const Grid& g = fine_.grid;
        const double h = g.spacing(axis);
        double t = x / h;
        t -= std::floor(t / g.n[axis]) * g.n[axis];  // into [0, n)
        const int ic = int(std::floor(t + 0.5));
        i0 = ic - 4;
        const double s = t - ic;  // in [-0.5, 0.5]
        for (int i = 0; i < 9; ++i) {
            double num = 1, den = 1;
            const int xi = i - 4;
            for (int j = 0; j < 9; ++j) {
                if (j == i) continue;
                const int xj = j - 4;
                num *= (s - xj);
                den *= (xi - xj);
            }
            w[i] = num / den;
        }
    }

    int comps_;
    Grid coarse_;
    RField fine_;
};

// Samples the full immersion (base + periodic) and its first derivatives.
class ImmersionSampler {
  public:
    explicit ImmersionSampler(const Immersion& im)
        : im_(im), val_(im.u), d0_(spectral_derivative(im.u, 0, 1)),
          d1_(im.grid.dim == 2 ? spectral_derivative(im.u, 1, 1) : im.u) {}

    // F(x)
    void value(double x0, double x1, double* out) const {
        val_.eval(x0, x1, out);
        for (int c = 0; c < im_.ambient; ++c) {
            out[c] += im_.base_at(c, 0) * x0;
            if (im_.grid.dim == 2) out[c] += im_.base_at(c, 1) * x1;
        }
    }

    // dF/dx_axis (x)
    void deriv(int axis, double x0, double x1, double* out) const {
        (axis == 0 ? d0_ : d1_).eval(x0, x1, out);
        for (int c = 0; c < im_.ambient; ++c) out[c] += im_.base_at(c, axis);
    }

    const Immersion& immersion() const { return im_; }

  private:
    const Immersion& im_;
    PointSampler val_, d0_, d1_;
};

}  // namespace smcf
