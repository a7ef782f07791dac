#pragma once

// Periodic rectangular grids, multi-component fields, and Fourier-multiplier
// operations: spectral differentiation, Littlewood-Paley projections,
// two-thirds dealiasing, and grid transfer by spectral padding/truncation.
//
// Grids are d in {1,2} with power-of-two point counts. Fields store values
// point-major (component-fastest), x-axis slowest, matching the snapshot
// format. All operations are pure: they return new fields.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "smcf/errors.hpp"
#include "smcf/fft.hpp"
#include "smcf/parallel.hpp"

namespace smcf {

inline constexpr double kPi = std::numbers::pi;

struct Grid {
    int dim = 1;
    std::array<int, 2> n = {0, 1};      // points per axis; n[1] == 1 for d=1
    std::array<double, 2> len = {2 * kPi, 2 * kPi};

    Grid() = default;
    Grid(int d, std::array<int, 2> counts, std::array<double, 2> lengths)
        : dim(d), n(counts), len(lengths) {
        if (dim < 1 || dim > 2) throw ValidationError("Grid: dim must be 1 or 2");
        if (dim == 1) { n[1] = 1; len[1] = 1.0; }
        for (int a = 0; a < dim; ++a) {
            if (n[a] < 4 || (n[a] & (n[a] - 1)) != 0)
                throw ValidationError("Grid: sizes must be powers of two >= 4");
            if (!(len[a] > 0)) throw ValidationError("Grid: lengths must be positive");
        }
    }

    static Grid line(int nx, double lx = 2 * kPi) { return Grid(1, {nx, 1}, {lx, 1.0}); }
    static Grid square(int nx, double lx = 2 * kPi) { return Grid(2, {nx, nx}, {lx, lx}); }

    std::size_t points() const { return std::size_t(n[0]) * std::size_t(n[1]); }
    double spacing(int axis) const { return len[axis] / n[axis]; }
    double min_spacing() const {
        double h = spacing(0);
        for (int a = 1; a < dim; ++a) h = std::min(h, spacing(a));
        return h;
    }
    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= spacing(a);
        return v;
    }
    double box_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= len[a];
        return v;
    }
    double coord(int axis, int i) const { return len[axis] * double(i) / n[axis]; }
    // physical wavenumber 2*pi*m / L for signed mode m
    double wavenumber(int axis, int mode) const { return 2.0 * kPi * mode / len[axis]; }

    std::size_t index(int ix, int iy = 0) const { return std::size_t(ix) * n[1] + iy; }

    bool operator==(const Grid& o) const {
        return dim == o.dim && n == o.n && len == o.len;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

template <class T>
struct Field {
    Grid grid;
    int comps = 1;
    std::vector<T> v;

    Field() = default;
    Field(const Grid& g, int c, T fill = T{})
        : grid(g), comps(c), v(g.points() * std::size_t(c), fill) {}

    T& at(std::size_t p, int c) { return v[p * comps + c]; }
    const T& at(std::size_t p, int c) const { return v[p * comps + c]; }
    std::size_t points() const { return grid.points(); }
};

using RField = Field<double>;
using CField = Field<cplx>;

namespace detail {
inline bool finite(double x) { return std::isfinite(x); }
inline bool finite(const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }
}  // namespace detail

template <class T>
void require_finite(const Field<T>& f, const char* who) {
    for (const auto& x : f.v)
        if (!detail::finite(x)) throw NonFiniteField(std::string(who) + ": non-finite value");
}

// ---------------------------------------------------------------------------
// spectral transforms
// ---------------------------------------------------------------------------

// Fourier coefficients of one component, same layout as the grid
// (slot (kx,ky) holds mode (fft_mode(kx), fft_mode(ky))).
class Spectrum {
  public:
    Grid grid;
    int comps = 1;
    std::vector<cplx> c;  // point-major, component-fastest, like Field

    Spectrum() = default;
    Spectrum(const Grid& g, int nc) : grid(g), comps(nc), c(g.points() * nc) {}

    cplx& at(std::size_t p, int k) { return c[p * comps + k]; }
    const cplx& at(std::size_t p, int k) const { return c[p * comps + k]; }

    std::array<int, 2> modes(std::size_t p) const {
        const int kx = int(p) / grid.n[1];
        const int ky = int(p) % grid.n[1];
        return {fft_mode(kx, grid.n[0]), grid.dim == 2 ? fft_mode(ky, grid.n[1]) : 0};
    }
    std::array<double, 2> xi(std::size_t p) const {
        const auto m = modes(p);
        return {grid.wavenumber(0, m[0]), grid.dim == 2 ? grid.wavenumber(1, m[1]) : 0.0};
    }
    double xi_norm(std::size_t p) const {
        const auto x = xi(p);
        return std::hypot(x[0], x[1]);
    }
};

namespace detail {

// in-place 1D transforms along both axes of one component buffer
inline void fft2_all(cplx* data, const Grid& g, bool forward) {
    const int nx = g.n[0], ny = g.n[1];
    if (g.dim == 1) {
        (forward ? fft_forward : fft_backward)(data, std::size_t(nx));
        return;
    }
    // rows (contiguous along y)
    parallel_for(std::size_t(nx), [&](std::size_t ix) {
        (forward ? fft_forward : fft_backward)(data + ix * ny, std::size_t(ny));
    });
    // columns
    parallel_for(std::size_t(ny), [&](std::size_t iy) {
        std::vector<cplx> col(nx);
        for (int ix = 0; ix < nx; ++ix) col[ix] = data[std::size_t(ix) * ny + iy];
        (forward ? fft_forward : fft_backward)(col.data(), std::size_t(nx));
        for (int ix = 0; ix < nx; ++ix) data[std::size_t(ix) * ny + iy] = col[ix];
    });
}

inline cplx to_cplx(double x) { return {x, 0.0}; }
inline cplx to_cplx(const cplx& z) { return z; }
inline void from_cplx(const cplx& z, double& out) { out = z.real(); }
inline void from_cplx(const cplx& z, cplx& out) { out = z; }

}  // namespace detail

template <class T>
Spectrum analyze(const Field<T>& f) {
    Spectrum s(f.grid, f.comps);
    const std::size_t np = f.points();
    std::vector<cplx> buf(np);
    for (int c = 0; c < f.comps; ++c) {
        for (std::size_t p = 0; p < np; ++p) buf[p] = detail::to_cplx(f.at(p, c));
        detail::fft2_all(buf.data(), f.grid, true);
        for (std::size_t p = 0; p < np; ++p) s.at(p, c) = buf[p];
    }
    return s;
}

template <class T>
Field<T> synthesize(const Spectrum& s) {
    Field<T> f(s.grid, s.comps);
    const std::size_t np = f.points();
    std::vector<cplx> buf(np);
    for (int c = 0; c < s.comps; ++c) {
        for (std::size_t p = 0; p < np; ++p) buf[p] = s.at(p, c);
        detail::fft2_all(buf.data(), s.grid, false);
        for (std::size_t p = 0; p < np; ++p) detail::from_cplx(buf[p], f.at(p, c));
    }
    return f;
}

// Applies a scalar Fourier multiplier m(spectrum, slot) to every component.
template <class T, class Mult>
Field<T> apply_multiplier(const Field<T>& f, Mult&& m) {
    require_finite(f, "apply_multiplier");
    Spectrum s = analyze(f);
    const std::size_t np = f.points();
    for (std::size_t p = 0; p < np; ++p) {
        const cplx mp = m(s, p);
        for (int c = 0; c < f.comps; ++c) s.at(p, c) *= mp;
    }
    return synthesize<T>(s);
}

// ---------------------------------------------------------------------------
// public grid operations
// ---------------------------------------------------------------------------

template <class T>
Field<T> spectral_derivative(const Field<T>& f, int axis, int order = 1) {
    if (axis < 0 || axis >= f.grid.dim) throw AxisOutOfRange("spectral_derivative: axis");
    if (order < 1) throw ValidationError("spectral_derivative: order >= 1");
    return apply_multiplier(f, [axis, order](const Spectrum& s, std::size_t p) {
        const auto m = s.modes(p);
        // Nyquist mode of odd derivatives is dropped (its sine interpolant is 0)
        if (order % 2 == 1 && std::abs(m[axis]) * 2 == s.grid.n[axis]) return cplx{0, 0};
        const cplx ik{0.0, s.grid.wavenumber(axis, m[axis])};
        cplx mult{1.0, 0.0};
        for (int j = 0; j < order; ++j) mult *= ik;
        return mult;
    });
}

// Smooth radial cutoff: 1 on [0,1], 0 on [2,inf), C^infty monotone between.
inline double lp_bump(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    auto q = [](double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; };
    return q(2.0 - r) / (q(2.0 - r) + q(r - 1.0));
}

enum class LpKind { below, band, above };

// Littlewood-Paley projection at dyadic scale 2^h: symbol phi(|xi|/2^h) (below),
// phi(|xi|/2^h) - phi(|xi|/2^{h-1}) (band), 1 - phi(|xi|/2^h) (above).
template <class T>
Field<T> lp_project(const Field<T>& f, double h, LpKind kind) {
    const double s0 = std::exp2(h), s1 = std::exp2(h - 1.0);
    return apply_multiplier(f, [&](const Spectrum& s, std::size_t p) {
        const double r = s.xi_norm(p);
        double m = 0;
        switch (kind) {
            case LpKind::below: m = lp_bump(r / s0); break;
            case LpKind::band: m = lp_bump(r / s0) - lp_bump(r / s1); break;
            case LpKind::above: m = 1.0 - lp_bump(r / s0); break;
        }
        return cplx{m, 0.0};
    });
}

// Two-thirds rule: zero every mode with |k_a| > N_a/3 on any axis.
template <class T>
Field<T> dealias(const Field<T>& f) {
    return apply_multiplier(f, [](const Spectrum& s, std::size_t p) {
        const auto m = s.modes(p);
        for (int a = 0; a < s.grid.dim; ++a)
            if (3 * std::abs(m[a]) > s.grid.n[a]) return cplx{0, 0};
        return cplx{1, 0};
    });
}

// Hard radial truncation at physical frequency xi_max (stability filter).
template <class T>
Field<T> truncate_above(const Field<T>& f, double xi_max) {
    return apply_multiplier(f, [xi_max](const Spectrum& s, std::size_t p) {
        return s.xi_norm(p) > xi_max ? cplx{0, 0} : cplx{1, 0};
    });
}

// Exact transfer to a finer/coarser grid over the same box (pad/drop modes).
template <class T>
Field<T> resample(const Field<T>& f, const Grid& to) {
    if (to.dim != f.grid.dim) throw ValidationError("resample: dim mismatch");
    Spectrum src = analyze(f);
    Spectrum dst(to, f.comps);
    const std::size_t np = to.points();
    for (std::size_t p = 0; p < np; ++p) {
        const auto m = dst.modes(p);
        bool have = true;
        for (int a = 0; a < to.dim; ++a)
            if (2 * std::abs(m[a]) >= f.grid.n[a]) have = false;  // drop Nyquist too
        if (!have) continue;
        int kx = m[0] >= 0 ? m[0] : m[0] + f.grid.n[0];
        int ky = f.grid.dim == 2 ? (m[1] >= 0 ? m[1] : m[1] + f.grid.n[1]) : 0;
        const std::size_t ps = std::size_t(kx) * f.grid.n[1] + ky;
        for (int c = 0; c < f.comps; ++c) dst.at(p, c) = src.at(ps, c);
    }
    return synthesize<T>(dst);
}

// ---------------------------------------------------------------------------
// norms and reductions (order-fixed, deterministic)
// ---------------------------------------------------------------------------

inline double sq(double x) { return x * x; }
inline double sqmod(double x) { return x * x; }
inline double sqmod(const cplx& z) { return std::norm(z); }

template <class T>
double l2_norm(const Field<T>& f) {
    double acc = 0;
    for (const auto& x : f.v) acc += sqmod(x);
    return std::sqrt(acc * f.grid.cell_volume());
}

template <class T>
double linf_norm(const Field<T>& f) {
    double m = 0;
    for (const auto& x : f.v) m = std::max(m, std::sqrt(sqmod(x)));
    return m;
}

template <class T>
double max_pointwise_norm(const Field<T>& f) {
    double m = 0;
    const std::size_t np = f.points();
    for (std::size_t p = 0; p < np; ++p) {
        double s = 0;
        for (int c = 0; c < f.comps; ++c) s += sqmod(f.at(p, c));
        m = std::max(m, s);
    }
    return std::sqrt(m);
}

// L2 norm evaluated in spectral space (Parseval check path).
template <class T>
double l2_norm_spectral(const Field<T>& f) {
    Spectrum s = analyze(f);
    double acc = 0;
    for (const auto& z : s.c) acc += std::norm(z);
    return std::sqrt(acc * f.grid.box_volume());
}

template <class T>
Field<T> axpy(double a, const Field<T>& x, const Field<T>& y) {
    Field<T> r = y;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += a * x.v[i];
    return r;
}

template <class T>
Field<T> scaled(const Field<T>& x, double a) {
    Field<T> r = x;
    for (auto& e : r.v) e *= a;
    return r;
}

template <class T>
Field<T> operator-(const Field<T>& a, const Field<T>& b) {
    Field<T> r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] -= b.v[i];
    return r;
}

template <class T>
Field<T> operator+(const Field<T>& a, const Field<T>& b) {
    Field<T> r = a;
    for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += b.v[i];
    return r;
}

}  // namespace smcf
