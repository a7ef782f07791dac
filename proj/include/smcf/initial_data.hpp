#pragma once

// Deterministic initial-data generators. Each generator returns an immersion
// and a gauge frame with a fixed, documented construction:
//
//   flat         F = B x                     frame: exterior (constants)
//   circle       F = (r cos x, r sin x, 0)   frame: (-e_r, e_z), A = 0
//   helix        F = (r cos x, r sin x, bx)  frame: (-e_r, binormal-ish)
//   clifford     F = (r1 cos x, r1 sin x, r2 cos y, r2 sin y)
//                                            frame: (-(cx,sx,0,0), -(0,0,cy,sy))
//   graph_bump   identity base + fixed band-limited displacement
//   graph_random identity base + seeded Sobolev-decay spectrum
//
// Graph frames follow the exterior_frame -> coulomb_rotate pipeline; the
// curved exact solutions use their closed-form parallel frames (the exterior
// construction is not transversal there). The frame parity is part of each
// generator's definition; j_rotate is frame-relative.

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "smcf/frame.hpp"

namespace smcf {

struct InitialData {
    Immersion im;
    GaugeFrame frame;
    std::string name;
};

struct GeneratorParams {
    double amplitude = 0.05;
    double radius = 1.0;    // circle/helix r, clifford r1
    double radius2 = 2.0;   // clifford r2
    double pitch = 0.25;    // helix slope
    double decay = 1.0;     // graph spectral decay rate
    int kmax = 26;          // graph spectral support
    double smoothness = 2.5;  // graph_random Sobolev exponent
    unsigned seed = 1;
};

// ---------------------------------------------------------------------------

inline Immersion make_flat(const Grid& g) {
    Immersion im(g);
    for (int a = 0; a < g.dim; ++a) im.base_at(a, a) = 1.0;
    return im;
}

inline InitialData flat_data(const Grid& g) {
    Immersion im = make_flat(g);
    GaugeFrame f = exterior_frame(im);
    return {std::move(im), std::move(f), "flat"};
}

inline InitialData circle_data(int n, double r) {
    Immersion im(Grid::line(n, 2 * kPi));
    RField nu1(im.grid, 3), nu2(im.grid, 3);
    for (int i = 0; i < n; ++i) {
        const double x = im.grid.coord(0, i);
        im.u.at(i, 0) = r * std::cos(x);
        im.u.at(i, 1) = r * std::sin(x);
        nu1.at(i, 0) = -std::cos(x);
        nu1.at(i, 1) = -std::sin(x);
        nu2.at(i, 2) = 1.0;
    }
    return {std::move(im), assemble_frame(Grid::line(n, 2 * kPi), std::move(nu1), std::move(nu2)),
            "circle"};
}

inline InitialData helix_data(int n, double r, double b) {
    Immersion im(Grid::line(n, 2 * kPi));
    im.base_at(2, 0) = b;
    RField nu1(im.grid, 3), nu2(im.grid, 3);
    const double q = std::sqrt(r * r + b * b);
    for (int i = 0; i < n; ++i) {
        const double x = im.grid.coord(0, i);
        im.u.at(i, 0) = r * std::cos(x);
        im.u.at(i, 1) = r * std::sin(x);
        nu1.at(i, 0) = -std::cos(x);
        nu1.at(i, 1) = -std::sin(x);
        nu2.at(i, 0) = b * std::sin(x) / q;
        nu2.at(i, 1) = -b * std::cos(x) / q;
        nu2.at(i, 2) = r / q;
    }
    return {std::move(im), assemble_frame(im.grid, std::move(nu1), std::move(nu2)), "helix"};
}

inline InitialData clifford_data(int n, double r1, double r2) {
    Immersion im(Grid::square(n, 2 * kPi));
    RField nu1(im.grid, 4), nu2(im.grid, 4);
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy) {
            const std::size_t p = im.grid.index(ix, iy);
            const double x = im.grid.coord(0, ix), y = im.grid.coord(1, iy);
            im.u.at(p, 0) = r1 * std::cos(x);
            im.u.at(p, 1) = r1 * std::sin(x);
            im.u.at(p, 2) = r2 * std::cos(y);
            im.u.at(p, 3) = r2 * std::sin(y);
            nu1.at(p, 0) = -std::cos(x);
            nu1.at(p, 1) = -std::sin(x);
            nu2.at(p, 2) = -std::cos(y);
            nu2.at(p, 3) = -std::sin(y);
        }
    return {std::move(im), assemble_frame(im.grid, std::move(nu1), std::move(nu2)), "clifford"};
}

// ---------------------------------------------------------------------------
// graphs
// ---------------------------------------------------------------------------

namespace detail {

// fixed, irrational-ish phase pattern so the bump has no accidental symmetry
inline double bump_phase(int c, int kx, int ky) {
    return 2.39996322972865332 * (kx + 3 * ky + 7 * c) + 0.41 * c;
}

inline void fill_graph_spectrum(Immersion& im, int comp, auto&& coeff) {
    Spectrum s(im.grid, 1);
    const Grid& g = im.grid;
    for (std::size_t p = 0; p < g.points(); ++p) {
        const auto m = s.modes(p);
        if (m[0] == 0 && m[1] == 0) continue;
        if (2 * std::abs(m[0]) >= g.n[0]) continue;
        if (g.dim == 2 && 2 * std::abs(m[1]) >= g.n[1]) continue;
        s.at(p, 0) = coeff(m[0], m[1]);
    }
    // Hermitian symmetrization keeps the synthesis real
    Spectrum sym(g, 1);
    for (std::size_t p = 0; p < g.points(); ++p) {
        const auto m = sym.modes(p);
        int kx = -m[0], ky = -m[1];
        if (kx < 0) kx += g.n[0];
        if (ky < 0) ky += g.n[1];
        if (g.dim == 1) ky = 0;
        const std::size_t q = std::size_t(kx) * g.n[1] + (g.dim == 2 ? ky : 0);
        sym.at(p, 0) = 0.5 * (s.at(p, 0) + std::conj(s.c[q]));
    }
    RField u = synthesize<double>(sym);
    for (std::size_t p = 0; p < g.points(); ++p) im.u.at(p, comp) += u.at(p, 0);
}

// rescale graph components so the worst pointwise slope |grad u| equals `slope`
inline void normalize_graph_slope(Immersion& im, double slope) {
    double worst = 0;
    for (int a = 0; a < im.grid.dim; ++a) {
        RField du = spectral_derivative(im.u, a, 1);
        for (std::size_t p = 0; p < im.grid.points(); ++p) {
            double s2 = 0;
            for (int c = im.grid.dim; c < im.ambient; ++c) s2 += sq(du.at(p, c));
            worst = std::max(worst, s2);
        }
    }
    worst = std::sqrt(worst);
    if (worst > 0)
        for (auto& x : im.u.v) x *= slope / worst;
}

}  // namespace detail

// Band-limited graph over the flat plane: coefficients exp(-decay |k|) with
// fixed phases, modes 0 < |k| <= kmax, rescaled so max |grad u| = amplitude.
// Closed form in the spectrum, so sampling on a finer grid is exact.
inline InitialData graph_bump_data(const Grid& g, double amplitude, double decay = 1.0,
                                   int kmax = 26) {
    Immersion im = make_flat(g);
    for (int c = 0; c < 2; ++c) {
        detail::fill_graph_spectrum(im, g.dim + c, [&](int kx, int ky) -> cplx {
            const double km = std::hypot(double(kx), double(ky));
            if (km > kmax) return {0, 0};
            const double ph = detail::bump_phase(c, kx, ky);
            return std::polar(std::exp(-decay * km), ph);
        });
    }
    detail::normalize_graph_slope(im, amplitude);
    GeometryBundle geo = compute_geometry(im);
    GaugeFrame f = coulomb_rotate(exterior_frame(im, geo), geo);
    return {std::move(im), std::move(f), "graph_bump"};
}

// Seeded rough graph: |u_hat(k)| ~ <k>^{-(s + d/2)}, random phases, |k| <= kmax,
// rescaled so max |grad u| = amplitude.
inline InitialData graph_random_data(const Grid& g, double amplitude, double s, int kmax,
                                     unsigned seed) {
    Immersion im = make_flat(g);
    std::mt19937_64 rng(seed);
    auto uniform = [&rng] { return double(rng()) / (double(rng.max()) + 1.0); };
    for (int c = 0; c < 2; ++c) {
        // draw phases in a fixed mode order for reproducibility
        std::map<std::pair<int, int>, double> phase;
        for (int kx = -g.n[0] / 2 + 1; kx < g.n[0] / 2; ++kx)
            for (int ky = g.dim == 2 ? -g.n[1] / 2 + 1 : 0; ky < (g.dim == 2 ? g.n[1] / 2 : 1);
                 ++ky)
                phase[{kx, ky}] = 2 * kPi * uniform();
        detail::fill_graph_spectrum(im, g.dim + c, [&](int kx, int ky) -> cplx {
            const double km = std::hypot(double(kx), double(ky));
            if (km > kmax) return {0, 0};
            const double mag = std::pow(1.0 + km * km, -0.5 * (s + 0.5 * g.dim));
            return std::polar(mag, phase[{kx, ky}]);
        });
    }
    detail::normalize_graph_slope(im, amplitude);
    GeometryBundle geo = compute_geometry(im);
    GaugeFrame f = coulomb_rotate(exterior_frame(im, geo), geo);
    return {std::move(im), std::move(f), "graph_random"};
}

// ---------------------------------------------------------------------------

inline InitialData generate_initial_data(const std::string& name, const Grid& g,
                                         const GeneratorParams& prm) {
    if (name == "flat") return flat_data(g);
    if (name == "circle") return circle_data(g.n[0], prm.radius);
    if (name == "helix") return helix_data(g.n[0], prm.radius, prm.pitch);
    if (name == "clifford") return clifford_data(g.n[0], prm.radius, prm.radius2);
    if (name == "graph_bump") return graph_bump_data(g, prm.amplitude, prm.decay, prm.kmax);
    if (name == "graph_random")
        return graph_random_data(g, prm.amplitude, prm.smoothness, prm.kmax, prm.seed);
    throw UnknownGenerator("generate_initial_data: unknown generator '" + name + "'");
}

// smallest metric eigenvalue over the grid (the ellipticity constant c0)
inline double metric_ellipticity(const GeometryBundle& geo) {
    double c0 = 1e300;
    const int d = geo.dim;
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        if (d == 1) {
            c0 = std::min(c0, geo.g.at(p, 0));
        } else {
            const double a = geo.g.at(p, 0), b = geo.g.at(p, 1), c = geo.g.at(p, 3);
            const double tr = a + c, disc = std::sqrt(sq(a - c) + 4 * b * b);
            c0 = std::min(c0, 0.5 * (tr - disc));
        }
    }
    return c0;
}

inline double metric_max_eig(const GeometryBundle& geo) {
    double m = 0;
    const int d = geo.dim;
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        if (d == 1) {
            m = std::max(m, geo.g.at(p, 0));
        } else {
            const double a = geo.g.at(p, 0), b = geo.g.at(p, 1), c = geo.g.at(p, 3);
            m = std::max(m, 0.5 * (a + c + std::sqrt(sq(a - c) + 4 * b * b)));
        }
    }
    return m;
}

inline double ginv_max_eig(const GeometryBundle& geo) {
    double m = 0;
    const int d = geo.dim;
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        if (d == 1) {
            m = std::max(m, geo.ginv.at(p, 0));
        } else {
            const double a = geo.ginv.at(p, 0), b = geo.ginv.at(p, 1), c = geo.ginv.at(p, 3);
            m = std::max(m, 0.5 * (a + c + std::sqrt(sq(a - c) + 4 * b * b)));
        }
    }
    return m;
}

inline double ginv_min_eig(const GeometryBundle& geo) {
    double m = 1e300;
    const int d = geo.dim;
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        if (d == 1) {
            m = std::min(m, geo.ginv.at(p, 0));
        } else {
            const double a = geo.ginv.at(p, 0), b = geo.ginv.at(p, 1), c = geo.ginv.at(p, 3);
            m = std::min(m, 0.5 * (a + c - std::sqrt(sq(a - c) + 4 * b * b)));
        }
    }
    return m;
}

}  // namespace smcf
