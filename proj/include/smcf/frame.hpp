#pragma once

// Orthonormal frames of the normal bundle and gauge operations on them:
//   - parallel transport along coordinate paths (RK4 on the frame ODE),
//   - exterior (almost-constant) frames by projecting fixed ambient vectors,
//   - relative winding number and phase-lifted gluing,
//   - Coulomb gauge rotation (spectral Poisson solve),
//   - Gram-Schmidt pullback onto a nearby immersion,
//   - the heat-gauge temporal connection B = nabla^a A_a.
//
// A is always recomputed spectrally from the frame, A_a = d_a nu1 . nu2, so
// the A-consistency invariant is exact by construction for periodic frames.
// Transport on the torus happens on the cut-open fundamental domain; the seam
// is certified by winding_number and repaired by glue_frames.

#include <array>
#include <cmath>
#include <vector>

#include "smcf/geometry.hpp"

namespace smcf {

// ---------------------------------------------------------------------------
// construction helpers
// ---------------------------------------------------------------------------

inline RField connection_from_frame(const RField& nu1, const RField& nu2) {
    const Grid& g = nu1.grid;
    RField A(g, g.dim);
    for (int a = 0; a < g.dim; ++a) {
        RField dnu1 = spectral_derivative(nu1, a, 1);
        for (std::size_t p = 0; p < g.points(); ++p) {
            double s = 0;
            for (int c = 0; c < nu1.comps; ++c) s += dnu1.at(p, c) * nu2.at(p, c);
            A.at(p, a) = s;
        }
    }
    return A;
}

inline GaugeFrame assemble_frame(const Grid& grid, RField nu1, RField nu2) {
    GaugeFrame f;
    f.grid = grid;
    f.ambient = nu1.comps;
    f.A = connection_from_frame(nu1, nu2);
    f.nu1 = std::move(nu1);
    f.nu2 = std::move(nu2);
    f.B = RField(grid, 1);
    return f;
}

struct FrameDefects {
    double orthonormality = 0;  // max |<nu_i,nu_j> - delta_ij|
    double normality = 0;       // max |<nu_i, dF_a>|
    double a_consistency = 0;   // max |A_a - d_a nu1 . nu2|
};

inline FrameDefects frame_defects(const GaugeFrame& f, const GeometryBundle& geo) {
    FrameDefects d;
    const int m = f.ambient;
    for (std::size_t p = 0; p < f.grid.points(); ++p) {
        double n11 = 0, n22 = 0, n12 = 0;
        for (int c = 0; c < m; ++c) {
            n11 += sq(f.nu1.at(p, c));
            n22 += sq(f.nu2.at(p, c));
            n12 += f.nu1.at(p, c) * f.nu2.at(p, c);
        }
        d.orthonormality = std::max({d.orthonormality, std::abs(n11 - 1), std::abs(n22 - 1),
                                     std::abs(n12)});
        for (int a = 0; a < geo.dim; ++a) {
            double t1 = 0, t2 = 0;
            for (int c = 0; c < m; ++c) {
                t1 += f.nu1.at(p, c) * geo.dF[a].at(p, c);
                t2 += f.nu2.at(p, c) * geo.dF[a].at(p, c);
            }
            d.normality = std::max({d.normality, std::abs(t1), std::abs(t2)});
        }
    }
    const RField A = connection_from_frame(f.nu1, f.nu2);
    for (std::size_t i = 0; i < A.v.size(); ++i)
        d.a_consistency = std::max(d.a_consistency, std::abs(A.v[i] - f.A.v[i]));
    return d;
}

// Projects two candidate sections onto the normal bundle of geo and
// Gram-Schmidt orthonormalizes, exactly as (nu_1 = nubar_1/|nubar_1|, ...).
// Throws `err` if any intermediate norm falls to `floor` or below.
template <class Err>
GaugeFrame frame_from_candidates(const GeometryBundle& geo, const RField& cand1,
                                 const RField& cand2, double floor, const char* what) {
    const int d = geo.dim, m = geo.ambient;
    RField nu1(geo.grid, m), nu2(geo.grid, m);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        std::array<double, 4> v1{}, v2{};
        for (int c = 0; c < m; ++c) {
            v1[c] = cand1.at(p, c);
            v2[c] = cand2.at(p, c);
        }
        // remove tangential parts: v -= g^{ab} (v . dF_a) dF_b
        for (auto* v : {&v1, &v2}) {
            std::array<double, 2> vd{};
            for (int a = 0; a < d; ++a)
                for (int c = 0; c < m; ++c) vd[a] += (*v)[c] * geo.dF[a].at(p, c);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    for (int c = 0; c < m; ++c)
                        (*v)[c] -= geo.ginv.at(p, a * d + b) * vd[a] * geo.dF[b].at(p, c);
        }
        double n1 = 0;
        for (int c = 0; c < m; ++c) n1 += sq(v1[c]);
        n1 = std::sqrt(n1);
        if (n1 <= floor) throw Err(std::string(what) + ": first normal candidate degenerate");
        for (int c = 0; c < m; ++c) v1[c] /= n1;
        double dot = 0;
        for (int c = 0; c < m; ++c) dot += v2[c] * v1[c];
        for (int c = 0; c < m; ++c) v2[c] -= dot * v1[c];
        double n2 = 0;
        for (int c = 0; c < m; ++c) n2 += sq(v2[c]);
        n2 = std::sqrt(n2);
        if (n2 <= floor) throw Err(std::string(what) + ": second normal candidate degenerate");
        for (int c = 0; c < m; ++c) {
            nu1.at(p, c) = v1[c];
            nu2.at(p, c) = v2[c] / n2;
        }
    }
    return assemble_frame(geo.grid, std::move(nu1), std::move(nu2));
}

// ---------------------------------------------------------------------------
// exterior frame
// ---------------------------------------------------------------------------

// Constant sections transversal to the (almost flat) surface: an orthonormal
// basis of the complement of the affine base columns, projected onto the
// normal bundle.
inline GaugeFrame exterior_frame(const Immersion& im, const GeometryBundle& geo) {
    const int d = im.grid.dim, m = im.ambient;
    // sup-variation of dF against its mean (the base column)
    for (int a = 0; a < d; ++a) {
        for (std::size_t p = 0; p < im.grid.points(); ++p) {
            double dev = 0;
            for (int c = 0; c < m; ++c)
                dev += sq(geo.dF[a].at(p, c) - im.base_at(c, a));
            if (std::sqrt(dev) >= 0.5)
                throw NotTransversal("exterior_frame: sup-variation of dF exceeds 0.5");
        }
    }
    // orthonormal complement of the base columns (Gram-Schmidt over e_1..e_m)
    std::vector<std::array<double, 4>> basis;
    for (int a = 0; a < d; ++a) {
        std::array<double, 4> v{};
        for (int c = 0; c < m; ++c) v[c] = im.base_at(c, a);
        basis.push_back(v);
    }
    auto orthonormalize = [&](std::array<double, 4> v) -> bool {
        for (const auto& b : basis) {
            double dot = 0;
            for (int c = 0; c < m; ++c) dot += v[c] * b[c];
            double nb = 0;
            for (int c = 0; c < m; ++c) nb += sq(b[c]);
            if (nb > 1e-14)
                for (int c = 0; c < m; ++c) v[c] -= dot / nb * b[c];
        }
        double n = 0;
        for (int c = 0; c < m; ++c) n += sq(v[c]);
        if (n < 1e-8) return false;
        for (int c = 0; c < m; ++c) v[c] /= std::sqrt(n);
        basis.push_back(v);
        return true;
    };
    // prefer the two "vertical" directions so graph-like data recovers the
    // (rotated) e_{d+1}, e_{d+2} pair
    std::vector<int> scan;
    for (int c = d; c < m; ++c) scan.push_back(c);
    for (int c = 0; c < d; ++c) scan.push_back(c);
    std::vector<std::array<double, 4>> normals;
    for (int c : scan) {
        if (int(normals.size()) >= 2) break;
        std::array<double, 4> e{};
        e[c] = 1;
        const std::size_t before = basis.size();
        if (orthonormalize(e)) normals.push_back(basis[before]);
    }
    if (normals.size() < 2) throw NotTransversal("exterior_frame: no transversal complement");

    RField c1(im.grid, m), c2(im.grid, m);
    for (std::size_t p = 0; p < im.grid.points(); ++p)
        for (int c = 0; c < m; ++c) {
            c1.at(p, c) = normals[0][c];
            c2.at(p, c) = normals[1][c];
        }
    return frame_from_candidates<NotTransversal>(geo, c1, c2, 0.5, "exterior_frame");
}

inline GaugeFrame exterior_frame(const Immersion& im) {
    return exterior_frame(im, compute_geometry(im));
}

// ---------------------------------------------------------------------------
// parallel transport
// ---------------------------------------------------------------------------

namespace detail {

// Frame transport along a coordinate ray: d(nu)/dh = G(x) nu with
// G nu = -g^{ab} (d2F_{bw} . nu) dF_a for direction w. Fields are sampled on
// a 2x grid so RK4 midpoints are exact.
struct TransportWorkspace {
    Grid fine;
    int dim, ambient;
    std::array<RField, 2> dF;                  // on fine grid
    std::array<std::array<RField, 2>, 2> d2F;  // on fine grid

    explicit TransportWorkspace(const Immersion& im) {
        dim = im.grid.dim;
        ambient = im.ambient;
        fine = Grid(dim, {im.grid.n[0] * 2, dim == 2 ? im.grid.n[1] * 2 : 1}, im.grid.len);
        for (int a = 0; a < dim; ++a) dF[a] = resample(im.deriv1(a), fine);
        for (int a = 0; a < dim; ++a)
            for (int b = a; b < dim; ++b) {
                d2F[a][b] = resample(im.deriv2(a, b), fine);
                if (a != b) d2F[b][a] = d2F[a][b];
            }
    }

    // applies G at fine-grid point p, direction w, to vector v (in place out)
    void apply_G(std::size_t p, int w, const double* v, double* out) const {
        std::array<double, 2> proj{};  // (d2F_{bw} . v) for b
        for (int b = 0; b < dim; ++b) {
            double s = 0;
            for (int c = 0; c < ambient; ++c) s += d2F[b][w].at(p, c) * v[c];
            proj[b] = s;
        }
        // g^{ab} from fine-grid tangents, closed form
        double g[2][2] = {{0, 0}, {0, 0}};
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                double s = 0;
                for (int c = 0; c < ambient; ++c) s += dF[a].at(p, c) * dF[b].at(p, c);
                g[a][b] = s;
            }
        double gi[2][2] = {{0, 0}, {0, 0}};
        if (dim == 1) {
            gi[0][0] = 1.0 / g[0][0];
        } else {
            const double det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            gi[0][0] = g[1][1] / det;
            gi[1][1] = g[0][0] / det;
            gi[0][1] = gi[1][0] = -g[0][1] / det;
        }
        for (int c = 0; c < ambient; ++c) out[c] = 0;
        for (int a = 0; a < dim; ++a) {
            double coef = 0;
            for (int b = 0; b < dim; ++b) coef += gi[a][b] * proj[b];
            for (int c = 0; c < ambient; ++c) out[c] -= coef * dF[a].at(p, c);
        }
    }

    std::size_t fine_index(int ix2, int iy2) const {
        ix2 %= fine.n[0];
        if (ix2 < 0) ix2 += fine.n[0];
        iy2 %= fine.n[1];
        if (iy2 < 0) iy2 += fine.n[1];
        return std::size_t(ix2) * fine.n[1] + iy2;
    }

    // one RK4 step for both frame vectors from fine node (ix2,iy2) along axis w
    void rk4_step(int ix2, int iy2, int w, std::array<double, 8>& nu) const {
        const double h = fine.spacing(w) * 2.0;  // coarse spacing
        const int sx = w == 0 ? 1 : 0, sy = w == 1 ? 1 : 0;
        const std::size_t p0 = fine_index(ix2, iy2);
        const std::size_t ph = fine_index(ix2 + sx, iy2 + sy);
        const std::size_t p1 = fine_index(ix2 + 2 * sx, iy2 + 2 * sy);
        for (int j = 0; j < 2; ++j) {
            double* v = nu.data() + 4 * j;
            double k1[4], k2[4], k3[4], k4[4], tmp[4];
            apply_G(p0, w, v, k1);
            for (int c = 0; c < ambient; ++c) tmp[c] = v[c] + 0.5 * h * k1[c];
            apply_G(ph, w, tmp, k2);
            for (int c = 0; c < ambient; ++c) tmp[c] = v[c] + 0.5 * h * k2[c];
            apply_G(ph, w, tmp, k3);
            for (int c = 0; c < ambient; ++c) tmp[c] = v[c] + h * k3[c];
            apply_G(p1, w, tmp, k4);
            for (int c = 0; c < ambient; ++c)
                v[c] += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
        }
    }
};

}  // namespace detail

// Parallel transport of a seed frame over the cut-open fundamental domain.
// d=1: along the ray from the base node. d=2: along axis 0 through the base
// row, then along axis 1 up each column (fixed path ordering).
inline GaugeFrame parallel_transport_frame(const Immersion& im, std::array<int, 2> base_node,
                                           const std::array<std::array<double, 4>, 2>& seed) {
    const int d = im.grid.dim, m = im.ambient;
    const detail::TransportWorkspace ws(im);

    // seed validation at the base node
    {
        const GeometryBundle geo = compute_geometry(im);
        const std::size_t pb = im.grid.index(base_node[0], d == 2 ? base_node[1] : 0);
        double n11 = 0, n22 = 0, n12 = 0, tan = 0;
        for (int c = 0; c < m; ++c) {
            n11 += sq(seed[0][c]);
            n22 += sq(seed[1][c]);
            n12 += seed[0][c] * seed[1][c];
        }
        for (int a = 0; a < d; ++a)
            for (int j = 0; j < 2; ++j) {
                double s = 0;
                for (int c = 0; c < m; ++c) s += seed[j][c] * geo.dF[a].at(pb, c);
                tan = std::max(tan, std::abs(s));
            }
        if (std::abs(n11 - 1) > 1e-8 || std::abs(n22 - 1) > 1e-8 || std::abs(n12) > 1e-8 ||
            tan > 1e-8)
            throw SeedNotNormal("parallel_transport_frame: seed fails orthonormality to tangent");
    }

    RField nu1(im.grid, m), nu2(im.grid, m);
    auto store = [&](int ix, int iy, const std::array<double, 8>& nu) {
        const std::size_t p = im.grid.index(ix, iy);
        for (int c = 0; c < m; ++c) {
            nu1.at(p, c) = nu[c];
            nu2.at(p, c) = nu[4 + c];
        }
    };

    std::array<double, 8> start{};
    for (int c = 0; c < m; ++c) {
        start[c] = seed[0][c];
        start[4 + c] = seed[1][c];
    }

    const int nx = im.grid.n[0], ny = im.grid.n[1];
    const int bx = base_node[0], by = d == 2 ? base_node[1] : 0;

    // along axis 0 through the base row
    std::vector<std::array<double, 8>> row(nx);
    {
        std::array<double, 8> nu = start;
        for (int step = 0; step < nx; ++step) {
            const int ix = (bx + step) % nx;
            row[ix] = nu;
            ws.rk4_step(2 * ix, 2 * by, 0, nu);
        }
    }
    if (d == 1) {
        for (int ix = 0; ix < nx; ++ix) store(ix, 0, row[ix]);
    } else {
        parallel_for(std::size_t(nx), [&](std::size_t ixs) {
            const int ix = int(ixs);
            std::array<double, 8> nu = row[ix];
            for (int step = 0; step < ny; ++step) {
                const int iy = (by + step) % ny;
                store(ix, iy, nu);
                ws.rk4_step(2 * ix, 2 * iy, 1, nu);
            }
        });
    }

    // final orthonormalization pass (projection + Gram-Schmidt)
    const GeometryBundle geo = compute_geometry(im);
    return frame_from_candidates<SeedNotNormal>(geo, nu1, nu2, 0.5,
                                                "parallel_transport_frame");
}

// ---------------------------------------------------------------------------
// winding number and gluing
// ---------------------------------------------------------------------------

namespace detail {
// relative phase a = e^{i theta} b at point p
inline double relative_phase(const GaugeFrame& a, const GaugeFrame& b, std::size_t p) {
    double cth = 0, sth = 0;
    for (int c = 0; c < a.ambient; ++c) {
        cth += a.nu1.at(p, c) * b.nu1.at(p, c);
        sth += a.nu2.at(p, c) * b.nu1.at(p, c);
    }
    return std::atan2(sth, cth);
}
inline double wrap_to_pi(double x) {
    while (x > kPi) x -= 2 * kPi;
    while (x <= -kPi) x += 2 * kPi;
    return x;
}
}  // namespace detail

// Integer rotation number of the relative phase of two frames around a closed
// grid path (sequence of point indices; closure is implicit).
inline int winding_number(const GaugeFrame& frame_a, const GaugeFrame& frame_b,
                          const std::vector<std::size_t>& loop) {
    if (frame_a.grid != frame_b.grid) throw FrameMismatch("winding_number: grid mismatch");
    double total = 0;
    double prev = detail::relative_phase(frame_a, frame_b, loop.front());
    for (std::size_t i = 1; i <= loop.size(); ++i) {
        const double cur = detail::relative_phase(frame_a, frame_b, loop[i % loop.size()]);
        total += detail::wrap_to_pi(cur - prev);
        prev = cur;
    }
    const double w = total / (2 * kPi);
    const double nearest = std::round(w);
    if (std::abs(w - nearest) > 0.1)
        throw NonInteger("winding_number: phase integral not close to an integer");
    return int(nearest);
}

inline std::vector<std::size_t> grid_row_loop(const Grid& g, int iy = 0) {
    std::vector<std::size_t> loop(g.n[0]);
    for (int ix = 0; ix < g.n[0]; ++ix) loop[ix] = g.index(ix, g.dim == 2 ? iy : 0);
    return loop;
}

inline std::vector<std::size_t> grid_col_loop(const Grid& g, int ix = 0) {
    std::vector<std::size_t> loop(g.n[1]);
    for (int iy = 0; iy < g.n[1]; ++iy) loop[iy] = g.index(ix, iy);
    return loop;
}

// Glues an interior frame to an exterior one through the lifted relative
// phase: result = e^{i chi theta} exterior. Requires zero winding on the
// fundamental loops (the torus seam plays the role of the gluing annulus).
inline GaugeFrame glue_frames(const GaugeFrame& interior, const GaugeFrame& exterior,
                              const RField& cutoff) {
    const Grid& g = interior.grid;
    if (exterior.grid != g || cutoff.grid != g) throw FrameMismatch("glue_frames: grid mismatch");
    if (winding_number(interior, exterior, grid_row_loop(g)) != 0)
        throw Obstructed("glue_frames: nonzero winding along axis 0");
    if (g.dim == 2 && winding_number(interior, exterior, grid_col_loop(g)) != 0)
        throw Obstructed("glue_frames: nonzero winding along axis 1");

    // unwrap theta over the cut domain: along row 0, then up each column
    RField theta(g, 1);
    const int nx = g.n[0], ny = g.n[1];
    double prev_row = detail::relative_phase(interior, exterior, g.index(0, 0));
    theta.at(g.index(0, 0), 0) = prev_row;
    for (int ix = 1; ix < nx; ++ix) {
        const double raw = detail::relative_phase(interior, exterior, g.index(ix, 0));
        prev_row += detail::wrap_to_pi(raw - prev_row);
        theta.at(g.index(ix, 0), 0) = prev_row;
    }
    if (g.dim == 2) {
        for (int ix = 0; ix < nx; ++ix) {
            double prev = theta.at(g.index(ix, 0), 0);
            for (int iy = 1; iy < ny; ++iy) {
                const double raw = detail::relative_phase(interior, exterior, g.index(ix, iy));
                prev += detail::wrap_to_pi(raw - prev);
                theta.at(g.index(ix, iy), 0) = prev;
            }
        }
    }

    const int m = interior.ambient;
    RField nu1(g, m), nu2(g, m);
    for (std::size_t p = 0; p < g.points(); ++p) {
        const double phi = cutoff.at(p, 0) * theta.at(p, 0);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < m; ++k) {
            nu1.at(p, k) = c * exterior.nu1.at(p, k) - s * exterior.nu2.at(p, k);
            nu2.at(p, k) = s * exterior.nu1.at(p, k) + c * exterior.nu2.at(p, k);
        }
    }
    return assemble_frame(g, std::move(nu1), std::move(nu2));
}

// ---------------------------------------------------------------------------
// Coulomb rotation
// ---------------------------------------------------------------------------

inline RField flat_divergence(const RField& A) {
    RField div(A.grid, 1);
    for (int a = 0; a < A.grid.dim; ++a) {
        RField one(A.grid, 1);
        for (std::size_t p = 0; p < A.points(); ++p) one.at(p, 0) = A.at(p, a);
        RField d = spectral_derivative(one, a, 1);
        for (std::size_t p = 0; p < A.points(); ++p) div.at(p, 0) += d.at(p, 0);
    }
    return div;
}

// Gauge action of e^{i theta}: m -> e^{i theta} m, hence A -> A - d theta.
inline GaugeFrame rotate_frame(const GaugeFrame& frame, const RField& theta) {
    const int m = frame.ambient;
    RField nu1(frame.grid, m), nu2(frame.grid, m);
    for (std::size_t p = 0; p < frame.grid.points(); ++p) {
        const double c = std::cos(theta.at(p, 0)), s = std::sin(theta.at(p, 0));
        for (int k = 0; k < m; ++k) {
            nu1.at(p, k) = c * frame.nu1.at(p, k) - s * frame.nu2.at(p, k);
            nu2.at(p, k) = s * frame.nu1.at(p, k) + c * frame.nu2.at(p, k);
        }
    }
    return assemble_frame(frame.grid, std::move(nu1), std::move(nu2));
}

// Rotates the frame by e^{i theta} with flat Poisson solve
// Delta theta = div A - div A_ref; the rotated connection has
// div(A_new - A_ref) = 0 exactly off the zero mode.
inline GaugeFrame coulomb_rotate(const GaugeFrame& frame, const GeometryBundle& geo,
                                 const RField* reference_A = nullptr) {
    RField rhs = flat_divergence(frame.A);
    if (reference_A) {
        RField dref = flat_divergence(*reference_A);
        for (std::size_t i = 0; i < rhs.v.size(); ++i) rhs.v[i] -= dref.v[i];
    }
    RField theta = apply_multiplier(rhs, [](const Spectrum& s, std::size_t p) {
        const double x2 = sq(s.xi_norm(p));
        return x2 > 0 ? cplx{-1.0 / x2, 0.0} : cplx{0, 0};
    });
    (void)geo;
    return rotate_frame(frame, theta);
}

// ---------------------------------------------------------------------------
// pullback
// ---------------------------------------------------------------------------

// Gram-Schmidt pullback of a frame onto a nearby immersion:
// nubar_j = nu_j - g_dst^{ab} <nu_j, d_a(F_dst - F_src)> d_b F_dst, then
// normalize / orthogonalize. Degenerate if any norm falls to 0.5.
inline GaugeFrame pullback_frame(const GaugeFrame& frame_src,
                                 const std::array<RField, 2>& dF_src,
                                 const GeometryBundle& geo_dst) {
    const int d = geo_dst.dim, m = geo_dst.ambient;
    RField c1 = frame_src.nu1, c2 = frame_src.nu2;
    for (std::size_t p = 0; p < geo_dst.grid.points(); ++p) {
        for (auto [cand, nu] : {std::pair<RField*, const RField*>{&c1, &frame_src.nu1},
                                {&c2, &frame_src.nu2}}) {
            std::array<double, 2> proj{};
            for (int a = 0; a < d; ++a) {
                double s = 0;
                for (int c = 0; c < m; ++c)
                    s += nu->at(p, c) * (geo_dst.dF[a].at(p, c) - dF_src[a].at(p, c));
                proj[a] = s;
            }
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    for (int c = 0; c < m; ++c)
                        cand->at(p, c) -=
                            geo_dst.ginv.at(p, a * d + b) * proj[a] * geo_dst.dF[b].at(p, c);
        }
    }
    // exact (ConsNu) normalization with the 0.5 degeneracy floor
    const std::size_t np = geo_dst.grid.points();
    RField nu1(geo_dst.grid, m), nu2(geo_dst.grid, m);
    for (std::size_t p = 0; p < np; ++p) {
        double n1 = 0;
        for (int c = 0; c < m; ++c) n1 += sq(c1.at(p, c));
        n1 = std::sqrt(n1);
        if (n1 <= 0.5) throw Degenerate("pullback_frame: |nubar_1| <= 0.5");
        for (int c = 0; c < m; ++c) nu1.at(p, c) = c1.at(p, c) / n1;
        double dot = 0;
        for (int c = 0; c < m; ++c) dot += c2.at(p, c) * nu1.at(p, c);
        double n2 = 0;
        for (int c = 0; c < m; ++c) {
            const double w = c2.at(p, c) - dot * nu1.at(p, c);
            nu2.at(p, c) = w;
            n2 += sq(w);
        }
        n2 = std::sqrt(n2);
        if (n2 <= 0.5) throw Degenerate("pullback_frame: |nubarbar_2| <= 0.5");
        for (int c = 0; c < m; ++c) nu2.at(p, c) /= n2;
    }
    return assemble_frame(geo_dst.grid, std::move(nu1), std::move(nu2));
}

inline GaugeFrame pullback_frame(const GaugeFrame& frame_src, const Immersion& im_src,
                                 const Immersion& im_dst) {
    std::array<RField, 2> dF_src;
    for (int a = 0; a < im_src.grid.dim; ++a) dF_src[a] = im_src.deriv1(a);
    return pullback_frame(frame_src, dF_src, compute_geometry(im_dst));
}

// ---------------------------------------------------------------------------

// Frames export through the shared snapshot format as one stacked field:
// nu1 | nu2 | A | B, component-fastest.
inline RField frame_as_field(const GaugeFrame& f) {
    const int d = f.grid.dim, m = f.ambient;
    RField out(f.grid, 2 * m + d + 1);
    for (std::size_t p = 0; p < f.grid.points(); ++p) {
        int c = 0;
        for (int k = 0; k < m; ++k) out.at(p, c++) = f.nu1.at(p, k);
        for (int k = 0; k < m; ++k) out.at(p, c++) = f.nu2.at(p, k);
        for (int k = 0; k < d; ++k) out.at(p, c++) = f.A.at(p, k);
        out.at(p, c) = f.B.v.empty() ? 0.0 : f.B.at(p, 0);
    }
    return out;
}

// Heat-gauge temporal connection B = nabla^a A_a = g^{ab}(d_a A_b - G^c_{ab} A_c).
inline RField heat_gauge_B(const GaugeFrame& frame, const GeometryBundle& geo) {
    const int d = geo.dim;
    CField Ac(geo.grid, d);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < d; ++a) Ac.at(p, a) = frame.A.at(p, a);
    const CField dA = cov_deriv(Ac, 1, geo, nullptr);
    RField B(geo.grid, 1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        double s = 0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                s += geo.ginv.at(p, a * d + b) * dA.at(p, a * d + b).real();
        B.at(p, 0) = s;
    }
    return B;
}

}  // namespace smcf
