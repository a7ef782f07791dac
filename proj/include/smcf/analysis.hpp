#pragma once

// Linearization diagnostics and surface comparison:
//   decompose_variation      dF_s = Xi + U^g dF_g, omega = Xi . m
//   linearized_residual      the linearized Schrodinger equation for omega and
//                            the tangential transport law for U, evaluated on
//                            a co-evolved pair divided by its separation
//   energy_growth            Gronwall fit of d/dt log ||omega||^2_{L2(dvol)}
//   l2_distance              int_Sigma d(x, Sigma_b)^2 dvol via nearest-point
//                            Gauss-Newton with grid seeding
//   matched_reparametrization  re-parametrizes a graph so F_b(x) sits on the
//                            normal ray of F_a(x)
//   uniqueness_experiment    co-evolution + Gronwall verdict

#include <cmath>
#include <vector>

#include "smcf/flows.hpp"

namespace smcf {

struct LinearizedState {
    CField omega;  // 1 component
    RField U;      // d components, raised index
};

inline LinearizedState decompose_variation(const GeometryBundle& geo, const GaugeFrame& frame,
                                           const RField& variation) {
    if (variation.grid != geo.grid) throw FrameMismatch("decompose_variation: grid mismatch");
    const int d = geo.dim, m = geo.ambient;
    LinearizedState st{CField(geo.grid, 1), RField(geo.grid, d)};
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        std::array<double, 2> vlow{};
        for (int a = 0; a < d; ++a) {
            double s = 0;
            for (int c = 0; c < m; ++c) s += variation.at(p, c) * geo.dF[a].at(p, c);
            vlow[a] = s;
        }
        std::array<double, 2> up{};
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) up[a] += geo.ginv.at(p, a * d + b) * vlow[b];
        for (int a = 0; a < d; ++a) st.U.at(p, a) = up[a];
        double xr = 0, xi = 0;
        for (int c = 0; c < m; ++c) {
            double tangential = 0;
            for (int a = 0; a < d; ++a) tangential += up[a] * geo.dF[a].at(p, c);
            const double xc = variation.at(p, c) - tangential;
            xr += xc * frame.nu1.at(p, c);
            xi += xc * frame.nu2.at(p, c);
        }
        st.omega.at(p, 0) = {xr, xi};
    }
    return st;
}

inline RField reconstruct_variation(const LinearizedState& st, const GeometryBundle& geo,
                                    const GaugeFrame& frame) {
    const int d = geo.dim, m = geo.ambient;
    RField out(geo.grid, m);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int c = 0; c < m; ++c) {
            double v = st.omega.at(p, 0).real() * frame.nu1.at(p, c) +
                       st.omega.at(p, 0).imag() * frame.nu2.at(p, c);
            for (int a = 0; a < d; ++a) v += st.U.at(p, a) * geo.dF[a].at(p, c);
            out.at(p, c) = v;
        }
    return out;
}

// ---------------------------------------------------------------------------
// linearized equations along a co-evolved pair
// ---------------------------------------------------------------------------

struct LinearizedResidual {
    std::vector<double> omega_eq;  // max-norm of the omega equation per slice
    std::vector<double> u_eq;      // max-norm of the tangential law per slice
};

// Series of base states plus the normalized variation (delta F / separation).
// V is the base run's advection field (zero in the temporal gauge); B is
// realized from the frame series by time differencing.
inline LinearizedResidual linearized_residual(const std::vector<TrajectorySample>& base,
                                              const std::vector<RField>& variation, double dt) {
    if (base.size() < 5 || variation.size() != base.size())
        throw InsufficientSamples("linearized_residual: need >= 5 matched slices");
    const Grid& grid = base.front().state.im.grid;
    const int d = grid.dim;

    std::vector<GeometryBundle> geos(base.size());
    std::vector<CField> omegas(base.size());
    std::vector<RField> Ulows(base.size()), nu1s(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        geos[i] = compute_geometry(base[i].state.im);
        auto dec = decompose_variation(geos[i], base[i].state.frame, variation[i]);
        omegas[i] = dec.omega;
        RField ul(grid, d);
        for (std::size_t p = 0; p < grid.points(); ++p)
            for (int a = 0; a < d; ++a) {
                double s = 0;
                for (int b = 0; b < d; ++b)
                    s += geos[i].g.at(p, a * d + b) * dec.U.at(p, b);
                ul.at(p, a) = s;
            }
        Ulows[i] = std::move(ul);
        nu1s[i] = base[i].state.frame.nu1;
    }

    LinearizedResidual out;
    for (std::size_t i = 2; i + 2 < base.size(); ++i) {
        const GeometryBundle& geo = geos[i];
        const GaugeFrame& frame = base[i].state.frame;
        const ComplexShape sh = complex_shape(geo, frame);
        const CField lmix = mixed_lambda(sh, geo);
        const RField& Vup = base[i].V;

        // realized temporal connection B = (d_t nu1) . nu2
        const RField dnu1 = detail::time_derivative_4(nu1s, i, dt);
        RField B(grid, 1);
        for (std::size_t p = 0; p < grid.points(); ++p) {
            double s = 0;
            for (int c = 0; c < frame.ambient; ++c)
                s += dnu1.at(p, c) * frame.nu2.at(p, c);
            B.at(p, 0) = s;
        }

        const CField om_dot = detail::time_derivative_4(omegas, i, dt);
        const CField gom = detail::grad_A_psi(omegas[i], geo, frame.A);
        const CField lap_om = detail::laplace_A(omegas[i], geo, frame.A);
        const CField gpsi = detail::grad_A_psi(sh.psi, geo, frame.A);

        double worst_om = 0;
        for (std::size_t p = 0; p < grid.points(); ++p) {
            cplx lhs = om_dot.at(p, 0) + cplx(0, B.at(p, 0)) * omegas[i].at(p, 0);
            for (int g2 = 0; g2 < d; ++g2) lhs -= Vup.at(p, g2) * gom.at(p, g2);
            lhs *= cplx(0, 1);
            lhs += lap_om.at(p, 0);
            // + Re(lam^{ab} conj(omega)) lam_{ab}
            cplx src = 0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    cplx lup = 0;
                    for (int mu = 0; mu < d; ++mu)
                        lup += geo.ginv.at(p, b * d + mu) * lmix.at(p, a * d + mu);
                    src += (lup * std::conj(omegas[i].at(p, 0))).real() *
                           sh.lambda.at(p, a * d + b);
                }
            worst_om = std::max(worst_om, std::abs(lhs + src));
        }
        out.omega_eq.push_back(worst_om);

        // tangential law (temporal gauge: V and d_s V vanish)
        const RField U_dot = detail::time_derivative_4(Ulows, i, dt);
        double worst_u = 0;
        for (std::size_t p = 0; p < grid.points(); ++p) {
            const cplx psi = sh.psi.at(p, 0);
            const cplx om = omegas[i].at(p, 0);
            for (int a = 0; a < d; ++a) {
                double rhs = (psi * std::conj(gom.at(p, a))).imag();
                rhs -= (gpsi.at(p, a) * std::conj(om)).imag();
                // 2 Im(psi conj(lam^g_a)) U_g with U_g the lowered components
                for (int g2 = 0; g2 < d; ++g2)
                    rhs += 2.0 * (psi * std::conj(lmix.at(p, g2 * d + a))).imag() *
                           Ulows[i].at(p, g2);
                worst_u = std::max(worst_u, std::abs(U_dot.at(p, a) - rhs));
            }
        }
        out.u_eq.push_back(worst_u);
    }
    return out;
}

// Gronwall fit: max over interior samples of d/dt log ||omega||^2_{L2(dvol)}.
inline double energy_growth(const std::vector<double>& omega_l2, double dt) {
    if (omega_l2.size() < 10)
        throw InsufficientSamples("energy_growth: need at least 10 samples");
    double cmax = -1e300;
    for (std::size_t i = 1; i + 1 < omega_l2.size(); ++i) {
        const double lo = 2.0 * std::log(omega_l2[i - 1]);
        const double hi = 2.0 * std::log(omega_l2[i + 1]);
        cmax = std::max(cmax, (hi - lo) / (2 * dt));
    }
    return cmax;
}

// ---------------------------------------------------------------------------
// surface distance and matched parametrizations
// ---------------------------------------------------------------------------

namespace detail {

// nearest parameter point on b to the ambient point target, seeded at x0;
// damped Gauss-Newton on |F_b(x') - target|^2
inline std::array<double, 2> nearest_point(const ImmersionSampler& b, const double* target,
                                           double x0, double x1, double box_scale) {
    const int d = b.immersion().grid.dim, m = b.immersion().ambient;
    double x[2] = {x0, x1};
    double fb[4], jb0[4], jb1[4];
    double mu = 1e-10;
    auto phi = [&](const double* xx) {
        double val[4];
        b.value(xx[0], xx[1], val);
        double s = 0;
        for (int c = 0; c < m; ++c) s += sq(val[c] - target[c]);
        return 0.5 * s;
    };
    double cur = phi(x);
    for (int it = 0; it < 20; ++it) {
        b.value(x[0], x[1], fb);
        b.deriv(0, x[0], x[1], jb0);
        if (d == 2) b.deriv(1, x[0], x[1], jb1);
        double grad[2] = {0, 0}, H[2][2] = {{0, 0}, {0, 0}};
        for (int c = 0; c < m; ++c) {
            const double r = fb[c] - target[c];
            grad[0] += r * jb0[c];
            H[0][0] += jb0[c] * jb0[c];
            if (d == 2) {
                grad[1] += r * jb1[c];
                H[0][1] += jb0[c] * jb1[c];
                H[1][1] += jb1[c] * jb1[c];
            }
        }
        H[1][0] = H[0][1];
        const double gn = std::hypot(grad[0], grad[1]);
        if (gn < 1e-13) break;
        double step[2] = {0, 0};
        if (d == 1) {
            step[0] = -grad[0] / (H[0][0] + mu);
        } else {
            const double det = (H[0][0] + mu) * (H[1][1] + mu) - H[0][1] * H[1][0];
            step[0] = -((H[1][1] + mu) * grad[0] - H[0][1] * grad[1]) / det;
            step[1] = -(-H[1][0] * grad[0] + (H[0][0] + mu) * grad[1]) / det;
        }
        double trial[2] = {x[0] + step[0], x[1] + step[1]};
        const double tv = phi(trial);
        if (tv <= cur) {
            x[0] = trial[0];
            x[1] = trial[1];
            cur = tv;
            mu = std::max(mu * 0.3, 1e-12);
        } else {
            mu *= 10.0;
        }
        if (std::abs(x[0] - x0) + std::abs(x[1] - x1) > 0.5 * box_scale)
            throw NoNearestPoint("nearest_point: search left the seeding neighborhood");
    }
    return {x[0], x[1]};
}

}  // namespace detail

// d_{L2}^2(Sigma_a, Sigma_b) = int_a d(F_a(x), Sigma_b)^2 dvol_a.
inline double l2_distance(const Immersion& im_a, const Immersion& im_b) {
    const GeometryBundle geo_a = compute_geometry(im_a);
    const ImmersionSampler sb(im_b);
    const int m = im_a.ambient;
    const double box = std::min(im_b.grid.len[0],
                                im_b.grid.dim == 2 ? im_b.grid.len[1] : im_b.grid.len[0]);
    double acc = 0;
    for (int ix = 0; ix < im_a.grid.n[0]; ++ix)
        for (int iy = 0; iy < im_a.grid.n[1]; ++iy) {
            const std::size_t p = im_a.grid.index(ix, iy);
            const auto fa = im_a.value(p);
            // same-index seed (the immersions share parameter conventions)
            const double sx = im_b.grid.coord(0, ix % im_b.grid.n[0]);
            const double sy = im_b.grid.dim == 2 ? im_b.grid.coord(1, iy % im_b.grid.n[1]) : 0;
            const auto xb = detail::nearest_point(sb, fa.data(), sx, sy, box);
            double fb[4];
            sb.value(xb[0], xb[1], fb);
            double d2 = 0;
            for (int c = 0; c < m; ++c) d2 += sq(fa[c] - fb[c]);
            acc += d2 * std::sqrt(geo_a.det_g.at(p, 0));
        }
    return std::sqrt(acc * im_a.grid.cell_volume());
}

// Re-parametrizes im_b so that F_b(x) lies on the normal ray of F_a(x):
// solves J_a(x)^T (F_b(x') - F_a(x)) = 0 per grid point.
inline Immersion matched_reparametrization(const Immersion& im_a, const Immersion& im_b) {
    const int d = im_a.grid.dim, m = im_a.ambient;
    // both must be graphs over the same affine base with moderate slope
    for (std::size_t i = 0; i < im_a.base.size(); ++i)
        if (std::abs(im_a.base[i] - im_b.base[i]) > 1e-12)
            throw NotGraphLike("matched_reparametrization: different affine bases");
    for (const Immersion* im : {&im_a, &im_b}) {
        for (int a = 0; a < d; ++a) {
            RField du = spectral_derivative(im->u, a, 1);
            for (std::size_t p = 0; p < im->grid.points(); ++p) {
                double s = 0;
                for (int c = 0; c < m; ++c) s += sq(du.at(p, c));
                if (std::sqrt(s) >= 0.5)
                    throw NotGraphLike("matched_reparametrization: slope bound exceeded");
            }
        }
    }

    const GeometryBundle geo_a = compute_geometry(im_a);
    const ImmersionSampler sb(im_b);
    Immersion out = im_b;
    out.time = im_b.time;
    for (int ix = 0; ix < im_a.grid.n[0]; ++ix)
        for (int iy = 0; iy < im_a.grid.n[1]; ++iy) {
            const std::size_t p = im_a.grid.index(ix, iy);
            const auto fa = im_a.value(p);
            double x[2] = {im_a.grid.coord(0, ix), d == 2 ? im_a.grid.coord(1, iy) : 0.0};
            double fb[4], jb0[4], jb1[4];
            for (int it = 0; it < 30; ++it) {
                sb.value(x[0], x[1], fb);
                sb.deriv(0, x[0], x[1], jb0);
                if (d == 2) sb.deriv(1, x[0], x[1], jb1);
                // residual R_a = J_a^T (F_b - F_a), Jacobian ~ J_a^T J_b
                double R[2] = {0, 0}, M[2][2] = {{0, 0}, {0, 0}};
                for (int c = 0; c < m; ++c) {
                    const double r = fb[c] - fa[c];
                    R[0] += geo_a.dF[0].at(p, c) * r;
                    M[0][0] += geo_a.dF[0].at(p, c) * jb0[c];
                    if (d == 2) {
                        R[1] += geo_a.dF[1].at(p, c) * r;
                        M[0][1] += geo_a.dF[0].at(p, c) * jb1[c];
                        M[1][0] += geo_a.dF[1].at(p, c) * jb0[c];
                        M[1][1] += geo_a.dF[1].at(p, c) * jb1[c];
                    }
                }
                double step[2] = {0, 0};
                if (d == 1) {
                    step[0] = -R[0] / M[0][0];
                } else {
                    const double det = M[0][0] * M[1][1] - M[0][1] * M[1][0];
                    step[0] = -(M[1][1] * R[0] - M[0][1] * R[1]) / det;
                    step[1] = -(-M[1][0] * R[0] + M[0][0] * R[1]) / det;
                }
                x[0] += step[0];
                x[1] += step[1];
                if (std::abs(step[0]) + std::abs(step[1]) < 1e-14) break;
            }
            sb.value(x[0], x[1], fb);
            for (int c = 0; c < m; ++c) {
                double base_part = im_a.base_at(c, 0) * im_a.grid.coord(0, ix);
                if (d == 2) base_part += im_a.base_at(c, 1) * im_a.grid.coord(1, iy);
                out.u.at(p, c) = fb[c] - base_part;
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// uniqueness experiment
// ---------------------------------------------------------------------------

struct UniquenessReport {
    std::vector<double> t;
    std::vector<double> d_l2;
    std::vector<double> omega_l2;
    std::vector<double> omega_h1;  // intrinsic H^1 of omega
    std::vector<double> u_l2;      // |U|_g in L^2(dvol)
    double c_fit = 0;       // max d/dt log ||omega||^2
    double ratio = 0;       // d(T) / d(0)
    double bound = 0;       // exp(c_fit T / 2) * 1.1
    bool pass = false;
};

inline UniquenessReport uniqueness_experiment(const FlowState& a0, const FlowState& b0,
                                              double T, double dt, int samples = 10) {
    UniquenessReport rep;
    FlowState a = a0, b = b0;
    const int per = std::max(1, int(std::lround(T / dt / samples)));
    const int steps = int(std::lround(T / dt));
    for (int i = 0; i <= steps; ++i) {
        if (i % per == 0 || i == steps) {
            rep.t.push_back(a.im.time);
            rep.d_l2.push_back(l2_distance(a.im, b.im));
            Immersion matched = matched_reparametrization(a.im, b.im);
            GeometryBundle geo = compute_geometry(a.im);
            RField delta(a.im.grid, a.im.ambient);
            for (std::size_t k = 0; k < delta.v.size(); ++k)
                delta.v[k] = matched.u.v[k] - a.im.u.v[k];
            auto dec = decompose_variation(geo, a.frame, delta);
            RField om2(a.im.grid, 1);
            for (std::size_t p = 0; p < om2.points(); ++p)
                om2.at(p, 0) = std::norm(dec.omega.at(p, 0));
            rep.omega_l2.push_back(std::sqrt(integrate_dvol(om2, geo)));
            const CField gom = detail::grad_A_psi(dec.omega, geo, a.frame.A);
            RField gom2 = tensor_sqnorm_g(gom, 1, geo);
            rep.omega_h1.push_back(
                std::sqrt(integrate_dvol(om2, geo) + integrate_dvol(gom2, geo)));
            RField u2(a.im.grid, 1);
            const int dd = a.im.grid.dim;
            for (std::size_t p = 0; p < u2.points(); ++p) {
                double s = 0;
                for (int al = 0; al < dd; ++al)
                    for (int be = 0; be < dd; ++be)
                        s += geo.g.at(p, al * dd + be) * dec.U.at(p, al) * dec.U.at(p, be);
                u2.at(p, 0) = s;
            }
            rep.u_l2.push_back(std::sqrt(integrate_dvol(u2, geo)));
        }
        if (i < steps) {
            a = step_rk4(a, dt);
            b = step_rk4(b, dt);
        }
    }
    // Gronwall fit on the omega series at the sampling stride
    const double dts = double(per) * dt;
    double cmax = 0;
    for (std::size_t i = 1; i + 1 < rep.omega_l2.size(); ++i)
        cmax = std::max(cmax, (2 * std::log(rep.omega_l2[i + 1]) -
                               2 * std::log(rep.omega_l2[i - 1])) /
                                  (2 * dts));
    rep.c_fit = cmax;
    rep.ratio = rep.d_l2.back() / rep.d_l2.front();
    rep.bound = std::exp(0.5 * rep.c_fit * T) * 1.1;
    rep.pass = rep.ratio <= rep.bound;
    return rep;
}

}  // namespace smcf
