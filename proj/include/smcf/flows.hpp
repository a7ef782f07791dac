#pragma once

// Time evolution and the regularized Euler scheme.
//
//   smcf_velocity      dF/dt = -Im(psi conj(m)) + V^g dF_g  (= J H + V dF)
//   step_rk4           classical four-stage step; the frame follows by
//                      Gram-Schmidt pullback at every stage (temporal frame
//                      gauge), or by integrating the frame equation of motion
//                      with B = nabla^a A_a (heat gauge) for residual runs
//   willmore_velocity  the sixth-order Willmore-DeTurck right side, evaluated
//                      through the complex shape (L m-bar form)
//   willmore_regularize  first-order semi-implicit splitting with the
//                      constant-coefficient tri-Laplacian treated implicitly
//   euler_step         F1 = F_eps - eps Im(psi_eps conj(m_eps))
//   run_regularized_euler  alternates the two, with per-step diagnostics
//   schrodinger_residual / parabolic_residual  evaluate the gauge-fixed
//                      Schrodinger-parabolic system on a sampled trajectory
//   heat_reparametrize coordinate relaxation by the frozen-metric heat flow
//
// Stability: after each full RK4 step the map's spectrum is truncated at the
// dispersion-stability radius dt * |g^{-1}| * xi^2 <= 2.5 (inside the RK4
// imaginary-axis limit 2 sqrt 2). For resolved runs those modes carry only
// rounding noise.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "smcf/frame.hpp"
#include "smcf/initial_data.hpp"

namespace smcf {

struct FlowState {
    Immersion im;
    GaugeFrame frame;
};

enum class Scheme { rk4_direct, regularized_euler };
enum class CoordinateGauge { temporal, heat };
enum class FramePropagation { pullback, gauge_ode };

struct FlowConfig {
    double dt = 1e-3;
    double t_end = 0.1;
    Scheme scheme = Scheme::rk4_direct;
    double cfl_safety = 0.6;
    bool allow_dt_override = false;

    // dispersive stability heuristic dt <= cfl * h^2 / |g^{-1}|
    void validate(const GeometryBundle& geo) const {
        const double h = geo.grid.min_spacing();
        const double bound = cfl_safety * h * h / ginv_max_eig(geo);
        if (dt > bound && !allow_dt_override)
            throw ValidationError("FlowConfig: dt exceeds the stability heuristic");
        if (!(dt > 0) || cfl_safety <= 0 || cfl_safety > 1)
            throw ValidationError("FlowConfig: bad dt or cfl_safety");
    }
};

struct EulerSchemeConfig {
    double epsilon = 1e-3;
    double willmore_time = 0;     // must equal epsilon^{3/2}
    int willmore_substeps = 16;
    double splitting_constant = 0;  // <= 0: use min-eig(g^{-1})^3

    static EulerSchemeConfig for_epsilon(double eps, int substeps = 16, double c_split = 0) {
        EulerSchemeConfig c;
        c.epsilon = eps;
        c.willmore_time = std::pow(eps, 1.5);
        c.willmore_substeps = substeps;
        c.splitting_constant = c_split;
        c.validate();
        return c;
    }
    void validate() const {
        if (!(epsilon > 0)) throw ValidationError("EulerSchemeConfig: epsilon must be positive");
        if (std::abs(willmore_time - std::pow(epsilon, 1.5)) > 1e-12 * std::pow(epsilon, 1.5))
            throw ValidationError("EulerSchemeConfig: willmore_time must equal epsilon^1.5");
        if (willmore_substeps < 4)
            throw ValidationError("EulerSchemeConfig: willmore_substeps >= 4");
    }
};

// ---------------------------------------------------------------------------
// pointwise helpers
// ---------------------------------------------------------------------------

namespace detail {

// V^g from the heat coordinate condition V^g = g^{ab} Gamma^g_{ab}
inline RField heat_coordinate_V(const GeometryBundle& geo) {
    const int d = geo.dim;
    RField V(geo.grid, d);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int c = 0; c < d; ++c) {
            double s = 0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    s += geo.ginv.at(p, a * d + b) * geo.gamma.at(p, (c * d + a) * d + b);
            V.at(p, c) = s;
        }
    return V;
}

// nabla^A psi as a rank-1 charged tensor (psi scalar of charge 1)
inline CField grad_A_psi(const CField& psi, const GeometryBundle& geo, const RField& A) {
    const int d = geo.dim;
    CField out(geo.grid, d);
    std::array<CField, 2> dpsi;
    for (int a = 0; a < d; ++a) dpsi[a] = spectral_derivative(psi, a, 1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < d; ++a)
            out.at(p, a) = dpsi[a].at(p, 0) + cplx(0, A.at(p, a)) * psi.at(p, 0);
    return out;
}

// covariant magnetic Laplacian on a charged scalar
inline CField laplace_A(const CField& psi, const GeometryBundle& geo, const RField& A) {
    const int d = geo.dim;
    CField g1 = grad_A_psi(psi, geo, A);
    CField g2 = cov_deriv(g1, 1, geo, &A);
    CField out(geo.grid, 1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        cplx s = 0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                s += geo.ginv.at(p, a * d + b) * g2.at(p, a * d + b);
        out.at(p, 0) = s;
    }
    return out;
}

// scalar Laplace-Beltrami on each component of a real field
inline RField laplace_beltrami(const RField& f, const GeometryBundle& geo) {
    const int d = geo.dim;
    RField out(geo.grid, f.comps);
    std::array<RField, 2> df, d2f;
    for (int a = 0; a < d; ++a) df[a] = spectral_derivative(f, a, 1);
    d2f[0] = spectral_derivative(f, 0, 2);
    if (d == 2) d2f[1] = spectral_derivative(f, 1, 2);
    RField dxy = d == 2 ? spectral_derivative(df[0], 1, 1) : RField();
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int c = 0; c < f.comps; ++c) {
            double s = 0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    const double hess = (a == b) ? d2f[a].at(p, c) : dxy.at(p, c);
                    double gam = 0;
                    for (int s2 = 0; s2 < d; ++s2)
                        gam += geo.gamma.at(p, (s2 * d + a) * d + b) * df[s2].at(p, c);
                    s += geo.ginv.at(p, a * d + b) * (hess - gam);
                }
            out.at(p, c) = s;
        }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SMCF velocity and the direct integrator
// ---------------------------------------------------------------------------

inline RField smcf_velocity(const GeometryBundle& geo, const GaugeFrame& frame,
                            const RField* V = nullptr) {
    const int d = geo.dim, m = geo.ambient;
    const ComplexShape sh = complex_shape(geo, frame);
    RField vel(geo.grid, m);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        const cplx psi = sh.psi.at(p, 0);
        for (int c = 0; c < m; ++c) {
            // -Im(psi m-bar) = Re(psi) nu2 - Im(psi) nu1
            double v = psi.real() * frame.nu2.at(p, c) - psi.imag() * frame.nu1.at(p, c);
            if (V)
                for (int a = 0; a < d; ++a) v += V->at(p, a) * geo.dF[a].at(p, c);
            vel.at(p, c) = v;
        }
    }
    return dealias(vel);
}

inline RField smcf_velocity(const Immersion& im, const GaugeFrame& frame,
                            const RField* V = nullptr) {
    return smcf_velocity(compute_geometry(im), frame, V);
}

namespace detail {

inline void stability_truncate(Immersion& im, double dt, double ginv_max) {
    const double xi2 = 2.5 / (dt * ginv_max);
    im.u = dealias(truncate_above(im.u, std::sqrt(xi2)));
}

struct GaugeOdeRates {
    RField du;    // ambient comps
    RField dnu1;  // ambient comps
    RField dnu2;
};

// time derivatives of (u, nu1, nu2) under the chosen coordinate gauge with the
// frame equation of motion d^B_t m = -i (nabla^{A,a} psi - i lam^a_g V^g) F_a
inline GaugeOdeRates gauge_ode_rates(const Immersion& im, const GaugeFrame& frame,
                                     CoordinateGauge cg) {
    const GeometryBundle geo = compute_geometry(im);
    const int d = geo.dim, m = geo.ambient;
    RField V = cg == CoordinateGauge::heat ? heat_coordinate_V(geo) : RField(geo.grid, d);
    GaugeOdeRates r{smcf_velocity(geo, frame, &V), RField(geo.grid, m), RField(geo.grid, m)};

    const ComplexShape sh = complex_shape(geo, frame);
    const CField gpsi = grad_A_psi(sh.psi, geo, frame.A);
    const CField lm = mixed_lambda(sh, geo);
    const RField B = heat_gauge_B(frame, geo);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        // tangential coefficient c^a = nabla^{A,a} psi - i lam^a_g V^g
        std::array<cplx, 2> coef{};
        for (int a = 0; a < d; ++a) {
            cplx up = 0;
            for (int b = 0; b < d; ++b) up += geo.ginv.at(p, a * d + b) * gpsi.at(p, b);
            cplx adv = 0;
            for (int g2 = 0; g2 < d; ++g2) adv += lm.at(p, a * d + g2) * V.at(p, g2);
            coef[a] = up - cplx(0, 1) * adv;
        }
        for (int c = 0; c < m; ++c) {
            // dm/dt = -i B m - i c^a F_a
            cplx dm = -cplx(0, B.at(p, 0)) *
                      cplx(frame.nu1.at(p, c), frame.nu2.at(p, c));
            for (int a = 0; a < d; ++a)
                dm -= cplx(0, 1) * coef[a] * geo.dF[a].at(p, c);
            r.dnu1.at(p, c) = dm.real();
            r.dnu2.at(p, c) = dm.imag();
        }
    }
    return r;
}

}  // namespace detail

// One classical RK4 step. With FramePropagation::pullback the frame is pulled
// back onto each stage immersion; with gauge_ode the frame vectors join the
// RK4 state and follow the heat-gauge (B = nabla A) equation of motion.
inline FlowState step_rk4(const FlowState& state, double dt,
                          CoordinateGauge cg = CoordinateGauge::temporal,
                          FramePropagation fp = FramePropagation::pullback) {
    const Grid& grid = state.im.grid;
    const int d = grid.dim;

    if (fp == FramePropagation::gauge_ode) {
        auto advance = [&](const FlowState& s, const detail::GaugeOdeRates& k, double a) {
            FlowState out = s;
            out.im.u = axpy(a, k.du, state.im.u);
            out.im.time = state.im.time + a;
            out.frame.nu1 = axpy(a, k.dnu1, state.frame.nu1);
            out.frame.nu2 = axpy(a, k.dnu2, state.frame.nu2);
            out.frame.A = connection_from_frame(out.frame.nu1, out.frame.nu2);
            return out;
        };
        const auto k1 = detail::gauge_ode_rates(state.im, state.frame, cg);
        FlowState s2 = advance(state, k1, dt / 2);
        const auto k2 = detail::gauge_ode_rates(s2.im, s2.frame, cg);
        FlowState s3 = advance(state, k2, dt / 2);
        const auto k3 = detail::gauge_ode_rates(s3.im, s3.frame, cg);
        FlowState s4 = advance(state, k3, dt);
        const auto k4 = detail::gauge_ode_rates(s4.im, s4.frame, cg);

        FlowState out = state;
        for (std::size_t i = 0; i < out.im.u.v.size(); ++i)
            out.im.u.v[i] += dt / 6 *
                             (k1.du.v[i] + 2 * k2.du.v[i] + 2 * k3.du.v[i] + k4.du.v[i]);
        RField nu1 = state.frame.nu1, nu2 = state.frame.nu2;
        for (std::size_t i = 0; i < nu1.v.size(); ++i) {
            nu1.v[i] += dt / 6 *
                        (k1.dnu1.v[i] + 2 * k2.dnu1.v[i] + 2 * k3.dnu1.v[i] + k4.dnu1.v[i]);
            nu2.v[i] += dt / 6 *
                        (k1.dnu2.v[i] + 2 * k2.dnu2.v[i] + 2 * k3.dnu2.v[i] + k4.dnu2.v[i]);
        }
        out.im.time = state.im.time + dt;
        GeometryBundle geo_mid = compute_geometry(out.im);
        detail::stability_truncate(out.im, dt, ginv_max_eig(geo_mid));
        GeometryBundle geo = compute_geometry(out.im);
        // constraint cleanup: re-project and orthonormalize (O(dt^5) drift)
        out.frame = frame_from_candidates<Degenerate>(geo, nu1, nu2, 0.5, "step_rk4");
        return out;
    }

    const GeometryBundle geo0 = compute_geometry(state.im);
    std::array<RField, 2> dF0;
    for (int a = 0; a < d; ++a) dF0[a] = geo0.dF[a];

    auto stage_velocity = [&](const RField& du, double a, RField& out) {
        Immersion im = state.im;
        im.u = axpy(a, du, state.im.u);
        im.time = state.im.time + a;
        GeometryBundle geo = compute_geometry(im);
        GaugeFrame fr = pullback_frame(state.frame, dF0, geo);
        RField V = cg == CoordinateGauge::heat ? detail::heat_coordinate_V(geo)
                                               : RField(geo.grid, d);
        out = smcf_velocity(geo, fr, &V);
    };

    RField k1, k2, k3, k4;
    {
        RField V = cg == CoordinateGauge::heat ? detail::heat_coordinate_V(geo0)
                                               : RField(grid, d);
        k1 = smcf_velocity(geo0, state.frame, &V);
    }
    stage_velocity(k1, dt / 2, k2);
    stage_velocity(k2, dt / 2, k3);
    stage_velocity(k3, dt, k4);

    FlowState out = state;
    for (std::size_t i = 0; i < out.im.u.v.size(); ++i)
        out.im.u.v[i] += dt / 6 * (k1.v[i] + 2 * k2.v[i] + 2 * k3.v[i] + k4.v[i]);
    out.im.time = state.im.time + dt;
    detail::stability_truncate(out.im, dt, ginv_max_eig(geo0));
    out.frame = pullback_frame(state.frame, dF0, compute_geometry(out.im));
    return out;
}

// ---------------------------------------------------------------------------
// Willmore-DeTurck flow
// ---------------------------------------------------------------------------

// Full right side of the Willmore-DeTurck flow: U^g dF_g + Re(L m-bar) with
// L assembled from psi, lambda and nabla^A, and U^g = Delta_g^2 (g^{ab} G^g_{ab}).
inline RField willmore_velocity(const GeometryBundle& geo, const GaugeFrame& frame) {
    const int d = geo.dim, m = geo.ambient;
    const ComplexShape sh = complex_shape(geo, frame);
    const RField& A = frame.A;

    const CField gpsi = detail::grad_A_psi(sh.psi, geo, A);       // nabla^A_a psi
    const CField hess = cov_deriv(gpsi, 1, geo, &A);              // nabla^A_a nabla^A_b psi
    const CField lap = detail::laplace_A(sh.psi, geo, A);         // Delta^A psi
    const CField lap2 = detail::laplace_A(lap, geo, A);           // (Delta^A)^2 psi

    // |psi|^2 and its plain gradient
    RField psi2(geo.grid, 1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) psi2.at(p, 0) = std::norm(sh.psi.at(p, 0));
    std::array<RField, 2> dpsi2;
    for (int a = 0; a < d; ++a) dpsi2[a] = spectral_derivative(psi2, a, 1);

    RField vel(geo.grid, m);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        auto gi = [&](int a, int b) { return geo.ginv.at(p, a * d + b); };
        auto lam = [&](int a, int b) { return sh.lambda.at(p, a * d + b); };
        // raised tensors at this point
        cplx lam_up[2][2], gpsi_up[2];
        for (int a = 0; a < d; ++a) {
            cplx s = 0;
            for (int b = 0; b < d; ++b) s += gi(a, b) * gpsi.at(p, b);
            gpsi_up[a] = s;
        }
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                cplx s = 0;
                for (int mu = 0; mu < d; ++mu)
                    for (int nu = 0; nu < d; ++nu) s += gi(a, mu) * gi(b, nu) * lam(mu, nu);
                lam_up[a][b] = s;
            }

        const cplx psi = sh.psi.at(p, 0);
        const cplx dpsi_lap = lap.at(p, 0);
        cplx L = lap2.at(p, 0);

        // lam^{ab} Re(lam_{ab} conj(Delta psi)) - lam^{ab} Re(nabla_a psi conj(nabla_b psi))
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                L += lam_up[a][b] * (lam(a, b) * std::conj(dpsi_lap)).real();
                L -= lam_up[a][b] * (gpsi.at(p, a) * std::conj(gpsi.at(p, b))).real();
            }

        // |nabla^A psi|^2_g
        double gp2 = 0;
        for (int a = 0; a < d; ++a) gp2 += (gpsi_up[a] * std::conj(gpsi.at(p, a))).real();
        L += 1.5 * psi * gp2;

        // nabla^A_s psi (2 Re(lam^{as} conj(nabla_a psi)) + 1/2 nabla^s |psi|^2)
        for (int s = 0; s < d; ++s) {
            double par = 0;
            for (int a = 0; a < d; ++a)
                par += 2.0 * (lam_up[a][s] * std::conj(gpsi.at(p, a))).real();
            double grad_up = 0;
            for (int b = 0; b < d; ++b) grad_up += gi(s, b) * dpsi2[b].at(p, 0);
            L += gpsi.at(p, s) * (par + 0.5 * grad_up);
        }

        // psi Re(lam^{as} conj(nabla_s nabla_a psi)) + nabla_s nabla_a psi Re(lam^{as} conj(psi))
        for (int a = 0; a < d; ++a)
            for (int s = 0; s < d; ++s) {
                const cplx h = hess.at(p, s * d + a);
                L += psi * (lam_up[a][s] * std::conj(h)).real();
                L += h * (lam_up[a][s] * std::conj(psi)).real();
            }

        for (int c = 0; c < m; ++c)
            vel.at(p, c) = L.real() * frame.nu1.at(p, c) + L.imag() * frame.nu2.at(p, c);
    }

    // DeTurck term U^g dF_g with U = Delta_g^2 (heat-coordinate V)
    RField U = detail::laplace_beltrami(
        detail::laplace_beltrami(detail::heat_coordinate_V(geo), geo), geo);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int c = 0; c < m; ++c)
            for (int a = 0; a < d; ++a) vel.at(p, c) += U.at(p, a) * geo.dF[a].at(p, c);

    return dealias(vel);
}

inline RField willmore_velocity(const Immersion& im, const GaugeFrame& frame) {
    return willmore_velocity(compute_geometry(im), frame);
}

// Integrates dF/ds = willmore_velocity to s = eps^{3/2} by semi-implicit
// splitting: modes advance by (1 + ds c |xi|^6)^{-1} (u-hat + ds Nonstiff-hat)
// with Nonstiff = W - c Delta^3 u and c the splitting constant.
inline FlowState willmore_regularize(const Immersion& im0, const GaugeFrame& frame0,
                                     const EulerSchemeConfig& cfg) {
    cfg.validate();
    FlowState st{im0, frame0};
    GeometryBundle geo = compute_geometry(st.im);
    const double c_split = cfg.splitting_constant > 0
                               ? cfg.splitting_constant
                               : std::pow(ginv_min_eig(geo), 3);
    const double ds = cfg.willmore_time / cfg.willmore_substeps;
    std::array<RField, 2> dF_prev;

    for (int n = 0; n < cfg.willmore_substeps; ++n) {
        const RField W = willmore_velocity(geo, st.frame);
        Spectrum su = analyze(st.im.u);
        Spectrum sw = analyze(W);
        double worst_amp = 1.0;
        double max_mod = 0, max_next = 0;
        for (const auto& z : su.c) max_mod = std::max(max_mod, std::abs(z));
        for (std::size_t p = 0; p < su.grid.points(); ++p) {
            const double xi6 = std::pow(sq(su.xi_norm(p)), 3);
            const double denom = 1.0 + ds * c_split * xi6;
            for (int c = 0; c < su.comps; ++c) {
                // Nonstiff-hat = W-hat - c Delta^3 u-hat = W-hat + c xi^6 u-hat
                const cplx nonstiff = sw.at(p, c) + c_split * xi6 * su.at(p, c);
                const cplx next = (su.at(p, c) + ds * nonstiff) / denom;
                // blow-up detection: growth of modes that carry real weight,
                // plus growth of the overall spectral peak
                if (std::abs(su.at(p, c)) > 1e-2 * max_mod)
                    worst_amp = std::max(worst_amp, std::abs(next) / std::abs(su.at(p, c)));
                max_next = std::max(max_next, std::abs(next));
                su.at(p, c) = next;
            }
        }
        if (max_mod > 0) worst_amp = std::max(worst_amp, max_next / max_mod);
        if (worst_amp > 10.0)
            throw Unstable("willmore_regularize: mode amplified more than 10x in one substep");
        for (int a = 0; a < geo.dim; ++a) dF_prev[a] = geo.dF[a];
        st.im.u = dealias(synthesize<double>(su));
        geo = compute_geometry(st.im);
        st.frame = pullback_frame(st.frame, dF_prev, geo);
    }
    return st;
}

// F1 = F_eps - eps Im(psi_eps conj(m_eps)); time advances by eps.
inline Immersion euler_step(const Immersion& im_eps, const GaugeFrame& frame_eps,
                            double epsilon) {
    const GeometryBundle geo = compute_geometry(im_eps);
    const RField vel = smcf_velocity(geo, frame_eps);  // = -Im(psi m-bar), dealiased
    Immersion out = im_eps;
    out.u = axpy(epsilon, vel, im_eps.u);
    out.time = im_eps.time + epsilon;
    return out;
}

struct EulerStepDiagnostics {
    double t = 0;
    double volume = 0;
    double lambda_linf = 0;
    double lambda_l2_int = 0;   // intrinsic L^2 of lambda
    double lambda_h1_int = 0;   // intrinsic H^1 of lambda
    double g_min_eig = 0;
    double g_max_eig = 0;
};

struct EulerRun {
    std::vector<FlowState> trajectory;
    std::vector<EulerStepDiagnostics> diagnostics;
};

inline EulerStepDiagnostics flow_diagnostics(const FlowState& st) {
    const GeometryBundle geo = compute_geometry(st.im);
    const ComplexShape sh = complex_shape(geo, st.frame);
    EulerStepDiagnostics d;
    d.t = st.im.time;
    d.volume = volume(geo);
    RField n0 = tensor_sqnorm_g(sh.lambda, 2, geo);
    for (std::size_t p = 0; p < n0.points(); ++p)
        d.lambda_linf = std::max(d.lambda_linf, std::sqrt(std::max(0.0, n0.at(p, 0))));
    d.lambda_l2_int = std::sqrt(integrate_dvol(n0, geo));
    const CField c1 = cov_deriv(sh.lambda, 2, geo, &st.frame.A);
    RField n1 = tensor_sqnorm_g(c1, 3, geo);
    d.lambda_h1_int = std::sqrt(integrate_dvol(n0, geo) + integrate_dvol(n1, geo));
    d.g_min_eig = metric_ellipticity(geo);
    d.g_max_eig = metric_max_eig(geo);
    return d;
}

inline EulerRun run_regularized_euler(const Immersion& im0, const GaugeFrame& frame0,
                                      double epsilon, double t_end,
                                      int willmore_substeps = 16, double c_split = 0) {
    const auto steps_f = t_end / epsilon;
    const long steps = std::lround(steps_f);
    if (std::abs(steps_f - double(steps)) > 1e-9)
        throw ValidationError("run_regularized_euler: t_end must be a multiple of epsilon");
    EulerRun run;
    FlowState st{im0, frame0};
    run.trajectory.push_back(st);
    run.diagnostics.push_back(flow_diagnostics(st));
    const EulerSchemeConfig cfg = EulerSchemeConfig::for_epsilon(epsilon, willmore_substeps, c_split);
    for (long j = 0; j < steps; ++j) {
        FlowState reg = willmore_regularize(st.im, st.frame, cfg);
        Immersion next = euler_step(reg.im, reg.frame, epsilon);
        std::array<RField, 2> dF_reg;
        GeometryBundle geo_reg = compute_geometry(reg.im);
        for (int a = 0; a < reg.im.grid.dim; ++a) dF_reg[a] = geo_reg.dF[a];
        GaugeFrame fr = pullback_frame(reg.frame, dF_reg, compute_geometry(next));
        st = FlowState{std::move(next), std::move(fr)};
        run.trajectory.push_back(st);
        run.diagnostics.push_back(flow_diagnostics(st));
    }
    return run;
}

// ---------------------------------------------------------------------------
// trajectory recording and the gauge-system residuals
// ---------------------------------------------------------------------------

struct TrajectorySample {
    FlowState state;
    RField V;  // advection field used by the run (contravariant components)
};

// Direct run sampled every dt; heat gauge fixes V = g^{ab} G^g_{ab} and the
// frame by B = nabla^a A_a.
inline std::vector<TrajectorySample> run_direct(const FlowState& initial, double dt, int steps,
                                                CoordinateGauge cg,
                                                FramePropagation fp) {
    std::vector<TrajectorySample> series;
    FlowState st = initial;
    for (int i = 0; i <= steps; ++i) {
        GeometryBundle geo = compute_geometry(st.im);
        RField V = cg == CoordinateGauge::heat ? detail::heat_coordinate_V(geo)
                                               : RField(st.im.grid, st.im.grid.dim);
        series.push_back({st, std::move(V)});
        if (i < steps) st = step_rk4(st, dt, cg, fp);
    }
    return series;
}

namespace detail {

template <class T>
Field<T> time_derivative_4(const std::vector<Field<T>>& f, std::size_t i, double dt) {
    // centered fourth-order first derivative at slice i (needs i-2 .. i+2)
    Field<T> out = f[i];
    for (std::size_t k = 0; k < out.v.size(); ++k)
        out.v[k] = (f[i - 2].v[k] - 8.0 * f[i - 1].v[k] + 8.0 * f[i + 1].v[k] - f[i + 2].v[k]) /
                   (12.0 * dt);
    return out;
}

}  // namespace detail

// max-norm residual of the covariant Schrodinger equation (the lambda system)
// at each interior slice of a uniformly sampled series.
inline std::vector<double> schrodinger_residual(const std::vector<TrajectorySample>& series,
                                                double dt) {
    if (series.size() < 5)
        throw InsufficientSamples("schrodinger_residual: need at least 5 time slices");
    const Grid& grid = series.front().state.im.grid;
    const int d = grid.dim;

    std::vector<CField> lam(series.size());
    std::vector<GeometryBundle> geos(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        geos[i] = compute_geometry(series[i].state.im);
        lam[i] = complex_shape(geos[i], series[i].state.frame).lambda;
    }

    std::vector<double> out;
    for (std::size_t i = 2; i + 2 < series.size(); ++i) {
        const GeometryBundle& geo = geos[i];
        const GaugeFrame& frame = series[i].state.frame;
        const RField& Vup = series[i].V;
        const ComplexShape sh = complex_shape(geo, frame);
        const CField lam_dot = detail::time_derivative_4(lam, i, dt);
        const RField B = heat_gauge_B(frame, geo);

        const CField gradl = cov_deriv(sh.lambda, 2, geo, &frame.A);
        const CField grad2l = cov_deriv(gradl, 3, geo, &frame.A);
        const CField lmix = mixed_lambda(sh, geo);

        // nabla_b V_g for the lowered advection field
        CField Vlow(grid, d);
        for (std::size_t p = 0; p < grid.points(); ++p)
            for (int a = 0; a < d; ++a) {
                double s = 0;
                for (int b = 0; b < d; ++b) s += geo.g.at(p, a * d + b) * Vup.at(p, b);
                Vlow.at(p, a) = s;
            }
        const CField gradV = cov_deriv(Vlow, 1, geo, nullptr);

        double worst = 0;
        for (std::size_t p = 0; p < grid.points(); ++p) {
            auto gi = [&](int a, int b) { return geo.ginv.at(p, a * d + b); };
            auto l = [&](int a, int b) { return sh.lambda.at(p, a * d + b); };
            auto lup = [&](int a, int b) { return lmix.at(p, a * d + b); };  // lam^a_b
            const cplx psi = sh.psi.at(p, 0);
            // fully raised lambda
            cplx lupup[2][2];
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b) {
                    cplx s = 0;
                    for (int nu = 0; nu < d; ++nu) s += gi(b, nu) * lup(a, nu);
                    lupup[a][b] = s;
                }
            for (int al = 0; al < d; ++al)
                for (int be = 0; be < d; ++be) {
                    const int idx = al * d + be;
                    // i (d_t^B - V^g nabla^A_g) lambda + nabla^A_s nabla^{A,s} lambda
                    cplx lhs = lam_dot.at(p, idx) + cplx(0, B.at(p, 0)) * l(al, be);
                    for (int g2 = 0; g2 < d; ++g2)
                        lhs -= Vup.at(p, g2) * gradl.at(p, (g2 * d + al) * d + be);
                    lhs *= cplx(0, 1);
                    for (int s = 0; s < d; ++s)
                        for (int r = 0; r < d; ++r)
                            lhs += gi(s, r) * grad2l.at(p, ((r * d + s) * d + al) * d + be);

                    cplx rhs = 0;
                    for (int g2 = 0; g2 < d; ++g2) {
                        rhs += cplx(0, 1) * lup(g2, al) * gradV.at(p, be * d + g2);
                        rhs += cplx(0, 1) * lup(g2, be) * gradV.at(p, al * d + g2);
                    }
                    {
                        cplx s = 0;
                        for (int de = 0; de < d; ++de)
                            s += l(al, de) * std::conj(lup(de, be));
                        rhs += psi * s.real();
                    }
                    for (int s = 0; s < d; ++s)
                        for (int de = 0; de < d; ++de) {
                            const cplx re_part = l(s, de) * std::conj(l(al, be)) -
                                                 l(s, be) * std::conj(l(al, de));
                            rhs -= re_part.real() * lupup[s][de];
                        }
                    {
                        cplx s = 0;
                        for (int mu = 0; mu < d; ++mu)
                            for (int si = 0; si < d; ++si)
                                s += l(al, mu) * std::conj(lup(mu, si)) * lup(si, be);
                        rhs -= s;
                    }
                    worst = std::max(worst, std::abs(lhs - rhs));
                }
        }
        out.push_back(worst);
    }
    return out;
}

// max-norm residuals of the parabolic system for (g, A) at interior slices;
// returns {g-equation series, A-equation series}.
inline std::pair<std::vector<double>, std::vector<double>> parabolic_residual(
    const std::vector<TrajectorySample>& series, double dt) {
    if (series.size() < 5)
        throw InsufficientSamples("parabolic_residual: need at least 5 time slices");
    const Grid& grid = series.front().state.im.grid;
    const int d = grid.dim;

    std::vector<GeometryBundle> geos(series.size());
    std::vector<RField> gs(series.size()), As(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        geos[i] = compute_geometry(series[i].state.im);
        gs[i] = geos[i].g;
        As[i] = series[i].state.frame.A;
    }

    std::vector<double> res_g, res_A;
    for (std::size_t i = 2; i + 2 < series.size(); ++i) {
        const GeometryBundle& geo = geos[i];
        const GaugeFrame& frame = series[i].state.frame;
        const RField& Vup = series[i].V;
        const ComplexShape sh = complex_shape(geo, frame);
        const CField lmix = mixed_lambda(sh, geo);
        const RField g_dot = detail::time_derivative_4(gs, i, dt);
        const RField A_dot = detail::time_derivative_4(As, i, dt);

        // --- metric equation ---
        std::array<RField, 2> d2g, dginv;
        d2g[0] = spectral_derivative(geo.g, 0, 2);
        if (d == 2) d2g[1] = spectral_derivative(geo.g, 1, 2);
        RField dgxy = d == 2 ? spectral_derivative(spectral_derivative(geo.g, 0, 1), 1, 1)
                             : RField();
        for (int a = 0; a < d; ++a) dginv[a] = spectral_derivative(geo.ginv, a, 1);

        double worst_g = 0;
        for (std::size_t p = 0; p < grid.points(); ++p) {
            auto gi = [&](int a, int b) { return geo.ginv.at(p, a * d + b); };
            auto l = [&](int a, int b) { return sh.lambda.at(p, a * d + b); };
            const cplx psi = sh.psi.at(p, 0);
            for (int mu = 0; mu < d; ++mu)
                for (int nu = 0; nu < d; ++nu) {
                    const int idx = mu * d + nu;
                    double lhs = g_dot.at(p, idx);
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b) {
                            const double hess =
                                (a == b) ? d2g[a].at(p, idx) : dgxy.at(p, idx);
                            lhs -= gi(a, b) * hess;
                        }
                    cplx ric = l(mu, nu) * std::conj(psi);
                    for (int s = 0; s < d; ++s)
                        ric -= l(mu, s) * std::conj(lmix.at(p, s * d + nu));
                    double rhs = 2.0 * ric.real();
                    rhs += 2.0 * (psi * std::conj(l(mu, nu))).imag();
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b) {
                            double s2 = 0;
                            for (int s = 0; s < d; ++s)
                                s2 += geo.gamma_low.at(p, (mu * d + b) * d + s) *
                                      geo.gamma.at(p, (s * d + a) * d + nu);
                            rhs -= 2.0 * gi(a, b) * s2;
                        }
                    for (int a = 0; a < d; ++a)
                        for (int b = 0; b < d; ++b) {
                            rhs += dginv[mu].at(p, a * d + b) *
                                   geo.gamma_low.at(p, (a * d + b) * d + nu);
                            rhs += dginv[nu].at(p, a * d + b) *
                                   geo.gamma_low.at(p, (a * d + b) * d + mu);
                        }
                    worst_g = std::max(worst_g, std::abs(lhs - rhs));
                }
        }
        res_g.push_back(worst_g);

        // --- connection equation ---
        CField Ac(grid, d);
        for (std::size_t p = 0; p < grid.points(); ++p)
            for (int a = 0; a < d; ++a) Ac.at(p, a) = frame.A.at(p, a);
        const CField dA1 = cov_deriv(Ac, 1, geo, nullptr);
        const CField dA2 = cov_deriv(dA1, 2, geo, nullptr);

        // T_{sa} = Im(lam^g_a conj(lam_{sg})), W_{ra} = Re(lam_{ra} conj(psi))
        CField T(grid, d * d), W(grid, d * d);
        RField psi2(grid, 1);
        for (std::size_t p = 0; p < grid.points(); ++p) {
            const cplx psi = sh.psi.at(p, 0);
            psi2.at(p, 0) = std::norm(psi);
            for (int s = 0; s < d; ++s)
                for (int a = 0; a < d; ++a) {
                    cplx acc = 0;
                    for (int g2 = 0; g2 < d; ++g2)
                        acc += lmix.at(p, g2 * d + a) * std::conj(sh.lambda.at(p, s * d + g2));
                    T.at(p, s * d + a) = acc.imag();
                    W.at(p, s * d + a) =
                        (sh.lambda.at(p, s * d + a) * std::conj(psi)).real();
                }
        }
        const CField gradT = cov_deriv(T, 2, geo, nullptr);
        const CField gradW = cov_deriv(W, 2, geo, nullptr);
        std::array<RField, 2> dpsi2;
        for (int a = 0; a < d; ++a) dpsi2[a] = spectral_derivative(psi2, a, 1);

        double worst_A = 0;
        for (std::size_t p = 0; p < grid.points(); ++p) {
            auto gi = [&](int a, int b) { return geo.ginv.at(p, a * d + b); };
            const cplx psi = sh.psi.at(p, 0);
            for (int al = 0; al < d; ++al) {
                double lhs = A_dot.at(p, al);
                for (int s = 0; s < d; ++s)
                    for (int r = 0; r < d; ++r)
                        lhs -= gi(s, r) * dA2.at(p, (r * d + s) * d + al).real();

                double rhs = 0;
                // nabla^s T_{sa}
                for (int s = 0; s < d; ++s)
                    for (int r = 0; r < d; ++r)
                        rhs += gi(s, r) * gradT.at(p, (r * d + s) * d + al).real();
                // nabla_g W^g_a = g^{gr} nabla_g W_{ra}
                for (int g2 = 0; g2 < d; ++g2)
                    for (int r = 0; r < d; ++r)
                        rhs += gi(g2, r) * gradW.at(p, (g2 * d + r) * d + al).real();
                rhs -= 0.5 * dpsi2[al].at(p, 0);
                // - Ric_a^s A_s with Ric_a^s = Re(lam_a^s conj(psi) - lam_{ab} conj(lam^{bs}))
                for (int s = 0; s < d; ++s) {
                    cplx ric = lmix.at(p, s * d + al) * std::conj(psi);
                    for (int b = 0; b < d; ++b) {
                        cplx lbs = 0;
                        for (int nu = 0; nu < d; ++nu)
                            lbs += gi(s, nu) * lmix.at(p, b * d + nu);  // lam^{bs}
                        ric -= sh.lambda.at(p, al * d + b) * std::conj(lbs);
                    }
                    rhs -= ric.real() * frame.A.at(p, s);
                }
                // - Im(lam^g_a conj(lam_{gs})) V^s = - T'_{...}
                for (int s = 0; s < d; ++s) {
                    cplx acc = 0;
                    for (int g2 = 0; g2 < d; ++g2)
                        acc += lmix.at(p, g2 * d + al) * std::conj(sh.lambda.at(p, g2 * d + s));
                    rhs -= acc.imag() * Vup.at(p, s);
                }
                worst_A = std::max(worst_A, std::abs(lhs - rhs));
            }
        }
        res_A.push_back(worst_A);
    }
    return {res_g, res_A};
}

// ---------------------------------------------------------------------------
// coordinate relaxation
// ---------------------------------------------------------------------------

// Evolves coordinates by d_t y = Delta_g y (frozen g), y(0) = id, then
// resamples F along y^{-1} by spectral interpolation.
inline Immersion heat_reparametrize(const Immersion& im, double t_relax) {
    if (t_relax == 0) return im;
    if (t_relax < 0) throw ValidationError("heat_reparametrize: negative time");
    const GeometryBundle geo = compute_geometry(im);
    const int d = geo.dim;
    const RField Vh = detail::heat_coordinate_V(geo);

    // y = x + w; d_t w = Delta_g w - V_h (Delta_g x^g = -V_h^g, frozen geometry)
    RField w(im.grid, d);
    const double gim = ginv_max_eig(geo);
    const double h = im.grid.min_spacing();
    const int steps = std::max(1, int(std::ceil(t_relax / (0.2 * h * h / gim))));
    const double dtau = t_relax / steps;
    auto rate = [&](const RField& w_) {
        RField dw = detail::laplace_beltrami(w_, geo);
        for (std::size_t p = 0; p < im.grid.points(); ++p)
            for (int c = 0; c < d; ++c) dw.at(p, c) -= Vh.at(p, c);
        return dw;
    };
    for (int n = 0; n < steps; ++n) {
        RField k1 = rate(w);
        RField k2 = rate(axpy(dtau / 2, k1, w));
        RField k3 = rate(axpy(dtau / 2, k2, w));
        RField k4 = rate(axpy(dtau, k3, w));
        for (std::size_t i = 0; i < w.v.size(); ++i)
            w.v[i] += dtau / 6 * (k1.v[i] + 2 * k2.v[i] + 2 * k3.v[i] + k4.v[i]);
        w = dealias(w);
    }

    // diffeomorphism check: det(I + dw) > 0.1
    std::array<RField, 2> gw;
    for (int a = 0; a < d; ++a) gw[a] = spectral_derivative(w, a, 1);
    for (std::size_t p = 0; p < im.grid.points(); ++p) {
        double det;
        if (d == 1) {
            det = 1.0 + gw[0].at(p, 0);
        } else {
            det = (1 + gw[0].at(p, 0)) * (1 + gw[1].at(p, 1)) -
                  gw[0].at(p, 1) * gw[1].at(p, 0);
        }
        if (det <= 0.1) throw NotDiffeomorphism("heat_reparametrize: coordinate map folded");
    }

    // resample F over y^{-1}: u_new(xi) = u(x*) + B (x* - xi), x* = xi - w(x*)
    PointSampler w_sampler(w);
    PointSampler u_sampler(im.u);
    Immersion out = im;
    for (int ix = 0; ix < im.grid.n[0]; ++ix)
        for (int iy = 0; iy < im.grid.n[1]; ++iy) {
            const std::size_t p = im.grid.index(ix, iy);
            const double xi0 = im.grid.coord(0, ix);
            const double xi1 = d == 2 ? im.grid.coord(1, iy) : 0.0;
            double x0 = xi0, x1 = xi1;
            double wv[2] = {0, 0};
            for (int it = 0; it < 50; ++it) {
                w_sampler.eval(x0, x1, wv);
                const double nx0 = xi0 - wv[0];
                const double nx1 = d == 2 ? xi1 - wv[1] : 0.0;
                const double move = std::abs(nx0 - x0) + std::abs(nx1 - x1);
                x0 = nx0;
                x1 = nx1;
                if (move < 1e-14) break;
            }
            double uv[4] = {0, 0, 0, 0};
            u_sampler.eval(x0, x1, uv);
            for (int c = 0; c < im.ambient; ++c) {
                double val = uv[c] + im.base_at(c, 0) * (x0 - xi0);
                if (d == 2) val += im.base_at(c, 1) * (x1 - xi1);
                out.u.at(p, c) = val;
            }
        }
    return out;
}

}  // namespace smcf
