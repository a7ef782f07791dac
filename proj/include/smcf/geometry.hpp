#pragma once

// Pointwise differential geometry of an immersion: induced metric and inverse,
// Christoffel symbols, second fundamental form, mean curvature, the complex
// shape tensor in a normal frame, curvature tensors, and the compatibility
// residuals (Codazzi, complex Ricci equation).
//
// Second derivatives of F are always taken spectrally on the periodic part,
// never by differencing Christoffels, so compatibility residuals sit at
// spectral accuracy. Metric inversion is closed-form (1x1 / 2x2).
//
// Tensor convention: rank-r covariant tensors are stored as fields with d^r
// components, index tuple encoded base-d with the first index slowest.
// Covariant differentiation prepends the derivative index. Complex tensors may
// carry U(1) charge 1, which adds +i A_gamma under differentiation.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "smcf/immersion.hpp"

namespace smcf {

inline constexpr double kRankEps = 1e-8;  // immersion-breakdown threshold

struct GeometryBundle {
    Grid grid;
    int dim = 1;
    int ambient = 3;
    std::array<RField, 2> dF;                  // tangent vectors, comps = ambient
    std::array<std::array<RField, 2>, 2> d2F;  // coordinate Hessian of F
    RField g;          // d*d, [a*d+b]
    RField ginv;       // d*d
    RField det_g;      // 1
    RField gamma;      // d*d*d, Gamma^c_{ab} at [(c*d+a)*d+b]
    RField gamma_low;  // d*d*d, Gamma_{ab,s} = d2F_ab . dF_s at [(a*d+b)*d+s]
    RField Lambda;     // d*d*ambient, [(a*d+b)*ambient+c]
    RField H;          // ambient
};

struct ComplexShape {
    Grid grid;
    int dim = 1;
    CField lambda;  // d*d
    CField psi;     // 1
};

struct GaugeFrame {
    Grid grid;
    int ambient = 3;
    RField nu1, nu2;  // comps = ambient
    RField A;         // comps = d,  A_a = d_a nu1 . nu2
    RField B;         // comps = 1, temporal connection (diagnostic)
};

// ---------------------------------------------------------------------------

inline GeometryBundle compute_geometry(const Immersion& im) {
    GeometryBundle geo;
    geo.grid = im.grid;
    geo.dim = im.grid.dim;
    geo.ambient = im.ambient;
    const int d = geo.dim, m = geo.ambient;
    const std::size_t np = im.grid.points();

    for (int a = 0; a < d; ++a) geo.dF[a] = im.deriv1(a);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            geo.d2F[a][b] = im.deriv2(a, b);
            if (b != a) geo.d2F[b][a] = geo.d2F[a][b];
        }

    geo.g = RField(im.grid, d * d);
    geo.ginv = RField(im.grid, d * d);
    geo.det_g = RField(im.grid, 1);
    geo.gamma = RField(im.grid, d * d * d);
    geo.gamma_low = RField(im.grid, d * d * d);
    geo.Lambda = RField(im.grid, d * d * m);
    geo.H = RField(im.grid, m);

    for (std::size_t p = 0; p < np; ++p) {
        double g[2][2] = {{0, 0}, {0, 0}};
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double s = 0;
                for (int c = 0; c < m; ++c) s += geo.dF[a].at(p, c) * geo.dF[b].at(p, c);
                g[a][b] = s;
                geo.g.at(p, a * d + b) = s;
            }
        double det = d == 1 ? g[0][0] : g[0][0] * g[1][1] - g[0][1] * g[1][0];
        geo.det_g.at(p, 0) = det;
        if (!(det > kRankEps))
            throw RankDeficient("compute_geometry: det g <= eps_rank, immersion broke down");
        double gi[2][2] = {{0, 0}, {0, 0}};
        if (d == 1) {
            gi[0][0] = 1.0 / g[0][0];
        } else {
            gi[0][0] = g[1][1] / det;
            gi[1][1] = g[0][0] / det;
            gi[0][1] = -g[0][1] / det;
            gi[1][0] = -g[1][0] / det;
        }
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) geo.ginv.at(p, a * d + b) = gi[a][b];

        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                for (int s = 0; s < d; ++s) {
                    double low = 0;
                    for (int c = 0; c < m; ++c)
                        low += geo.d2F[a][b].at(p, c) * geo.dF[s].at(p, c);
                    geo.gamma_low.at(p, (a * d + b) * d + s) = low;
                }
                for (int c2 = 0; c2 < d; ++c2) {
                    double G = 0;
                    for (int s = 0; s < d; ++s)
                        G += gi[c2][s] * geo.gamma_low.at(p, (a * d + b) * d + s);
                    geo.gamma.at(p, (c2 * d + a) * d + b) = G;
                }
            }

        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                for (int c = 0; c < m; ++c) {
                    double lam = geo.d2F[a][b].at(p, c);
                    for (int s = 0; s < d; ++s)
                        lam -= geo.gamma.at(p, (s * d + a) * d + b) * geo.dF[s].at(p, c);
                    geo.Lambda.at(p, (a * d + b) * m + c) = lam;
                }
        for (int c = 0; c < m; ++c) {
            double h = 0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    h += gi[a][b] * geo.Lambda.at(p, (a * d + b) * m + c);
            geo.H.at(p, c) = h;
        }
    }
    return geo;
}

inline ComplexShape complex_shape(const GeometryBundle& geo, const GaugeFrame& frame) {
    if (frame.grid != geo.grid) throw FrameMismatch("complex_shape: frame grid != geometry grid");
    const int d = geo.dim, m = geo.ambient;
    ComplexShape sh;
    sh.grid = geo.grid;
    sh.dim = d;
    sh.lambda = CField(geo.grid, d * d);
    sh.psi = CField(geo.grid, 1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        cplx tr = 0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                double kap = 0, tau = 0;
                for (int c = 0; c < m; ++c) {
                    kap += geo.d2F[a][b].at(p, c) * frame.nu1.at(p, c);
                    tau += geo.d2F[a][b].at(p, c) * frame.nu2.at(p, c);
                }
                sh.lambda.at(p, a * d + b) = {kap, tau};
            }
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                tr += geo.ginv.at(p, a * d + b) * sh.lambda.at(p, a * d + b);
        sh.psi.at(p, 0) = tr;
    }
    return sh;
}

// lambda with first index raised: (lam^a)_b = g^{as} lambda_{sb}
inline CField mixed_lambda(const ComplexShape& sh, const GeometryBundle& geo) {
    const int d = geo.dim;
    CField lm(geo.grid, d * d);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                cplx s = 0;
                for (int k = 0; k < d; ++k)
                    s += geo.ginv.at(p, a * d + k) * sh.lambda.at(p, k * d + b);
                lm.at(p, a * d + b) = s;
            }
    return lm;
}

// ---------------------------------------------------------------------------
// covariant derivative machinery
// ---------------------------------------------------------------------------

// nabla^A applied to a rank-r lower tensor (d^r components); result has rank
// r+1 with the derivative index slowest. charge=true adds +i A_g T.
inline CField cov_deriv(const CField& T, int rank, const GeometryBundle& geo,
                        const RField* A = nullptr) {
    const int d = geo.dim;
    const std::size_t np = geo.grid.points();
    int nin = 1;
    for (int j = 0; j < rank; ++j) nin *= d;
    CField out(geo.grid, d * nin);

    std::array<CField, 2> dT;
    for (int a = 0; a < d; ++a) dT[a] = spectral_derivative(T, a, 1);

    std::vector<int> digits(std::max(rank, 1));
    for (std::size_t p = 0; p < np; ++p) {
        for (int g2 = 0; g2 < d; ++g2)
            for (int idx = 0; idx < nin; ++idx) {
                cplx val = dT[g2].at(p, idx);
                // Gamma corrections, one per slot
                int rem = idx;
                for (int j = rank - 1; j >= 0; --j) { digits[j] = rem % d; rem /= d; }
                int stride = 1;
                for (int j = rank - 1; j >= 0; --j) {
                    const int ij = digits[j];
                    const int base = idx - ij * stride;
                    for (int s = 0; s < d; ++s)
                        val -= geo.gamma.at(p, (s * d + g2) * d + ij) * T.at(p, base + s * stride);
                    stride *= d;
                }
                if (A) val += cplx(0.0, A->at(p, g2)) * T.at(p, idx);
                out.at(p, g2 * nin + idx) = val;
            }
    }
    return out;
}

// |T|_g^2 pointwise: every (lower) index contracted with g^{-1}.
inline RField tensor_sqnorm_g(const CField& T, int rank, const GeometryBundle& geo) {
    const int d = geo.dim;
    const std::size_t np = geo.grid.points();
    int n = 1;
    for (int j = 0; j < rank; ++j) n *= d;
    RField out(geo.grid, 1);
    std::vector<cplx> cur(n), nxt(n);
    for (std::size_t p = 0; p < np; ++p) {
        for (int i = 0; i < n; ++i) cur[i] = T.at(p, i);
        // raise indices one slot at a time
        int stride = 1;
        for (int j = rank - 1; j >= 0; --j) {
            for (int idx = 0; idx < n; ++idx) {
                const int ij = (idx / stride) % d;
                const int base = idx - ij * stride;
                cplx s = 0;
                for (int k = 0; k < d; ++k)
                    s += geo.ginv.at(p, ij * d + k) * cur[base + k * stride];
                nxt[idx] = s;
            }
            std::swap(cur, nxt);
            stride *= d;
        }
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += (cur[i] * std::conj(T.at(p, i))).real();
        out.at(p, 0) = acc;
    }
    return out;
}

inline double integrate_dvol(const RField& f, const GeometryBundle& geo) {
    double acc = 0;
    for (std::size_t p = 0; p < f.points(); ++p)
        acc += f.at(p, 0) * std::sqrt(geo.det_g.at(p, 0));
    return acc * f.grid.cell_volume();
}

// ---------------------------------------------------------------------------
// curvature and compatibility
// ---------------------------------------------------------------------------

// (R, Ric) from the complex shape: R_{sgab} = Re(l_{bg} conj(l_{as}) - l_{ag} conj(l_{bs})),
// Ric_{gb} = Re(l_{gb} conj(psi) - l_{ga} conj(l_b^a)).
inline std::pair<RField, RField> curvature_tensors(const ComplexShape& sh,
                                                   const GeometryBundle& geo) {
    if (sh.grid != geo.grid) throw FrameMismatch("curvature_tensors: grid mismatch");
    const int d = geo.dim;
    RField R(geo.grid, d * d * d * d), Ric(geo.grid, d * d);
    const CField lm = mixed_lambda(sh, geo);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        const cplx psib = std::conj(sh.psi.at(p, 0));
        for (int s = 0; s < d; ++s)
            for (int g2 = 0; g2 < d; ++g2)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        const cplx t = sh.lambda.at(p, b * d + g2) * std::conj(sh.lambda.at(p, a * d + s)) -
                                       sh.lambda.at(p, a * d + g2) * std::conj(sh.lambda.at(p, b * d + s));
                        R.at(p, ((s * d + g2) * d + a) * d + b) = t.real();
                    }
        for (int g2 = 0; g2 < d; ++g2)
            for (int b = 0; b < d; ++b) {
                cplx t = sh.lambda.at(p, g2 * d + b) * psib;
                for (int a = 0; a < d; ++a)
                    t -= sh.lambda.at(p, g2 * d + a) * std::conj(lm.at(p, a * d + b));
                Ric.at(p, g2 * d + b) = t.real();
            }
    }
    return {R, Ric};
}

// Intrinsic Riemann tensor from the metric alone (via Christoffels),
// R_{sgab} = g_{sm} (d_a G^m_{bg} - d_b G^m_{ag} + G^m_{an}G^n_{bg} - G^m_{bn}G^n_{ag}),
// index order matched to the complex-shape formula above.
inline RField intrinsic_riemann(const GeometryBundle& geo) {
    const int d = geo.dim;
    RField R(geo.grid, d * d * d * d);
    if (d == 1) return R;  // curves are intrinsically flat
    std::array<RField, 2> dGamma;
    for (int a = 0; a < d; ++a) dGamma[a] = spectral_derivative(geo.gamma, a, 1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        auto G = [&](int c, int a, int b) { return geo.gamma.at(p, (c * d + a) * d + b); };
        for (int s = 0; s < d; ++s)
            for (int g2 = 0; g2 < d; ++g2)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        double acc = 0;
                        for (int m2 = 0; m2 < d; ++m2) {
                            double ru = dGamma[a].at(p, (m2 * d + b) * d + g2) -
                                        dGamma[b].at(p, (m2 * d + a) * d + g2);
                            for (int n2 = 0; n2 < d; ++n2)
                                ru += G(m2, a, n2) * G(n2, b, g2) - G(m2, b, n2) * G(n2, a, g2);
                            acc += geo.g.at(p, s * d + m2) * ru;
                        }
                        R.at(p, ((s * d + g2) * d + a) * d + b) = acc;
                    }
    }
    return R;
}

// max-norm of nabla^A_a lambda_{bg} - nabla^A_b lambda_{ag}
inline double codazzi_residual(const ComplexShape& sh, const GeometryBundle& geo,
                               const RField& A) {
    const int d = geo.dim;
    if (d == 1) return 0.0;
    const CField C = cov_deriv(sh.lambda, 2, geo, &A);
    double m = 0;
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b)
                for (int g2 = 0; g2 < d; ++g2)
                    m = std::max(m, std::abs(C.at(p, (a * d + b) * d + g2) -
                                             C.at(p, (b * d + a) * d + g2)));
    return m;
}

// max-norm of nabla_a A_b - nabla_b A_a - Im(lam^g_a conj(lam_{bg}))
inline double ricci_equation_residual(const ComplexShape& sh, const GeometryBundle& geo,
                                      const RField& A) {
    const int d = geo.dim;
    if (d == 1) return 0.0;
    CField Ac(geo.grid, d);
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < d; ++a) Ac.at(p, a) = A.at(p, a);
    const CField dA = cov_deriv(Ac, 1, geo, nullptr);
    const CField lm = mixed_lambda(sh, geo);
    double m = 0;
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b) {
                cplx curl = dA.at(p, a * d + b) - dA.at(p, b * d + a);
                cplx im = 0;
                for (int g2 = 0; g2 < d; ++g2)
                    im += lm.at(p, g2 * d + a) * std::conj(sh.lambda.at(p, b * d + g2));
                m = std::max(m, std::abs(curl.real() - im.imag()));
            }
    return m;
}

// ---------------------------------------------------------------------------

// Rotation by +pi/2 in the normal plane, J nu1 = nu2, extended linearly.
// The frame fixes the orientation of the normal bundle; flipping its parity
// time-reverses the flow.
inline RField j_rotate(const RField& v, const GaugeFrame& frame, double tol = 1e-8) {
    if (v.grid != frame.grid) throw FrameMismatch("j_rotate: grid mismatch");
    const int m = frame.ambient;
    RField out(v.grid, m);
    double worst = 0;
    for (std::size_t p = 0; p < v.points(); ++p) {
        double a = 0, b = 0, n2 = 0;
        for (int c = 0; c < m; ++c) {
            a += v.at(p, c) * frame.nu1.at(p, c);
            b += v.at(p, c) * frame.nu2.at(p, c);
            n2 += sq(v.at(p, c));
        }
        double resid = 0;
        for (int c = 0; c < m; ++c)
            resid += sq(v.at(p, c) - a * frame.nu1.at(p, c) - b * frame.nu2.at(p, c));
        worst = std::max(worst, resid / std::max(n2, 1.0));
        for (int c = 0; c < m; ++c)
            out.at(p, c) = a * frame.nu2.at(p, c) - b * frame.nu1.at(p, c);
    }
    if (std::sqrt(worst) > tol)
        throw NotNormal("j_rotate: input has tangential component above tolerance");
    return out;
}

inline double volume(const GeometryBundle& geo) {
    double acc = 0;
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        acc += std::sqrt(geo.det_g.at(p, 0));
    return acc * geo.grid.cell_volume();
}

}  // namespace smcf
