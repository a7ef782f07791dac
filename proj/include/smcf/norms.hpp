#pragma once

// Function-space machinery: intrinsic covariant Sobolev norms, extrinsic
// spectral Sobolev norms, the regularization-family X^s / Y^{s+1} / Z^s norms
// built on the canonical P_{<h} family, and frequency envelopes.
//
// The continuous h-parameter is discretized with step dh (default 0.25);
// h-derivatives are centered differences on the family grid. The family is
// the canonical one (F^{(h)} = P_{<h} F with the projected Gram-Schmidt
// frame), which bounds the inf-over-regularizations definition from above.

#include <cmath>
#include <vector>

#include "smcf/flows.hpp"

namespace smcf {

inline constexpr int kIntrinsicCap = 6;

// ---------------------------------------------------------------------------
// plain Sobolev norms
// ---------------------------------------------------------------------------

// ||<xi>^s f-hat||_{L^2} with the box-measure normalization (s = 0 is the grid
// L2 norm), summed over components.
template <class T>
double extrinsic_sobolev(const Field<T>& f, double s) {
    Spectrum sp = analyze(f);
    double acc = 0;
    for (std::size_t p = 0; p < sp.grid.points(); ++p) {
        const double w = std::pow(1.0 + sq(sp.xi_norm(p)), s);
        for (int c = 0; c < sp.comps; ++c) acc += w * std::norm(sp.at(p, c));
    }
    return std::sqrt(acc * f.grid.box_volume());
}

// weighted variant || |D|^sigma f ||_{H^s}
template <class T>
double extrinsic_sobolev_rough(const Field<T>& f, double sigma, double s) {
    Spectrum sp = analyze(f);
    double acc = 0;
    for (std::size_t p = 0; p < sp.grid.points(); ++p) {
        const double xi2 = sq(sp.xi_norm(p));
        const double w = std::pow(xi2, sigma) * std::pow(1.0 + xi2, s);
        for (int c = 0; c < sp.comps; ++c) acc += w * std::norm(sp.at(p, c));
    }
    return std::sqrt(acc * f.grid.box_volume());
}

// ||T||_{H^k}^2 = sum_{l<=k} int |nabla^{A,l} T|_g^2 dvol for a rank-r lower
// tensor with U(1) charge (A != nullptr) or without.
inline double intrinsic_sobolev(const CField& tensor, int rank, const GeometryBundle& geo,
                                const RField* A, int k) {
    if (k < 0 || k > kIntrinsicCap)
        throw CapExceeded("intrinsic_sobolev: derivative order above cap");
    double acc = 0;
    CField cur = tensor;
    int r = rank;
    for (int l = 0; l <= k; ++l) {
        acc += integrate_dvol(tensor_sqnorm_g(cur, r, geo), geo);
        if (l < k) {
            cur = cov_deriv(cur, r, geo, A);
            ++r;
        }
    }
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// the canonical regularization family
// ---------------------------------------------------------------------------

struct FamilyMember {
    double h = 0;
    Immersion im;        // F^{(h)} = P_{<h} F
    GaugeFrame frame;    // projected + Gram-Schmidt frame
    GeometryBundle geo;
    ComplexShape shape;
};

struct RegularizationFamily {
    double h0 = 1.0;
    double dh = 0.25;
    std::vector<FamilyMember> members;

    const FamilyMember& at(std::size_t j) const { return members[j]; }
    std::size_t size() const { return members.size(); }
};

// Builds the P_{<h} family on h0, h0+dh, ..., up to the grid's top scale.
inline RegularizationFamily build_family(const Immersion& im, const GaugeFrame& frame,
                                         double h0, double dh = 0.25) {
    RegularizationFamily fam;
    fam.h0 = h0;
    fam.dh = dh;
    double xi_max = 0;
    for (int a = 0; a < im.grid.dim; ++a)
        xi_max = std::hypot(xi_max, kPi * im.grid.n[a] / im.grid.len[a]);
    const double h_top = std::log2(xi_max) + 1.0;
    for (double h = h0; h < h_top + dh / 2; h += dh) {
        FamilyMember m;
        m.h = h;
        m.im = im;
        m.im.u = lp_project(im.u, h, LpKind::below);
        m.geo = compute_geometry(m.im);
        RField c1 = lp_project(frame.nu1, h, LpKind::below);
        RField c2 = lp_project(frame.nu2, h, LpKind::below);
        m.frame = frame_from_candidates<Degenerate>(m.geo, c1, c2, 0.5, "build_family");
        m.shape = complex_shape(m.geo, m.frame);
        fam.members.push_back(std::move(m));
    }
    return fam;
}

namespace detail {

// centered h-derivative of a per-member field
template <class FieldT, class Getter>
FieldT family_h_derivative(const RegularizationFamily& fam, std::size_t j, Getter&& get) {
    const auto& lo = get(fam.members[j == 0 ? 0 : j - 1]);
    const auto& hi = get(fam.members[j + 1 < fam.size() ? j + 1 : j]);
    const double span = fam.dh * double((j + 1 < fam.size() ? j + 1 : j) - (j == 0 ? 0 : j - 1));
    FieldT out = hi;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = (hi.v[i] - lo.v[i]) / span;
    return out;
}

}  // namespace detail

enum class NormFlavor { intrinsic, extrinsic };

// The four-term X^s family norm of lambda.
inline double xs_norm(const RegularizationFamily& fam, double s, NormFlavor flavor) {
    if (fam.size() < 8) throw FamilyTooShort("xs_norm: fewer than 8 h-samples");
    const int fs = int(std::floor(s));
    const int N0 = int(std::floor(2 * s));
    const double h0 = fam.h0;

    auto lam_norm = [&](const FamilyMember& m, int order) {
        if (flavor == NormFlavor::extrinsic)
            return extrinsic_sobolev(m.shape.lambda, double(order));
        return intrinsic_sobolev(m.shape.lambda, 2, m.geo, &m.frame.A, order);
    };

    double total = std::exp2(2 * h0 * (s - fs)) * sq(lam_norm(fam.members.front(), fs));
    total += std::exp2(2 * h0 * (s - fs - 1)) * sq(lam_norm(fam.members.front(), fs + 1));

    double best = 0;
    for (int N : {N0, N0 + 1}) {
        double acc = 0;
        for (std::size_t j = 0; j < fam.size(); ++j)
            acc += fam.dh * std::exp2(2 * fam.members[j].h * (s - N)) *
                   sq(lam_norm(fam.members[j], N));
        best = std::max(best, acc);
    }
    total += best;

    for (std::size_t j = 0; j < fam.size(); ++j) {
        CField dlam = detail::family_h_derivative<CField>(
            fam, j, [](const FamilyMember& m) -> const CField& { return m.shape.lambda; });
        double l2;
        if (flavor == NormFlavor::extrinsic) {
            l2 = l2_norm(dlam);
        } else {
            l2 = std::sqrt(
                integrate_dvol(tensor_sqnorm_g(dlam, 2, fam.members[j].geo), fam.members[j].geo));
        }
        total += fam.dh * std::exp2(2 * fam.members[j].h * s) * sq(l2);
    }
    return std::sqrt(total);
}

// Y^{s+1} (metric) and Z^s (connection) family norms at t = 0 (the time
// integrals of the display are empty), with sigma_d = 1 and delta_d = 0.
inline std::pair<double, double> ys_zs_norms(const RegularizationFamily& fam, double s) {
    if (fam.size() < 8) throw FamilyTooShort("ys_zs_norms: fewer than 8 h-samples");
    const int N0 = int(std::floor(2 * s));
    const double sigma_d = 1.0;  // delta_d = 0 in all dimensions (reported flag)

    auto a_norm = [&](const FamilyMember& m, double order) {
        return extrinsic_sobolev(m.frame.A, order);
    };

    double y = sq(extrinsic_sobolev_rough(fam.members.front().geo.g, sigma_d, s + 1 - sigma_d));
    double z = sq(a_norm(fam.members.front(), s));

    double best_y = 0, best_z = 0;
    for (int N : {N0, N0 + 1}) {
        double acc_y = 0, acc_z = 0;
        for (std::size_t j = 0; j < fam.size(); ++j) {
            const double w = fam.dh * std::exp2(2 * fam.members[j].h * (s - N));
            acc_y += w * sq(extrinsic_sobolev_rough(fam.members[j].geo.g, sigma_d,
                                                    N + 1 - sigma_d));
            acc_z += w * sq(a_norm(fam.members[j], double(N)));
        }
        best_y = std::max(best_y, acc_y);
        best_z = std::max(best_z, acc_z);
    }
    y += best_y;
    z += best_z;

    for (std::size_t j = 0; j < fam.size(); ++j) {
        RField dg = detail::family_h_derivative<RField>(
            fam, j, [](const FamilyMember& m) -> const RField& { return m.geo.g; });
        RField dA = detail::family_h_derivative<RField>(
            fam, j, [](const FamilyMember& m) -> const RField& { return m.frame.A; });
        const double w = fam.dh * std::exp2(2 * fam.members[j].h * s);
        y += w * sq(extrinsic_sobolev(dg, 1.0));
        z += w * sq(l2_norm(dA));
    }
    return {std::sqrt(y), std::sqrt(z)};
}

// ---------------------------------------------------------------------------
// frequency envelopes
// ---------------------------------------------------------------------------

struct FrequencyEnvelope {
    double delta = 0;
    int j0 = 0;                // first dyadic index (= round(h0))
    std::vector<double> c;

    double l2() const {
        double acc = 0;
        for (double x : c) acc += x * x;
        return std::sqrt(acc);
    }
    bool slowly_varying(double tol = 1e-12) const {
        for (std::size_t j = 0; j < c.size(); ++j)
            for (std::size_t k = 0; k < c.size(); ++k)
                if (c[j] > std::exp2(delta * std::abs(double(j) - double(k))) * c[k] + tol)
                    return false;
        return true;
    }
};

// c_j = 2^{-delta|j-h0|} ||P_{<h0} f||_{H^s}
//     + sum_k 2^{-delta|j-k|} (int_k^{k+1} 2^{2hs} ||P_h f||_{L2}^2 dh)^{1/2},
// with the continuous band P_h discretized as the dh-difference of low-passes.
template <class T>
FrequencyEnvelope frequency_envelope(const Field<T>& f, double s, double delta,
                                     double h0 = 1.0, double dh = 0.25) {
    const int d = f.grid.dim;
    if (!(delta > 0) || !(delta < s - 0.5 * d))
        throw BadDelta("frequency_envelope: need 0 < delta < s - d/2");

    double xi_max = 0;
    for (int a = 0; a < d; ++a) xi_max = std::hypot(xi_max, kPi * f.grid.n[a] / f.grid.len[a]);
    const int j0 = int(std::lround(h0));
    const int j_top = int(std::ceil(std::log2(xi_max))) + 1;

    const double low_norm = extrinsic_sobolev(lp_project(f, h0, LpKind::below), s);

    std::vector<double> band(std::size_t(j_top - j0 + 1), 0.0);
    for (int k = j0; k <= j_top; ++k) {
        double acc = 0;
        for (double h = k; h < k + 1 - dh / 2; h += dh) {
            Field<T> ph = lp_project(f, h + dh / 2, LpKind::below) -
                          lp_project(f, h - dh / 2, LpKind::below);
            for (auto& x : ph.v) x /= dh;
            acc += dh * std::exp2(2 * h * s) * sq(l2_norm(ph));
        }
        band[k - j0] = std::sqrt(acc);
    }

    FrequencyEnvelope env;
    env.delta = delta;
    env.j0 = j0;
    env.c.resize(band.size());
    for (int j = j0; j <= j_top; ++j) {
        double cj = std::exp2(-delta * std::abs(double(j) - h0)) * low_norm;
        for (int k = j0; k <= j_top; ++k)
            cj += std::exp2(-delta * std::abs(double(j) - double(k))) * band[k - j0];
        env.c[j - j0] = cj;
    }
    return env;
}

}  // namespace smcf
