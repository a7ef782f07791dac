#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "smcf/analysis.hpp"

using namespace smcf;

TEST_CASE("variation decomposition: tangent, normal, reconstruction") {
    auto gd = graph_bump_data(Grid::square(32), 0.1, 1.0, 8);
    auto geo = compute_geometry(gd.im);

    // variation = dF_1: omega = 0, U^g raises to (1, 0)
    auto dec = decompose_variation(geo, gd.frame, geo.dF[0]);
    CHECK(linf_norm(dec.omega) < 1e-11);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        CHECK(std::abs(dec.U.at(p, 0) - 1.0) < 1e-11);
        CHECK(std::abs(dec.U.at(p, 1)) < 1e-11);
    }

    // variation = nu1: omega = 1, U = 0
    auto dec2 = decompose_variation(geo, gd.frame, gd.frame.nu1);
    for (std::size_t p = 0; p < geo.grid.points(); ++p) {
        CHECK(std::abs(dec2.omega.at(p, 0) - cplx{1, 0}) < 1e-11);
        CHECK(std::abs(dec2.U.at(p, 0)) < 1e-11);
    }

    // generic difference of nearby graphs: reconstruction is the identity
    auto gd2 = graph_bump_data(Grid::square(32), 0.12, 1.1, 8);
    RField delta(gd.im.grid, 4);
    for (std::size_t i = 0; i < delta.v.size(); ++i)
        delta.v[i] = gd2.im.u.v[i] - gd.im.u.v[i];
    auto dec3 = decompose_variation(geo, gd.frame, delta);
    auto back = reconstruct_variation(dec3, geo, gd.frame);
    CHECK(linf_norm(back - delta) < 1e-12);
}

TEST_CASE("linearized equations hold along a perturbed pair, with Richardson rate") {
    auto residual_at = [&](double eta, double dt, int n) {
        auto base = graph_bump_data(Grid::square(n), 0.08, 1.0, 6);
        Immersion pert = base.im;
        // smooth normal-ish perturbation through the generator family
        auto dir = graph_bump_data(Grid::square(n), 0.08 * 0.37, 1.3, 6);
        for (std::size_t i = 0; i < pert.u.v.size(); ++i)
            pert.u.v[i] += eta * (dir.im.u.v[i] / 0.0296);
        FlowState a{base.im, base.frame};
        FlowState b{pert, pullback_frame(base.frame, base.im, pert)};
        std::vector<TrajectorySample> series;
        std::vector<RField> vars;
        const int steps = 8;
        for (int i = 0; i <= steps; ++i) {
            series.push_back({a, RField(a.im.grid, 2)});
            RField delta(a.im.grid, 4);
            for (std::size_t k = 0; k < delta.v.size(); ++k)
                delta.v[k] = (b.im.u.v[k] - a.im.u.v[k]) / eta;
            vars.push_back(std::move(delta));
            if (i < steps) {
                a = step_rk4(a, dt);
                b = step_rk4(b, dt);
            }
        }
        auto res = linearized_residual(series, vars, dt);
        double worst = 0;
        for (double r : res.omega_eq) worst = std::max(worst, r);
        for (double r : res.u_eq) worst = std::max(worst, r);
        return worst;
    };

    // separation rate at fixed resolution (spatial floor ~5e-5 at N=64)
    const double r1 = residual_at(8e-3, 2e-4, 64);
    const double r2 = residual_at(2e-3, 2e-4, 64);
    CHECK(r1 < 5e-2);
    CHECK(r2 < 0.5 * r1);  // O(separation) convergence above the floor

    // refinement: the spatial floor drops by far more than 4x under N -> 2N
    const double f32 = residual_at(1e-5, 2e-4, 32);
    const double f64 = residual_at(1e-5, 2e-4, 64);
    CHECK(f64 < f32 / 4.0);
}

TEST_CASE("energy growth fit: flat pair is non-growing") {
    // constant omega series: C_fit ~ 0
    std::vector<double> flat_series(12, 0.25);
    CHECK(std::abs(energy_growth(flat_series, 1e-3)) < 1e-8);
    // exponential series recovers its rate
    std::vector<double> grow(12);
    for (int i = 0; i < 12; ++i) grow[i] = std::exp(0.7 * i * 1e-3);
    CHECK(std::abs(energy_growth(grow, 1e-3) - 1.4) < 1e-6);
    CHECK_THROWS_AS(energy_growth(std::vector<double>(5, 1.0), 1e-3), InsufficientSamples);
}

TEST_CASE("l2 distance: identical, shifted plane, concentric circles") {
    auto gd = graph_bump_data(Grid::square(32), 0.1, 1.0, 6);
    CHECK(l2_distance(gd.im, gd.im) < 1e-10);

    // plane vs plane shifted normally by c: distance c sqrt(area)
    auto fd = flat_data(Grid::square(32));
    Immersion shifted = fd.im;
    for (std::size_t p = 0; p < shifted.grid.points(); ++p) shifted.u.at(p, 2) += 0.05;
    const double want = 0.05 * std::sqrt(4 * kPi * kPi);
    CHECK(std::abs(l2_distance(fd.im, shifted) - want) < 1e-9);

    // circles r = 1 and r = 1.01
    auto ca = circle_data(128, 1.0);
    auto cb = circle_data(128, 1.01);
    CHECK(std::abs(l2_distance(ca.im, cb.im) - 0.01 * std::sqrt(2 * kPi)) < 1e-4);

    // reparametrization invariance: precompose b with a diffeomorphism
    auto gb = graph_bump_data(Grid::square(32), 0.12, 1.2, 6);
    const double d0 = l2_distance(gd.im, gb.im);
    Immersion warped = gb.im;
    {
        ImmersionSampler sampler(gb.im);
        for (int ix = 0; ix < 32; ++ix)
            for (int iy = 0; iy < 32; ++iy) {
                const std::size_t p = warped.grid.index(ix, iy);
                const double x = warped.grid.coord(0, ix), y = warped.grid.coord(1, iy);
                const double px = x + 0.05 * std::sin(x) * std::cos(y);
                const double py = y + 0.04 * std::cos(x + y);
                double fv[4];
                sampler.value(px, py, fv);
                for (int c = 0; c < 4; ++c)
                    warped.u.at(p, c) =
                        fv[c] - gb.im.base_at(c, 0) * x - gb.im.base_at(c, 1) * y;
            }
    }
    const double d1 = l2_distance(gd.im, warped);
    CHECK(std::abs(d0 - d1) < 1e-8);

    // near-symmetry in the smallness regime
    const double dab = l2_distance(gd.im, gb.im), dba = l2_distance(gb.im, gd.im);
    CHECK(std::abs(dab - dba) <= 0.1 * std::max(dab, dba));

    // far surfaces: the search aborts
    Immersion far = fd.im;
    for (std::size_t p = 0; p < far.grid.points(); ++p)
        far.u.at(p, 2) += 0.8 * std::sin(3 * far.grid.coord(0, int(p) / 32));
    // large, rapidly varying offset: nearest-point search from same-index seeds
    // may diverge; accept either a clean result or the documented error
    try {
        (void)l2_distance(fd.im, far);
    } catch (const NoNearestPoint&) {
        SUCCEED("search aborted as documented");
    }
}

TEST_CASE("matched reparametrization removes shear") {
    auto ga = graph_bump_data(Grid::square(32), 0.1, 1.0, 6);

    // identical graphs: identity
    auto same = matched_reparametrization(ga.im, ga.im);
    CHECK(linf_norm(same.u - ga.im.u) < 1e-10);

    // vertically shifted plane: already matched (the shift is normal to a flat
    // base, so the matching map is the identity)
    auto fd = flat_data(Grid::square(32));
    Immersion lifted = fd.im;
    for (std::size_t p = 0; p < lifted.grid.points(); ++p) lifted.u.at(p, 2) += 0.03;
    auto matched = matched_reparametrization(fd.im, lifted);
    CHECK(linf_norm(matched.u - lifted.u) < 1e-8);

    // sheared parametrization of the same graph: shear removed
    Immersion sheared = ga.im;
    {
        ImmersionSampler sampler(ga.im);
        for (int ix = 0; ix < 32; ++ix)
            for (int iy = 0; iy < 32; ++iy) {
                const std::size_t p = sheared.grid.index(ix, iy);
                const double x = sheared.grid.coord(0, ix), y = sheared.grid.coord(1, iy);
                const double px = x + 0.06 * std::sin(y);
                double fv[4];
                sampler.value(px, y, fv);
                for (int c = 0; c < 4; ++c)
                    sheared.u.at(p, c) =
                        fv[c] - ga.im.base_at(c, 0) * x - ga.im.base_at(c, 1) * y;
            }
    }
    auto unshorn = matched_reparametrization(ga.im, sheared);
    auto geo = compute_geometry(ga.im);
    double tangential = 0;
    for (std::size_t p = 0; p < geo.grid.points(); ++p)
        for (int a = 0; a < 2; ++a) {
            double s = 0;
            for (int c = 0; c < 4; ++c)
                s += (unshorn.u.at(p, c) - ga.im.u.at(p, c)) * geo.dF[a].at(p, c);
            tangential = std::max(tangential, std::abs(s));
        }
    CHECK(tangential < 1e-6);

    // a pair with mismatched bases is not graph-like
    auto cd = clifford_data(16, 1.0, 2.0);
    CHECK_THROWS_AS(matched_reparametrization(ga.im, cd.im), NotGraphLike);
}

TEST_CASE("uniqueness experiment: identical and perturbed pairs") {
    auto gd = graph_bump_data(Grid::square(32), 0.08, 1.0, 6);

    // identical data: distance stays at rounding level
    {
        FlowState a{gd.im, gd.frame};
        auto rep = uniqueness_experiment(a, a, 5e-3, 5e-4, 5);
        for (double dval : rep.d_l2) CHECK(dval < 1e-10);
    }

    // small normal perturbation: ratio bounded by the fitted exponential
    Immersion pert = gd.im;
    for (std::size_t p = 0; p < pert.grid.points(); ++p)
        pert.u.at(p, 2) += 1e-4 * std::sin(pert.grid.coord(0, int(p) / 32));
    FlowState a{gd.im, gd.frame};
    FlowState b{pert, pullback_frame(gd.frame, gd.im, pert)};
    auto rep = uniqueness_experiment(a, b, 0.01, 5e-4, 10);
    CHECK(rep.pass);
    CHECK(rep.ratio < 3.0);
    CHECK(rep.d_l2.front() > 1e-6);  // genuinely separated pair
}

TEST_CASE("tangential indifference: the advection field moves only the parametrization") {
    // same data, temporal gauge (V = 0) vs heat coordinates (V = g^{ab}G^g_{ab});
    // the image surfaces must coincide
    auto gd = graph_bump_data(Grid::square(64), 0.1, 1.0, 6);
    FlowState a{gd.im, gd.frame};
    FlowState b = a;
    const double dt = 1e-3;
    for (int i = 0; i < 10; ++i) {
        a = step_rk4(a, dt, CoordinateGauge::temporal);
        b = step_rk4(b, dt, CoordinateGauge::heat);
    }
    CHECK(map_l2_distance(a.im, b.im) > 1e-9);  // parametrizations do differ
    CHECK(l2_distance(a.im, b.im) < 1e-6);      // images do not
}

TEST_CASE("regularized euler self-convergence is first order in eps") {
    auto cd = clifford_data(32, 1.0, 2.0);
    const double T = 0.02;
    FlowState ref{cd.im, cd.frame};
    for (int i = 0; i < 20; ++i) ref = step_rk4(ref, T / 20.0);

    std::vector<double> lx, ly;
    for (double eps : {4e-3, 2e-3, 1e-3}) {
        auto run = run_regularized_euler(cd.im, cd.frame, eps, T, 8, 1.0);
        const double err = map_l2_distance(run.trajectory.back().im, ref.im);
        lx.push_back(std::log2(eps));
        ly.push_back(std::log2(err));
    }
    const double slope = (ly.front() - ly.back()) / (lx.front() - lx.back());
    CHECK(slope >= 0.9);
    CHECK(ly.back() < std::log2(5e-3));  // endpoint within 5e-3 of the reference
}

TEST_CASE("torus pair energy growth respects the proof-shaped bound") {
    // concentric product tori share coordinates, so the variation decomposes
    // without rematching; the fitted growth of ||omega||^2 must sit under
    // 2 ||lambda||_inf^2 (with slack)
    auto a0 = clifford_data(32, 1.0, 2.0);
    auto b0 = clifford_data(32, 1.0 + 1e-4, 2.0);
    FlowState a{a0.im, a0.frame}, b{b0.im, pullback_frame(a0.frame, a0.im, b0.im)};
    const double dt = 1e-3;
    std::vector<double> om_l2;
    double lam_inf = 0;
    for (int i = 0; i <= 40; ++i) {
        auto geo = compute_geometry(a.im);
        auto sh = complex_shape(geo, a.frame);
        RField n2 = tensor_sqnorm_g(sh.lambda, 2, geo);
        for (std::size_t p = 0; p < n2.points(); ++p)
            lam_inf = std::max(lam_inf, std::sqrt(std::max(0.0, n2.at(p, 0))));
        RField delta(a.im.grid, 4);
        for (std::size_t k = 0; k < delta.v.size(); ++k)
            delta.v[k] = b.im.u.v[k] - a.im.u.v[k];
        auto dec = decompose_variation(geo, a.frame, delta);
        RField om2(a.im.grid, 1);
        for (std::size_t p = 0; p < om2.points(); ++p)
            om2.at(p, 0) = std::norm(dec.omega.at(p, 0));
        om_l2.push_back(std::sqrt(integrate_dvol(om2, geo)));
        if (i < 40) {
            a = step_rk4(a, dt);
            b = step_rk4(b, dt);
        }
    }
    const double c_fit = energy_growth(om_l2, dt);
    CHECK(c_fit <= 2.0 * lam_inf * lam_inf * 1.5);
}
