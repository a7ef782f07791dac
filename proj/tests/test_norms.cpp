#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "smcf/norms.hpp"

using namespace smcf;

TEST_CASE("intrinsic sobolev norms on flat and clifford data") {
    auto fd = flat_data(Grid::square(16));
    auto geo = compute_geometry(fd.im);
    auto sh = complex_shape(geo, fd.frame);
    for (int k = 0; k <= 3; ++k)
        CHECK(intrinsic_sobolev(sh.lambda, 2, geo, &fd.frame.A, k) < 1e-12);

    // clifford r1=1, r2=2: |lambda|^2_g = 1 + 1/4, dvol = 2 dx over [0,2pi]^2
    auto cd = clifford_data(32, 1.0, 2.0);
    auto geoc = compute_geometry(cd.im);
    auto shc = complex_shape(geoc, cd.frame);
    const double l2 = intrinsic_sobolev(shc.lambda, 2, geoc, &cd.frame.A, 0);
    CHECK(std::abs(sq(l2) - 1.25 * 4 * kPi * kPi * 2) < 1e-8);

    // parallel second fundamental form: H^1 equals L^2
    const double h1 = intrinsic_sobolev(shc.lambda, 2, geoc, &cd.frame.A, 1);
    CHECK(std::abs(h1 - l2) < 1e-8);

    CHECK_THROWS_AS(intrinsic_sobolev(shc.lambda, 2, geoc, &cd.frame.A, 7), CapExceeded);
}

TEST_CASE("intrinsic norm is monotone in the derivative order") {
    auto gd = graph_bump_data(Grid::square(32), 0.1, 1.0, 8);
    auto geo = compute_geometry(gd.im);
    auto sh = complex_shape(geo, gd.frame);
    double prev = 0;
    for (int k = 0; k <= 4; ++k) {
        const double v = intrinsic_sobolev(sh.lambda, 2, geo, &gd.frame.A, k);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
}

TEST_CASE("hamilton interpolation inequality holds with modest constant") {
    // ||nabla T||_{L2} <= C ||nabla^2 T||^{1/2} ||T||^{1/2}
    for (auto name : {"clifford", "graph_bump"}) {
        auto data = generate_initial_data(name, Grid::square(32), GeneratorParams{});
        auto geo = compute_geometry(data.im);
        auto sh = complex_shape(geo, data.frame);
        auto norm_l = [&](int l) {
            CField cur = sh.lambda;
            int r = 2;
            for (int j = 0; j < l; ++j) {
                cur = cov_deriv(cur, r, geo, &data.frame.A);
                ++r;
            }
            return std::sqrt(integrate_dvol(tensor_sqnorm_g(cur, r, geo), geo));
        };
        const double n0 = norm_l(0), n1 = norm_l(1), n2 = norm_l(2);
        if (n1 > 1e-12) {
            INFO(name);
            CHECK(n1 <= 20.0 * std::sqrt(n2) * std::sqrt(n0) + 1e-12);
        }
    }
}

TEST_CASE("extrinsic sobolev: zero, single mode, parseval") {
    const Grid g = Grid::line(64, 2 * kPi);
    RField zero(g, 2);
    CHECK(extrinsic_sobolev(zero, 1.7) == 0.0);

    const int k = 5;
    const double amp = 0.3, s = 1.25;
    RField mode(g, 1);
    for (int i = 0; i < g.n[0]; ++i) mode.at(i, 0) = amp * std::cos(k * g.coord(0, i));
    const double want = std::pow(1.0 + k * k, s / 1.0 * 0.5) * amp *
                        std::sqrt(g.box_volume() / 2.0);
    CHECK(std::abs(extrinsic_sobolev(mode, s) - want) < 1e-12);

    std::mt19937_64 rng(9);
    RField rnd(g, 3);
    for (auto& x : rnd.v) x = 2.0 * (double(rng()) / double(rng.max())) - 1.0;
    CHECK(std::abs(extrinsic_sobolev(rnd, 0.0) - l2_norm(rnd)) / l2_norm(rnd) < 1e-12);
}

TEST_CASE("family: members converge and too-short families are rejected") {
    auto gd = graph_bump_data(Grid::square(32), 0.1, 1.0, 8);
    auto fam = build_family(gd.im, gd.frame, 1.0, 0.25);
    REQUIRE(fam.size() >= 8);
    double prev = 1e300;
    for (const auto& m : fam.members) {
        const double dist = extrinsic_sobolev(m.im.u - gd.im.u, 2.5);
        CHECK(dist < prev + 1e-11);
        prev = dist;
    }
    CHECK(extrinsic_sobolev(fam.members.back().im.u - gd.im.u, 2.5) < 1e-10);

    auto tiny = build_family(gd.im, gd.frame, 4.0, 2.0);
    CHECK_THROWS_AS(xs_norm(tiny, 2.5, NormFlavor::extrinsic), FamilyTooShort);
}

TEST_CASE("xs norm: zero family, single band, embedding and equivalence") {
    const double s = 2.5;
    auto fd = flat_data(Grid::square(32));
    auto fam0 = build_family(fd.im, fd.frame, 1.0);
    CHECK(xs_norm(fam0, s, NormFlavor::extrinsic) < 1e-12);
    CHECK(xs_norm(fam0, s, NormFlavor::intrinsic) < 1e-12);

    // lambda concentrated in one dyadic band at K = 8 (h1 = 3)
    const int K = 8;
    Immersion one = make_flat(Grid::square(64));
    for (int ix = 0; ix < 64; ++ix)
        for (int iy = 0; iy < 64; ++iy)
            one.u.at(one.grid.index(ix, iy), 2) = 2e-3 * std::cos(K * one.grid.coord(0, ix));
    auto fr1 = exterior_frame(one);
    auto fam1 = build_family(one, fr1, 1.0);
    auto geo1 = compute_geometry(one);
    auto sh1 = complex_shape(geo1, fr1);
    const double xs = xs_norm(fam1, s, NormFlavor::extrinsic);
    const double ref = std::pow(1.0 + K * K, s / 2.0) * l2_norm(sh1.lambda);
    CHECK(xs / ref > 0.25);
    CHECK(xs / ref < 4.0);

    // embedding ||lambda||_{H^s} <= 10 ||lambda||_{X^s_ext} and int/ext equivalence
    auto gd = graph_bump_data(Grid::square(32), 0.1, 1.0, 8);
    auto fam = build_family(gd.im, gd.frame, 1.0);
    auto geo = compute_geometry(gd.im);
    auto sh = complex_shape(geo, gd.frame);
    const double hs = extrinsic_sobolev(sh.lambda, s);
    const double xse = xs_norm(fam, s, NormFlavor::extrinsic);
    const double xsi = xs_norm(fam, s, NormFlavor::intrinsic);
    CHECK(hs <= 10.0 * xse);
    CHECK(xse / hs >= 1.0);
    CHECK(xse / hs <= 10.0);
    CHECK(xsi / xse >= 0.1);
    CHECK(xsi / xse <= 10.0);
}

TEST_CASE("ys and zs norms: flat zero, graph embedding") {
    const double s = 2.5;
    auto fd = flat_data(Grid::square(32));
    auto fam0 = build_family(fd.im, fd.frame, 1.0);
    auto [y0, z0] = ys_zs_norms(fam0, s);
    CHECK(y0 < 1e-12);
    CHECK(z0 < 1e-12);

    auto gd = graph_bump_data(Grid::square(32), 0.1, 1.0, 8);
    auto fam = build_family(gd.im, gd.frame, 1.0);
    auto [y, z] = ys_zs_norms(fam, s);
    auto geo = compute_geometry(gd.im);
    const double gref = extrinsic_sobolev_rough(geo.g, 1.0, s);  // || |D| g ||_{H^s}
    CHECK(gref <= 10.0 * y);
    CHECK(y <= 10.0 * gref);
    CHECK(extrinsic_sobolev(gd.frame.A, s) <= 10.0 * z + 1e-12);
}

TEST_CASE("frequency envelope: zero, single band, l2 comparison, validation") {
    const Grid g = Grid::line(128, 2 * kPi);
    RField zero(g, 1);
    auto env0 = frequency_envelope(zero, 2.5, 0.5);
    CHECK(env0.l2() == 0.0);

    // single mode at K = 16: envelope peaks there and decays by 2^{-delta |j-k|}
    const int K = 16;
    const double delta = 0.5;
    RField mode(g, 1);
    for (int i = 0; i < g.n[0]; ++i) mode.at(i, 0) = std::sin(K * g.coord(0, i));
    auto env = frequency_envelope(mode, 2.5, delta);
    CHECK(env.slowly_varying());
    int peak = 0;
    for (std::size_t j = 0; j < env.c.size(); ++j)
        if (env.c[j] > env.c[peak]) peak = int(j);
    CHECK(std::abs((peak + env.j0) - 4) <= 1);  // 2^4 = 16
    // exact geometric decay away from the band
    for (std::size_t j = peak + 2; j + 1 < env.c.size(); ++j)
        CHECK(std::abs(env.c[j + 1] / env.c[j] - std::exp2(-delta)) < 1e-9);

    CHECK_THROWS_AS(frequency_envelope(mode, 2.5, 2.5), BadDelta);
    CHECK_THROWS_AS(frequency_envelope(mode, 2.5, -0.1), BadDelta);
}

TEST_CASE("envelope l2 is within factor 3 of the defining sobolev sum") {
    const double s = 2.5, delta = 0.4;
    auto gd = graph_random_data(Grid::square(64), 0.2, 2.5, 20, 13);
    auto geo = compute_geometry(gd.im);

    // stack d^2 F and d nu into one field
    const int d = 2, m = 4;
    RField stacked(gd.im.grid, d * d * m + 2 * d * m);
    int slot = 0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            for (std::size_t p = 0; p < gd.im.grid.points(); ++p)
                for (int c = 0; c < m; ++c)
                    stacked.at(p, slot + c) = geo.d2F[a][b].at(p, c);
            slot += m;
        }
    for (const RField* nu : {&gd.frame.nu1, &gd.frame.nu2})
        for (int a = 0; a < d; ++a) {
            RField dn = spectral_derivative(*nu, a, 1);
            for (std::size_t p = 0; p < gd.im.grid.points(); ++p)
                for (int c = 0; c < m; ++c) stacked.at(p, slot + c) = dn.at(p, c);
            slot += m;
        }

    auto env = frequency_envelope(stacked, s, delta);
    CHECK(env.slowly_varying());

    double d2f_hs = 0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) d2f_hs += sq(extrinsic_sobolev(geo.d2F[a][b], s));
    double dnu_hs = 0;
    for (const RField* nu : {&gd.frame.nu1, &gd.frame.nu2})
        for (int a = 0; a < d; ++a)
            dnu_hs += sq(extrinsic_sobolev(spectral_derivative(*nu, a, 1), s));
    const double ref = std::sqrt(d2f_hs) + std::sqrt(dnu_hs);
    CHECK(env.l2() >= ref / 3.0);
    CHECK(env.l2() <= ref * 3.0);
}
