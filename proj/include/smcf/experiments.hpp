#pragma once

// Configuration-driven experiment registry. Every experiment writes CSV
// artifacts under output_dir plus machine-readable PASS/FAIL lines in
// verdict.txt; the runner exit status is nonzero on any FAIL.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "smcf/analysis.hpp"
#include "smcf/config.hpp"
#include "smcf/norms.hpp"
#include "smcf/snapshot.hpp"

namespace smcf {

struct VerdictLine {
    std::string criterion;
    bool pass = false;
    std::string detail;
};

struct ExperimentResult {
    std::vector<VerdictLine> verdicts;
    bool all_pass() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return !verdicts.empty();
    }
};

namespace detail {

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class Csv {
  public:
    Csv(const std::string& dir, const std::string& name) {
        std::filesystem::create_directories(dir);
        out_.open(dir + "/" + name);
        if (!out_) throw Error("cannot open csv " + dir + "/" + name);
    }
    void header(const std::string& h) { out_ << h << "\n"; }
    template <class... Ts>
    void row(Ts... vals) {
        bool first = true;
        (
            [&] {
                if (!first) out_ << ",";
                first = false;
                if constexpr (std::is_convertible_v<Ts, std::string>)
                    out_ << vals;
                else
                    out_ << fmt(double(vals));
            }(),
            ...);
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

inline InitialData config_data(const ExperimentConfig& cfg) {
    Grid g = cfg.grid_dim == 1 ? Grid::line(cfg.grid_n, cfg.grid_length)
                               : Grid(2, {cfg.grid_n, cfg.grid_n},
                                      {cfg.grid_length, cfg.grid_length});
    GeneratorParams prm;
    prm.amplitude = cfg.amplitude;
    prm.radius = cfg.radius;
    prm.radius2 = cfg.radius2;
    prm.pitch = cfg.pitch;
    prm.decay = cfg.decay;
    prm.kmax = cfg.kmax;
    prm.smoothness = cfg.smoothness;
    prm.seed = cfg.seed;
    return generate_initial_data(cfg.initial_name, g, prm);
}

inline double least_squares_slope(const std::vector<double>& logx,
                                  const std::vector<double>& logy) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(logx.size());
    for (std::size_t i = 0; i < logx.size(); ++i) {
        sx += logx[i];
        sy += logy[i];
        sxx += logx[i] * logx[i];
        sxy += logx[i] * logy[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double max_lambda_linf(const FlowState& st) {
    auto geo = compute_geometry(st.im);
    auto sh = complex_shape(geo, st.frame);
    RField n2 = tensor_sqnorm_g(sh.lambda, 2, geo);
    double m = 0;
    for (std::size_t p = 0; p < n2.points(); ++p)
        m = std::max(m, std::sqrt(std::max(0.0, n2.at(p, 0))));
    return m;
}

// ---------------------------------------------------------------------------

inline ExperimentResult exp_circle_translation(const ExperimentConfig& cfg) {
    const double r = cfg.radius;
    auto data = circle_data(cfg.grid_n, r);
    FlowConfig fc;
    fc.dt = cfg.flow_dt;
    fc.t_end = cfg.flow_t_end;
    fc.cfl_safety = cfg.cfl_safety;
    fc.allow_dt_override = cfg.allow_dt_override;
    fc.validate(compute_geometry(data.im));

    Csv csv(cfg.output_dir, "circle_translation.csv");
    csv.header("t,center_z,radius_dev,volume");
    FlowState st{data.im, data.frame};
    const int steps = int(std::lround(fc.t_end / fc.dt));
    auto center_z = [](const Immersion& im) {
        double z = 0;
        for (std::size_t p = 0; p < im.grid.points(); ++p) z += im.value(p)[2];
        return z / double(im.grid.points());
    };
    auto radius_dev = [&](const Immersion& im) {
        double dev = 0;
        for (std::size_t p = 0; p < im.grid.points(); ++p) {
            const auto f = im.value(p);
            dev = std::max(dev, std::abs(std::hypot(f[0], f[1]) - r));
        }
        return dev;
    };
    const int stride = std::max(1, steps / 50);
    for (int i = 0; i <= steps; ++i) {
        if (i % stride == 0 || i == steps)
            csv.row(st.im.time, center_z(st.im), radius_dev(st.im),
                    volume(compute_geometry(st.im)));
        if (cfg.emit_snapshots_every > 0 && i % cfg.emit_snapshots_every == 0)
            write_snapshot(cfg.output_dir + "/circle_" + std::to_string(i) + ".snap", st.im.u,
                           st.im.time);
        if (i < steps) st = step_rk4(st, fc.dt);
    }
    const double speed = std::abs(center_z(st.im)) / fc.t_end;
    const double speed_err = std::abs(speed - 1.0 / r) * r;
    const double drift = radius_dev(st.im);
    ExperimentResult res;
    res.verdicts.push_back({"circle_translation_speed", speed_err < 1e-6,
                            "rel_speed_err=" + fmt(speed_err)});
    res.verdicts.push_back({"circle_translation_radius", drift < 1e-8,
                            "radius_drift=" + fmt(drift)});
    return res;
}

inline ExperimentResult exp_clifford_ode(const ExperimentConfig& cfg) {
    auto data = clifford_data(cfg.grid_n, cfg.radius, cfg.radius2);
    FlowConfig fc;
    fc.dt = cfg.flow_dt;
    fc.t_end = cfg.flow_t_end;
    fc.cfl_safety = cfg.cfl_safety;
    fc.allow_dt_override = cfg.allow_dt_override;
    fc.validate(compute_geometry(data.im));

    auto radii = [](const Immersion& im) {
        double r1 = 0, r2 = 0;
        for (std::size_t p = 0; p < im.grid.points(); ++p) {
            const auto f = im.value(p);
            r1 += std::hypot(f[0], f[1]);
            r2 += std::hypot(f[2], f[3]);
        }
        return std::pair{r1 / double(im.grid.points()), r2 / double(im.grid.points())};
    };

    // orientation sign from the measured initial radial velocity
    FlowState st{data.im, data.frame};
    auto vel0 = smcf_velocity(st.im, st.frame);
    const auto f0 = st.im.value(0);
    const double sign = (vel0.at(0, 0) * f0[0] + vel0.at(0, 1) * f0[1]) > 0 ? 1.0 : -1.0;

    // independent oracle: fine-step RK4 on the reduced system
    const int steps = int(std::lround(fc.t_end / fc.dt));
    std::vector<std::pair<double, double>> oracle(steps + 1);
    {
        std::array<double, 2> r{cfg.radius, cfg.radius2};
        const int sub = 2000;
        const double dto = fc.dt / sub;
        auto f = [sign](std::array<double, 2> rr) {
            return std::array<double, 2>{sign / rr[1], -sign / rr[0]};
        };
        oracle[0] = {r[0], r[1]};
        for (int i = 1; i <= steps; ++i) {
            for (int k = 0; k < sub; ++k) {
                auto k1 = f(r);
                auto k2 = f({r[0] + dto / 2 * k1[0], r[1] + dto / 2 * k1[1]});
                auto k3 = f({r[0] + dto / 2 * k2[0], r[1] + dto / 2 * k2[1]});
                auto k4 = f({r[0] + dto * k3[0], r[1] + dto * k3[1]});
                r[0] += dto / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
                r[1] += dto / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
            }
            oracle[i] = {r[0], r[1]};
        }
    }

    Csv csv(cfg.output_dir, "clifford_ode.csv");
    csv.header("t,r1,r2,r1_ode,r2_ode,product");
    double worst = 0, prod_drift = 0;
    const double prod0 = cfg.radius * cfg.radius2;
    for (int i = 0; i <= steps; ++i) {
        const auto [r1, r2] = radii(st.im);
        worst = std::max({worst, std::abs(r1 - oracle[i].first),
                          std::abs(r2 - oracle[i].second)});
        prod_drift = std::max(prod_drift, std::abs(r1 * r2 - prod0));
        csv.row(st.im.time, r1, r2, oracle[i].first, oracle[i].second, r1 * r2);
        if (i < steps) st = step_rk4(st, fc.dt);
    }
    ExperimentResult res;
    res.verdicts.push_back(
        {"clifford_ode_match", worst < 1e-4, "max_radius_err=" + fmt(worst)});
    res.verdicts.push_back(
        {"clifford_product_drift", prod_drift < 1e-8, "drift=" + fmt(prod_drift)});
    return res;
}

inline ExperimentResult exp_volume_conservation(const ExperimentConfig& cfg) {
    auto data = config_data(cfg);
    FlowState st{data.im, data.frame};
    const double v0 = volume(compute_geometry(st.im));
    const int steps = int(std::lround(cfg.flow_t_end / cfg.flow_dt));
    Csv csv(cfg.output_dir, "volume_conservation.csv");
    csv.header("t,volume,rel_drift");
    double worst = 0;
    for (int i = 0; i <= steps; ++i) {
        const double v = volume(compute_geometry(st.im));
        worst = std::max(worst, std::abs(v - v0) / v0);
        csv.row(st.im.time, v, std::abs(v - v0) / v0);
        if (i < steps) st = step_rk4(st, cfg.flow_dt);
    }
    ExperimentResult res;
    res.verdicts.push_back(
        {"volume_conservation", worst < 1e-6, "max_rel_drift=" + fmt(worst)});
    return res;
}

inline ExperimentResult exp_residual_suite(const ExperimentConfig& cfg) {
    ExperimentResult res;
    Csv csv(cfg.output_dir, "residual_suite.csv");
    csv.header("case,n,codazzi,ricci_eq,gauss");

    auto static_residuals = [&](const std::string& name, int n) {
        Grid g = Grid(2, {n, n}, {cfg.grid_length, cfg.grid_length});
        GeneratorParams prm;
        prm.amplitude = cfg.amplitude;
        prm.radius = cfg.radius;
        prm.radius2 = cfg.radius2;
        prm.decay = cfg.decay;
        prm.kmax = cfg.kmax;
        auto data = generate_initial_data(name, g, prm);
        auto geo = compute_geometry(data.im);
        auto sh = complex_shape(geo, data.frame);
        const double cod = codazzi_residual(sh, geo, data.frame.A);
        const double ric = ricci_equation_residual(sh, geo, data.frame.A);
        auto [R, Ric] = curvature_tensors(sh, geo);
        const double gauss = linf_norm(intrinsic_riemann(geo) - R);
        csv.row(name, double(n), cod, ric, gauss);
        return std::array<double, 3>{cod, ric, gauss};
    };

    const double floor = 1e-11;
    for (const char* name : {"flat", "clifford", "graph_bump"}) {
        auto base = static_residuals(name, cfg.grid_n);
        auto fine = static_residuals(name, 2 * cfg.grid_n);
        const bool small = base[0] < 1e-8 && base[1] < 1e-8 && base[2] < 1e-8;
        bool refined = true;
        for (int k = 0; k < 3; ++k)
            refined = refined && (fine[k] <= base[k] / 4.0 || fine[k] < floor);
        res.verdicts.push_back({std::string("structure_residuals_") + name, small,
                                "codazzi=" + fmt(base[0]) + " ricci=" + fmt(base[1]) +
                                    " gauss=" + fmt(base[2])});
        res.verdicts.push_back({std::string("structure_refinement_") + name, refined,
                                "fine codazzi=" + fmt(fine[0]) + " ricci=" + fmt(fine[1]) +
                                    " gauss=" + fmt(fine[2])});
    }

    // dynamic gauge-system residuals along a heat-gauge run
    Csv dcsv(cfg.output_dir, "gauge_residuals.csv");
    dcsv.header("n,schrodinger,parabolic_g,parabolic_A");
    // the dynamic runs use a gentler spectrum: the dealiased solver freezes
    // product harmonics past the two-thirds cutoff, so the residual target
    // needs those tails below 1e-5 at the base resolution
    auto dynamic_residuals = [&](int n) {
        Grid g = Grid(2, {n, n}, {cfg.grid_length, cfg.grid_length});
        auto data = graph_bump_data(g, 0.05, 1.0, 8);
        auto series = run_direct({data.im, data.frame}, cfg.flow_dt, 8, CoordinateGauge::heat,
                                 FramePropagation::gauge_ode);
        auto sres = schrodinger_residual(series, cfg.flow_dt);
        auto [gr, ar] = parabolic_residual(series, cfg.flow_dt);
        double ms = 0, mg = 0, ma = 0;
        for (double v : sres) ms = std::max(ms, v);
        for (double v : gr) mg = std::max(mg, v);
        for (double v : ar) ma = std::max(ma, v);
        dcsv.row(double(n), ms, mg, ma);
        return std::array<double, 3>{ms, mg, ma};
    };
    auto base = dynamic_residuals(cfg.grid_n);
    auto fine = dynamic_residuals(2 * cfg.grid_n);

    // trajectory diagnostics for the base heat-gauge run, in the shared format
    {
        Grid g = Grid(2, {cfg.grid_n, cfg.grid_n}, {cfg.grid_length, cfg.grid_length});
        auto data = graph_bump_data(g, 0.05, 1.0, 8);
        auto series = run_direct({data.im, data.frame}, cfg.flow_dt, 8, CoordinateGauge::heat,
                                 FramePropagation::gauge_ode);
        auto sres = schrodinger_residual(series, cfg.flow_dt);
        auto [gr, ar] = parabolic_residual(series, cfg.flow_dt);
        Csv traj(cfg.output_dir, "trajectory.csv");
        traj.header("t,volume,lambda_Linf,lambda_H1_int,lambda_Hk_int,g_min_eig,g_max_eig,"
                    "residual_schrodinger,residual_parabolic");
        for (std::size_t i = 0; i < series.size(); ++i) {
            auto geo = compute_geometry(series[i].state.im);
            auto sh = complex_shape(geo, series[i].state.frame);
            auto diag = flow_diagnostics(series[i].state);
            const double hk = intrinsic_sobolev(sh.lambda, 2, geo,
                                                &series[i].state.frame.A, cfg.norms_k);
            const bool interior = i >= 2 && i + 2 < series.size();
            const double rs = interior ? sres[i - 2] : 0.0;
            const double rp = interior ? std::max(gr[i - 2], ar[i - 2]) : 0.0;
            traj.row(series[i].state.im.time, diag.volume, diag.lambda_linf,
                     diag.lambda_h1_int, hk, diag.g_min_eig, diag.g_max_eig, rs, rp);
            if (cfg.emit_snapshots_every > 0 && i % std::size_t(cfg.emit_snapshots_every) == 0)
                write_snapshot(cfg.output_dir + "/traj_" + std::to_string(i) + ".snap",
                               series[i].state.im.u, series[i].state.im.time);
        }
    }
    const bool small = base[0] < 1e-5 && base[1] < 1e-5 && base[2] < 1e-5;
    bool refined = true;
    for (int k = 0; k < 3; ++k)
        refined = refined && (fine[k] <= base[k] / 4.0 || fine[k] < floor);
    res.verdicts.push_back({"gauge_system_residuals", small,
                            "schrodinger=" + fmt(base[0]) + " g=" + fmt(base[1]) +
                                " A=" + fmt(base[2])});
    res.verdicts.push_back({"gauge_system_refinement", refined,
                            "fine schrodinger=" + fmt(fine[0]) + " g=" + fmt(fine[1]) +
                                " A=" + fmt(fine[2])});
    return res;
}

inline ExperimentResult exp_coulomb_gauge(const ExperimentConfig& cfg) {
    auto data = config_data(cfg);
    auto geo = compute_geometry(data.im);

    // start from a deliberately rotated (non-Coulomb) frame
    RField theta(data.im.grid, 1);
    for (int ix = 0; ix < data.im.grid.n[0]; ++ix)
        for (int iy = 0; iy < data.im.grid.n[1]; ++iy)
            theta.at(data.im.grid.index(ix, iy), 0) =
                0.2 * std::sin(2 * kPi * data.im.grid.coord(0, ix) / data.im.grid.len[0]) *
                std::cos(2 * kPi * data.im.grid.coord(1, iy) / data.im.grid.len[1]);
    auto rough = rotate_frame(data.frame, theta);
    auto fixed = coulomb_rotate(rough, geo);
    const double div = linf_norm(flat_divergence(fixed.A));
    auto defects = frame_defects(fixed, geo);
    auto again = coulomb_rotate(fixed, geo);
    const double idem = std::max(linf_norm(again.nu1 - fixed.nu1),
                                 linf_norm(again.A - fixed.A));

    Csv csv(cfg.output_dir, "coulomb_gauge.csv");
    csv.header("div_A,orthonormality,normality,a_consistency,idempotence");
    csv.row(div, defects.orthonormality, defects.normality, defects.a_consistency, idem);

    ExperimentResult res;
    res.verdicts.push_back({"coulomb_divergence", div < 1e-8, "div_A=" + fmt(div)});
    res.verdicts.push_back({"coulomb_frame_invariants",
                            defects.orthonormality < 1e-10 && defects.normality < 1e-9 &&
                                defects.a_consistency < 1e-9,
                            "orth=" + fmt(defects.orthonormality) +
                                " norm=" + fmt(defects.normality) +
                                " acons=" + fmt(defects.a_consistency)});
    res.verdicts.push_back({"coulomb_idempotence", idem < 1e-10, "change=" + fmt(idem)});
    return res;
}

inline ExperimentResult exp_euler_convergence(const ExperimentConfig& cfg) {
    auto data = config_data(cfg);

    // fine rk4 reference to T = 2^{-6}
    const double T = std::exp2(-6);
    const double dt_ref = T / 256.0;
    std::vector<Immersion> ref;  // states at eps_j = 2^{-6-j}
    {
        FlowState st{data.im, data.frame};
        std::vector<double> targets;
        for (int j = 6; j >= 0; --j) targets.push_back(std::exp2(-6.0 - j));
        for (int i = 1; i <= 256; ++i) {
            st = step_rk4(st, dt_ref);
            for (double tv : targets)
                if (std::abs(st.im.time - tv) < dt_ref / 2) ref.push_back(st.im);
        }
    }

    Csv csv(cfg.output_dir, "euler_convergence.csv");
    csv.header("eps,l2_err");
    std::vector<double> lx, ly;
    for (int j = 0; j <= 6; ++j) {
        const double eps = std::exp2(-6.0 - j);
        auto reg = willmore_regularize(data.im, data.frame,
                                       EulerSchemeConfig::for_epsilon(
                                           eps, cfg.willmore_substeps, cfg.splitting_constant));
        Immersion one = euler_step(reg.im, reg.frame, eps);
        const Immersion& exact = ref[ref.size() - 1 - j];  // ref stored big..small
        const double err = map_l2_distance(one, exact);
        csv.row(eps, err);
        lx.push_back(std::log2(eps));
        ly.push_back(std::log2(std::max(err, 1e-300)));
    }
    const double slope = least_squares_slope(lx, ly);
    ExperimentResult res;
    res.verdicts.push_back(
        {"euler_one_step_rate", slope >= 1.4, "slope=" + fmt(slope)});
    return res;
}

inline ExperimentResult exp_willmore_smoothing(const ExperimentConfig& cfg) {
    ExperimentResult res;
    Csv csv(cfg.output_dir, "willmore_smoothing.csv");
    csv.header("eps,h1_ratio,h2_ratio,lambda_l2_diff");

    Grid g = Grid(2, {cfg.grid_n, cfg.grid_n}, {cfg.grid_length, cfg.grid_length});
    // rough data for the smoothing exponents (lambda marginally L^2)
    auto rough = graph_random_data(g, cfg.amplitude, 2.0, cfg.grid_n / 3, cfg.seed);
    // smooth low-band data for the eps^{3/2} approximation bound: the bound
    // presumes high Sobolev regularity, and band-limited random data keeps
    // the whole eps window inside the linear damping regime
    auto smooth = graph_random_data(g, 0.4 * cfg.amplitude, 8.0, 2, cfg.seed + 1);

    auto lambda_of = [](const FlowState& st) {
        auto geo = compute_geometry(st.im);
        return complex_shape(geo, st.frame).lambda;
    };
    const CField lam0 = lambda_of({rough.im, rough.frame});
    const double l0 = l2_norm(lam0);
    auto Lambda_field = [](const FlowState& st) {
        return compute_geometry(st.im).Lambda;
    };
    const RField Lam0 = Lambda_field({smooth.im, smooth.frame});

    std::vector<double> lx1, ly1, ly2, lx3, ly3;
    for (int j = 8; j <= 16; ++j) {
        const double eps = std::exp2(-double(j));
        auto reg = willmore_regularize(rough.im, rough.frame,
                                       EulerSchemeConfig::for_epsilon(
                                           eps, cfg.willmore_substeps, cfg.splitting_constant));
        const CField lam = lambda_of(reg);
        const double h1 = extrinsic_sobolev(lam, 1.0) / l0;
        const double h2 = extrinsic_sobolev(lam, 2.0) / l0;
        csv.row(eps, h1, h2, 0.0);
        lx1.push_back(std::log2(eps));
        ly1.push_back(std::log2(h1));
        ly2.push_back(std::log2(h2));
    }
    for (int j = 6; j <= 12; ++j) {
        const double eps = std::exp2(-double(j));
        auto reg = willmore_regularize(smooth.im, smooth.frame,
                                       EulerSchemeConfig::for_epsilon(
                                           eps, cfg.willmore_substeps, cfg.splitting_constant));
        const double diff = l2_norm(Lambda_field(reg) - Lam0);
        csv.row(eps, 0.0, 0.0, diff);
        lx3.push_back(std::log2(eps));
        ly3.push_back(std::log2(std::max(diff, 1e-300)));
    }

    const double s1 = least_squares_slope(lx1, ly1);
    const double s2 = least_squares_slope(lx1, ly2);
    const double s3 = least_squares_slope(lx3, ly3);
    res.verdicts.push_back({"willmore_smoothing_m1", std::abs(s1 + 0.25) <= 0.15,
                            "slope=" + fmt(s1) + " target=-0.25+-0.15"});
    res.verdicts.push_back({"willmore_smoothing_m2", std::abs(s2 + 0.5) <= 0.15,
                            "slope=" + fmt(s2) + " target=-0.5+-0.15"});
    res.verdicts.push_back(
        {"willmore_approximation_rate", s3 >= 1.4, "slope=" + fmt(s3)});
    return res;
}

inline ExperimentResult exp_norm_equivalence(const ExperimentConfig& cfg) {
    ExperimentResult res;
    Csv csv(cfg.output_dir, "norm_equivalence.csv");
    csv.header("quantity,flavor,s,value");
    const double s = cfg.norms_s;

    for (const auto& name : generator_names()) {
        const bool curve = name == "circle" || name == "helix";
        Grid g = curve ? Grid::line(4 * cfg.grid_n) : Grid::square(cfg.grid_n);
        GeneratorParams prm;
        prm.amplitude = cfg.amplitude;
        prm.radius = cfg.radius;
        prm.radius2 = cfg.radius2;
        prm.pitch = cfg.pitch;
        prm.decay = cfg.decay;
        prm.kmax = std::min(cfg.kmax, cfg.grid_n / 4);
        prm.smoothness = cfg.smoothness;
        prm.seed = cfg.seed;
        auto data = generate_initial_data(name, g, prm);
        auto geo = compute_geometry(data.im);
        auto sh = complex_shape(geo, data.frame);

        auto fam = build_family(data.im, data.frame, cfg.norms_h0, cfg.norms_dh);
        const double hs = extrinsic_sobolev(sh.lambda, s);
        const double xse = xs_norm(fam, s, NormFlavor::extrinsic);
        const double xsi = xs_norm(fam, s, NormFlavor::intrinsic);
        auto [y, z] = ys_zs_norms(fam, s);
        csv.row(std::string(name) + "_lambda", std::string("H_s"), s, hs);
        csv.row(std::string(name) + "_lambda", std::string("Xs_ext"), s, xse);
        csv.row(std::string(name) + "_lambda", std::string("Xs_int"), s, xsi);
        csv.row(std::string(name) + "_g", std::string("Ys1"), s, y);
        csv.row(std::string(name) + "_A", std::string("Zs"), s, z);

        bool ratios_ok;
        std::string detail;
        if (hs < 1e-12) {
            ratios_ok = xse < 1e-10 && xsi < 1e-10;  // flat: all norms vanish
            detail = "zero lambda";
        } else {
            const double re = xse / hs, ri = xsi / xse;
            ratios_ok = re >= 1.0 && re <= 10.0 && ri >= 0.1 && ri <= 10.0;
            detail = "Xext/Hs=" + fmt(re) + " Xint/Xext=" + fmt(ri);
        }
        res.verdicts.push_back({"norm_ratios_" + std::string(name), ratios_ok, detail});

        // frequency envelope against the defining Sobolev sum
        const int d = g.dim, m = data.im.ambient;
        RField stacked(g, d * d * m + 2 * d * m);
        int slot = 0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                for (std::size_t p = 0; p < g.points(); ++p)
                    for (int c = 0; c < m; ++c)
                        stacked.at(p, slot + c) = geo.d2F[a][b].at(p, c);
                slot += m;
            }
        for (const RField* nu : {&data.frame.nu1, &data.frame.nu2})
            for (int a = 0; a < d; ++a) {
                RField dn = spectral_derivative(*nu, a, 1);
                for (std::size_t p = 0; p < g.points(); ++p)
                    for (int c = 0; c < m; ++c) stacked.at(p, slot + c) = dn.at(p, c);
                slot += m;
            }
        auto env = frequency_envelope(stacked, s, cfg.norms_delta, cfg.norms_h0, cfg.norms_dh);
        double d2f_hs = 0, dnu_hs = 0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) d2f_hs += sq(extrinsic_sobolev(geo.d2F[a][b], s));
        for (const RField* nu : {&data.frame.nu1, &data.frame.nu2})
            for (int a = 0; a < d; ++a)
                dnu_hs += sq(extrinsic_sobolev(spectral_derivative(*nu, a, 1), s));
        const double ref = std::sqrt(d2f_hs) + std::sqrt(dnu_hs);
        csv.row(std::string(name) + "_envelope", std::string("l2"), s, env.l2());
        csv.row(std::string(name) + "_envelope", std::string("sobolev_sum"), s, ref);
        bool env_ok;
        if (ref < 1e-12) {
            env_ok = env.l2() < 1e-10;
        } else {
            env_ok = env.l2() >= ref / 3.0 && env.l2() <= 3.0 * ref;
        }
        res.verdicts.push_back({"envelope_" + std::string(name), env_ok,
                                "l2=" + fmt(env.l2()) + " ref=" + fmt(ref)});
    }
    return res;
}

inline ExperimentResult exp_uniqueness(const ExperimentConfig& cfg) {
    auto data = config_data(cfg);
    Immersion pert = data.im;
    for (int ix = 0; ix < pert.grid.n[0]; ++ix)
        for (int iy = 0; iy < pert.grid.n[1]; ++iy) {
            const std::size_t p = pert.grid.index(ix, iy);
            pert.u.at(p, pert.grid.dim) +=
                1e-4 * std::sin(2 * kPi * pert.grid.coord(0, ix) / pert.grid.len[0]);
        }
    FlowState a{data.im, data.frame};
    FlowState b{pert, pullback_frame(data.frame, data.im, pert)};

    auto rep = uniqueness_experiment(a, b, cfg.flow_t_end, cfg.flow_dt, 10);

    // lambda sup over the run for the proof-shaped Gronwall bound
    double lam_inf = max_lambda_linf(a);
    {
        FlowState st = a;
        const int steps = int(std::lround(cfg.flow_t_end / cfg.flow_dt));
        for (int i = 0; i < steps; ++i) {
            st = step_rk4(st, cfg.flow_dt);
            if (i % std::max(1, steps / 10) == 0)
                lam_inf = std::max(lam_inf, max_lambda_linf(st));
        }
    }

    Csv csv(cfg.output_dir, "uniqueness.csv");
    csv.header("t,d_L2,omega_L2,omega_H1,U_L2,C_fit");
    for (std::size_t i = 0; i < rep.t.size(); ++i)
        csv.row(rep.t[i], rep.d_l2[i], rep.omega_l2[i], rep.omega_h1[i], rep.u_l2[i],
                rep.c_fit);

    const double cbound = 2.0 * lam_inf * lam_inf * 1.5;
    ExperimentResult res;
    res.verdicts.push_back({"gronwall_constant", rep.c_fit <= cbound,
                            "C_fit=" + fmt(rep.c_fit) + " bound=" + fmt(cbound)});
    res.verdicts.push_back({"uniqueness_ratio", rep.pass,
                            "ratio=" + fmt(rep.ratio) + " bound=" + fmt(rep.bound)});
    return res;
}

inline ExperimentResult exp_scaling(const ExperimentConfig& cfg) {
    const int n = cfg.grid_n;
    const double mu = 2.0;
    const double dt = cfg.flow_dt;
    const int steps = int(std::lround(cfg.flow_t_end / dt));
    auto data = config_data(cfg);

    FlowState base{data.im, data.frame};
    for (int i = 0; i < steps; ++i) base = step_rk4(base, dt);

    const int ns = int(mu) * n;
    Immersion scaled(Grid(2, {ns, ns}, {cfg.grid_length, cfg.grid_length}));
    for (int c = 0; c < 4; ++c)
        for (int a = 0; a < 2; ++a) scaled.base_at(c, a) = data.im.base_at(c, a);
    {
        PointSampler u0(data.im.u);
        for (int ix = 0; ix < ns; ++ix)
            for (int iy = 0; iy < ns; ++iy) {
                double uv[4];
                u0.eval(mu * scaled.grid.coord(0, ix), mu * scaled.grid.coord(1, iy), uv);
                for (int c = 0; c < 4; ++c)
                    scaled.u.at(scaled.grid.index(ix, iy), c) = uv[c] / mu;
            }
        scaled.u = dealias(scaled.u);
    }
    FlowState small{scaled, exterior_frame(scaled)};
    for (int i = 0; i < steps; ++i) small = step_rk4(small, dt / (mu * mu));

    double worst = 0;
    for (int ix = 0; ix < ns; ++ix)
        for (int iy = 0; iy < ns; ++iy) {
            const std::size_t p = scaled.grid.index(ix, iy);
            const std::size_t q = data.im.grid.index(ix % n, iy % n);
            for (int c = 0; c < 4; ++c)
                worst = std::max(worst,
                                 std::abs(small.im.u.at(p, c) - base.im.u.at(q, c) / mu));
        }
    Csv csv(cfg.output_dir, "scaling.csv");
    csv.header("mu,t_end,linf_mismatch");
    csv.row(mu, cfg.flow_t_end, worst);
    ExperimentResult res;
    res.verdicts.push_back({"scaling_equivariance", worst < 1e-8, "linf=" + fmt(worst)});
    return res;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    set_workers_respecting_env(cfg.jobs);
    if (cfg.experiment == "circle_translation") return detail::exp_circle_translation(cfg);
    if (cfg.experiment == "clifford_ode") return detail::exp_clifford_ode(cfg);
    if (cfg.experiment == "volume_conservation") return detail::exp_volume_conservation(cfg);
    if (cfg.experiment == "residual_suite") return detail::exp_residual_suite(cfg);
    if (cfg.experiment == "euler_convergence") return detail::exp_euler_convergence(cfg);
    if (cfg.experiment == "willmore_smoothing") return detail::exp_willmore_smoothing(cfg);
    if (cfg.experiment == "coulomb_gauge") return detail::exp_coulomb_gauge(cfg);
    if (cfg.experiment == "norm_equivalence") return detail::exp_norm_equivalence(cfg);
    if (cfg.experiment == "uniqueness") return detail::exp_uniqueness(cfg);
    if (cfg.experiment == "scaling") return detail::exp_scaling(cfg);
    throw ValidationError("run_experiment: unknown experiment " + cfg.experiment);
}

// Executes the experiment, writes verdict.txt, returns a process exit status.
inline int run(const ExperimentConfig& cfg) {
    ExperimentResult result;
    try {
        result = run_experiment(cfg);
    } catch (const std::exception& e) {
        std::filesystem::create_directories(cfg.output_dir);
        std::ofstream v(cfg.output_dir + "/verdict.txt");
        v << "FAIL criterion=" << cfg.experiment << " error=" << e.what() << "\n";
        return 2;
    }
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream v(cfg.output_dir + "/verdict.txt");
    for (const auto& line : result.verdicts)
        v << (line.pass ? "PASS" : "FAIL") << " criterion=" << line.criterion << " "
          << line.detail << "\n";
    return result.all_pass() ? 0 : 1;
}

}  // namespace smcf
