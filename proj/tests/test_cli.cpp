#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "smcf/experiments.hpp"

using namespace smcf;

TEST_CASE("config parsing: defaults, comments, dotted keys") {
    auto cfg = parse_config("experiment = circle_translation\n"
                            "# a comment\n"
                            "grid.dim = 1   # trailing comment\n"
                            "grid.n = 128\n"
                            "flow.dt = 5e-4\n");
    CHECK(cfg.experiment == "circle_translation");
    CHECK(cfg.grid_dim == 1);
    CHECK(cfg.grid_n == 128);
    CHECK(cfg.flow_dt == 5e-4);
    CHECK(cfg.norms_s == 2.5);  // documented default
}

TEST_CASE("config errors: missing experiment, duplicates, unknown keys, all-at-once") {
    CHECK_THROWS_AS(parse_config(""), ValidationError);

    try {
        parse_config("experiment = circle_translation\nflow.dt = 1\nflow.dt = 2\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("line 2") != std::string::npos);
    }

    // validation collects every violation, not only the first
    try {
        parse_config("experiment = nope\ngrid.n = 48\nflow.dt = -1\nnot.a.key = 3\n");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("experiment") != std::string::npos);
        CHECK(msg.find("grid.n") != std::string::npos);
        CHECK(msg.find("flow.dt") != std::string::npos);
        CHECK(msg.find("not.a.key") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_config("experiment = circle_translation\nbad line without equals\n"),
                    ParseError);
}

TEST_CASE("stability-violating dt is refused at validation time") {
    auto cfg = parse_config("experiment = circle_translation\n"
                            "grid.dim = 1\n"
                            "grid.n = 256\n"
                            "initial_data.name = circle\n"
                            "flow.dt = 1e-3\n"
                            "flow.cfl_safety = 1.0\n"
                            "flow.t_end = 0.002\n");
    CHECK_THROWS_AS(run_experiment(cfg), ValidationError);
    // the shipped circle config sets the documented override
    cfg.allow_dt_override = true;
    CHECK_NOTHROW(run_experiment(cfg));
}

TEST_CASE("generators are deterministic for a fixed seed") {
    GeneratorParams prm;
    prm.seed = 7;
    auto a = generate_initial_data("graph_random", Grid::square(32), prm);
    auto b = generate_initial_data("graph_random", Grid::square(32), prm);
    REQUIRE(a.im.u.v.size() == b.im.u.v.size());
    for (std::size_t i = 0; i < a.im.u.v.size(); ++i) CHECK(a.im.u.v[i] == b.im.u.v[i]);
    for (std::size_t i = 0; i < a.frame.nu1.v.size(); ++i)
        CHECK(a.frame.nu1.v[i] == b.frame.nu1.v[i]);

    prm.seed = 8;
    auto c = generate_initial_data("graph_random", Grid::square(32), prm);
    CHECK(linf_norm(c.im.u - a.im.u) > 1e-6);

    CHECK_THROWS_AS(generate_initial_data("moebius", Grid::square(32), prm), UnknownGenerator);
}

TEST_CASE("runner writes verdicts and is byte-deterministic across worker counts") {
    auto cfg = parse_config("experiment = volume_conservation\n"
                            "grid.dim = 2\n"
                            "grid.n = 32\n"
                            "initial_data.name = graph_bump\n"
                            "initial_data.amplitude = 0.08\n"
                            "initial_data.kmax = 6\n"
                            "flow.dt = 2e-3\n"
                            "flow.t_end = 0.01\n"
                            "output_dir = out/test_runner_a\n");
    cfg.jobs = 1;
    CHECK(run(cfg) == 0);
    auto cfg2 = cfg;
    cfg2.output_dir = "out/test_runner_b";
    cfg2.jobs = 4;
    CHECK(run(cfg2) == 0);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const auto csv_a = slurp("out/test_runner_a/volume_conservation.csv");
    const auto csv_b = slurp("out/test_runner_b/volume_conservation.csv");
    REQUIRE(!csv_a.empty());
    CHECK(csv_a == csv_b);
    CHECK(slurp("out/test_runner_a/verdict.txt").rfind("PASS", 0) == 0);

    std::filesystem::remove_all("out/test_runner_a");
    std::filesystem::remove_all("out/test_runner_b");
}

TEST_CASE("snapshot emission and reload through the experiment path") {
    auto cfg = parse_config("experiment = circle_translation\n"
                            "grid.dim = 1\n"
                            "grid.n = 64\n"
                            "initial_data.name = circle\n"
                            "flow.dt = 1e-4\n"
                            "flow.t_end = 0.001\n"
                            "emit_snapshots_every = 5\n"
                            "output_dir = out/test_snap\n");
    (void)run(cfg);
    auto snap = read_snapshot("out/test_snap/circle_0.snap");
    CHECK(snap.field.grid.dim == 1);
    CHECK(snap.field.comps == 3);
    std::filesystem::remove_all("out/test_snap");
}
