// smcf: configuration-driven SMCF experiment runner.
//
//   smcf run <config> [--jobs N]
//   smcf sweep <config> --param <key> --values v1,v2,... [--jobs N]
//   smcf inspect <snapshot>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "smcf/experiments.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw smcf::Error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cmd_run(const std::string& path, int jobs) {
    auto cfg = smcf::parse_config(slurp(path));
    if (jobs > 0) cfg.jobs = jobs;
    const int status = smcf::run(cfg);
    std::ifstream v(cfg.output_dir + "/verdict.txt");
    std::cout << v.rdbuf();
    return status;
}

int cmd_sweep(const std::string& path, const std::string& param, const std::string& values,
              int jobs) {
    const std::string base = slurp(path);
    std::stringstream vs(values);
    std::string val;
    int worst = 0, idx = 0;
    while (std::getline(vs, val, ',')) {
        std::string text = base;
        // later duplicate keys are rejected by the parser, so rewrite in place
        std::istringstream in(base);
        std::ostringstream out;
        std::string line;
        bool replaced = false;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            std::string key = eq == std::string::npos ? "" : line.substr(0, eq);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            if (key == param) {
                out << param << " = " << val << "\n";
                replaced = true;
            } else {
                out << line << "\n";
            }
        }
        if (!replaced) out << param << " = " << val << "\n";
        auto cfg = smcf::parse_config(out.str());
        if (jobs > 0) cfg.jobs = jobs;
        cfg.output_dir += "/sweep_" + std::to_string(idx++);
        std::cout << "== " << param << " = " << val << " -> " << cfg.output_dir << "\n";
        const int status = smcf::run(cfg);
        std::ifstream v(cfg.output_dir + "/verdict.txt");
        std::cout << v.rdbuf();
        worst = std::max(worst, status);
    }
    return worst;
}

int cmd_inspect(const std::string& path) {
    auto snap = smcf::read_snapshot(path);
    const smcf::Grid& g = snap.field.grid;
    std::cout << "snapshot " << path << "\n";
    std::cout << "  d=" << g.dim << " N=" << g.n[0];
    if (g.dim == 2) std::cout << "," << g.n[1];
    std::cout << " L=" << g.len[0];
    if (g.dim == 2) std::cout << "," << g.len[1];
    std::cout << " c=" << snap.field.comps << " t=" << snap.time << "\n";
    std::cout << "  L2   = " << smcf::l2_norm(snap.field) << "\n";
    std::cout << "  Linf = " << smcf::linf_norm(snap.field) << "\n";
    for (double s : {1.0, 2.0})
        std::cout << "  H" << int(s) << "   = " << smcf::extrinsic_sobolev(snap.field, s)
                  << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"skew mean curvature flow laboratory"};
    app.require_subcommand(1);

    std::string config_path, snapshot_path, param, values;
    int jobs = 0;

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("config", config_path)->required();
    run->add_option("--jobs", jobs, "worker cap (SMCF_THREADS overrides)");

    auto* sweep = app.add_subcommand("sweep", "re-run an experiment over parameter values");
    sweep->add_option("config", config_path)->required();
    sweep->add_option("--param", param)->required();
    sweep->add_option("--values", values)->required();
    sweep->add_option("--jobs", jobs);

    auto* inspect = app.add_subcommand("inspect", "print snapshot header and norm summary");
    inspect->add_option("snapshot", snapshot_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, jobs);
        if (sweep->parsed()) return cmd_sweep(config_path, param, values, jobs);
        if (inspect->parsed()) return cmd_inspect(snapshot_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
