#pragma once

// Snapshot files: one ASCII header line
//   SMCF1 d=<d> N=<N1,..> L=<L1,..> c=<c> t=<time>
// followed by little-endian binary64 samples, row-major axis order,
// component-fastest. Immersion snapshots store the periodic displacement.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "smcf/grid.hpp"

namespace smcf {

static_assert(std::endian::native == std::endian::little,
              "snapshot writer assumes a little-endian host");

inline void write_snapshot(const std::string& path, const RField& f, double t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_snapshot: cannot open " + path);
    char head[256];
    const Grid& g = f.grid;
    if (g.dim == 1)
        std::snprintf(head, sizeof head, "SMCF1 d=1 N=%d L=%.17g c=%d t=%.17g\n",
                      g.n[0], g.len[0], f.comps, t);
    else
        std::snprintf(head, sizeof head, "SMCF1 d=2 N=%d,%d L=%.17g,%.17g c=%d t=%.17g\n",
                      g.n[0], g.n[1], g.len[0], g.len[1], f.comps, t);
    out << head;
    out.write(reinterpret_cast<const char*>(f.v.data()),
              std::streamsize(f.v.size() * sizeof(double)));
}

struct SnapshotData {
    RField field;
    double time = 0;
};

inline SnapshotData read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_snapshot: cannot open " + path);
    std::string header;
    std::getline(in, header);
    int d = 0, c = 0;
    std::array<int, 2> n = {0, 1};
    std::array<double, 2> len = {0, 1};
    double t = 0;
    auto grab = [&](const char* key) -> std::string {
        const auto pos = header.find(key);
        if (pos == std::string::npos) throw ParseError("snapshot header: missing " + std::string(key));
        const auto start = pos + std::strlen(key);
        auto end = header.find(' ', start);
        if (end == std::string::npos) end = header.size();
        return header.substr(start, end - start);
    };
    if (header.rfind("SMCF1 ", 0) != 0) throw ParseError("snapshot header: bad magic");
    d = std::stoi(grab("d="));
    {
        std::stringstream ss(grab("N="));
        std::string tok;
        for (int a = 0; a < d; ++a) { std::getline(ss, tok, ','); n[a] = std::stoi(tok); }
    }
    {
        std::stringstream ss(grab("L="));
        std::string tok;
        for (int a = 0; a < d; ++a) { std::getline(ss, tok, ','); len[a] = std::stod(tok); }
    }
    c = std::stoi(grab("c="));
    t = std::stod(grab("t="));
    Grid g(d, n, len);
    SnapshotData snap{RField(g, c), t};
    in.read(reinterpret_cast<char*>(snap.field.v.data()),
            std::streamsize(snap.field.v.size() * sizeof(double)));
    if (!in) throw ParseError("snapshot payload truncated: " + path);
    return snap;
}

}  // namespace smcf
