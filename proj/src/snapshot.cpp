#include "cloudlab/snapshot.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "snapshot payload is little-endian; byte swapping not implemented");

namespace cloudlab {

namespace {

std::string fmt_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_triple(const double* p)
{
    return fmt_double(p[0]) + "," + fmt_double(p[1]) + "," + fmt_double(p[2]);
}

} // namespace

void save_snapshot(const std::string& path, const Snapshot& snap)
{
    if (snap.components.empty())
        throw std::invalid_argument("save_snapshot: no components");
    if (snap.names.size() != snap.components.size())
        throw std::invalid_argument("save_snapshot: names/components size mismatch");
    const long n = snap.grid.ncell_ext();
    for (const auto& c : snap.components)
        if ((long)c.size() != n)
            throw std::invalid_argument("save_snapshot: component size does not match grid");

    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("save_snapshot: cannot open " + path);

    std::ostringstream head;
    head << "cloudlab-snapshot v1"
         << " dims=" << snap.grid.dims[0] << "," << snap.grid.dims[1] << "," << snap.grid.dims[2]
         << " spacing=" << fmt_triple(snap.grid.spacing.data())
         << " origin=" << fmt_triple(snap.grid.origin.data()) << " ghost=" << snap.grid.ghost
         << " components=" << snap.components.size() << " time=" << fmt_double(snap.time)
         << " names=";
    for (size_t i = 0; i < snap.names.size(); ++i)
        head << (i ? "," : "") << snap.names[i];
    head << "\n";
    f << head.str();

    for (const auto& c : snap.components)
        f.write(reinterpret_cast<const char*>(c.data()), (std::streamsize)c.size() * 8);
    if (!f)
        throw std::runtime_error("save_snapshot: write failed for " + path);
}

Snapshot load_snapshot(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("load_snapshot: cannot open " + path);

    std::string header;
    if (!std::getline(f, header))
        throw std::runtime_error("load_snapshot: missing header in " + path);

    std::istringstream hs(header);
    std::string magic, ver;
    hs >> magic >> ver;
    if (magic != "cloudlab-snapshot" || ver != "v1")
        throw std::runtime_error("load_snapshot: bad magic in " + path);

    Index3 dims{};
    Vec3 spacing{}, origin{};
    int ghost = 0;
    long ncomp = 0;
    double time = 0.0;
    std::string names_csv;

    std::string tok;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("load_snapshot: malformed header token " + tok);
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        auto parse3d = [&](Vec3& out) {
            if (std::sscanf(val.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3)
                throw std::runtime_error("load_snapshot: bad triple " + tok);
        };
        if (key == "dims") {
            if (std::sscanf(val.c_str(), "%d,%d,%d", &dims[0], &dims[1], &dims[2]) != 3)
                throw std::runtime_error("load_snapshot: bad dims");
        } else if (key == "spacing")
            parse3d(spacing);
        else if (key == "origin")
            parse3d(origin);
        else if (key == "ghost")
            ghost = std::stoi(val);
        else if (key == "components")
            ncomp = std::stol(val);
        else if (key == "time")
            time = std::strtod(val.c_str(), nullptr);
        else if (key == "names")
            names_csv = val;
        else
            throw std::runtime_error("load_snapshot: unknown header key " + key);
    }

    Snapshot snap;
    snap.grid = CartesianGrid(dims, spacing, origin, ghost);
    snap.time = time;

    std::istringstream ns(names_csv);
    std::string name;
    while (std::getline(ns, name, ','))
        snap.names.push_back(name);
    if ((long)snap.names.size() != ncomp)
        throw std::runtime_error("load_snapshot: component/name count mismatch");

    const long n = snap.grid.ncell_ext();
    snap.components.assign(ncomp, std::vector<double>(n));
    for (auto& c : snap.components) {
        f.read(reinterpret_cast<char*>(c.data()), (std::streamsize)n * 8);
        if (f.gcount() != (std::streamsize)n * 8)
            throw std::runtime_error("load_snapshot: truncated payload in " + path);
    }
    return snap;
}

} // namespace cloudlab
