#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "dvm/algos.hpp"
#include "dvm/common.hpp"
#include "dvm/config.hpp"
#include "dvm/env.hpp"

namespace dvm {

// Flat binary parameter container.
//
//   magic "DVM1"
//   u32   entry count
//   entry: u32 name length, name bytes,
//          u32 ndim, ndim x u64 dims,
//          prod(dims) x f64 data
//
// All integers and floats little-endian. Network tensors are stored as
// "agent<i>/<net>/w<k>" and ".../b<k>"; run metadata rides along as 1-element
// "meta/..." entries.

struct SnapshotEntry {
    std::vector<uint64_t> dims;
    std::vector<double> data;
};

using Snapshot = std::map<std::string, SnapshotEntry>;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_le<uint64_t>(out, bits);
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw IoError("truncated snapshot");
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline double read_f64(std::istream& in) {
    uint64_t bits = read_le<uint64_t>(in);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace detail

inline void write_snapshot(const Snapshot& snap, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open snapshot for writing: " + path);
    out.write("DVM1", 4);
    detail::write_le<uint32_t>(out, static_cast<uint32_t>(snap.size()));
    for (const auto& [name, e] : snap) {
        detail::write_le<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le<uint32_t>(out, static_cast<uint32_t>(e.dims.size()));
        uint64_t total = 1;
        for (uint64_t d : e.dims) {
            detail::write_le<uint64_t>(out, d);
            total *= d;
        }
        if (total != e.data.size()) throw ShapeError("snapshot entry dims/data mismatch: " + name);
        for (double v : e.data) detail::write_f64(out, v);
    }
    if (!out) throw IoError("snapshot write failed: " + path);
}

inline Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DVM1", 4) != 0) throw IoError("bad snapshot magic");
    uint32_t count = detail::read_le<uint32_t>(in);
    Snapshot snap;
    for (uint32_t k = 0; k < count; ++k) {
        uint32_t len = detail::read_le<uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) throw IoError("truncated snapshot");
        uint32_t ndim = detail::read_le<uint32_t>(in);
        SnapshotEntry e;
        uint64_t total = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            e.dims.push_back(detail::read_le<uint64_t>(in));
            total *= e.dims.back();
        }
        e.data.resize(total);
        for (uint64_t i = 0; i < total; ++i) e.data[i] = detail::read_f64(in);
        snap.emplace(std::move(name), std::move(e));
    }
    return snap;
}

// ---------------------------------------------------------------------------
// Bundles <-> snapshot
// ---------------------------------------------------------------------------

inline void pack_net(Snapshot& snap, const std::string& prefix, const ParamStore& net) {
    for (size_t k = 0; k < net.layers.size(); ++k) {
        const DenseLayer& l = net.layers[k];
        SnapshotEntry w;
        w.dims = {l.w.rows, l.w.cols};
        w.data = l.w.data;
        snap[prefix + "/w" + std::to_string(k)] = std::move(w);
        SnapshotEntry b;
        b.dims = {l.b.size()};
        b.data = l.b;
        snap[prefix + "/b" + std::to_string(k)] = std::move(b);
    }
}

inline ParamStore unpack_net(const Snapshot& snap, const std::string& prefix) {
    ParamStore net;
    for (size_t k = 0;; ++k) {
        auto w = snap.find(prefix + "/w" + std::to_string(k));
        auto b = snap.find(prefix + "/b" + std::to_string(k));
        if (w == snap.end() || b == snap.end()) break;
        if (w->second.dims.size() != 2 || b->second.dims.size() != 1)
            throw IoError("bad tensor rank in snapshot: " + prefix);
        DenseLayer l;
        l.w = Matrix(w->second.dims[0], w->second.dims[1]);
        l.w.data = w->second.data;
        l.b = b->second.data;
        net.layers.push_back(std::move(l));
    }
    if (net.layers.empty()) throw IoError("missing network in snapshot: " + prefix);
    return net;
}

inline void put_meta(Snapshot& snap, const std::string& key, double v) {
    snap["meta/" + key] = SnapshotEntry{{1}, {v}};
}

inline double get_meta(const Snapshot& snap, const std::string& key) {
    auto it = snap.find("meta/" + key);
    if (it == snap.end()) throw IoError("missing snapshot metadata: " + key);
    return it->second.data.at(0);
}

struct LoadedRun {
    Domain domain = Domain::spread2;
    Algo algo = Algo::maddpg_discrete;
    Phase phase = Phase::one;
    int episode_length = 25;
    std::vector<AgentBundle> bundles;
};

inline Snapshot snapshot_bundles(const std::vector<AgentBundle>& bundles, Domain domain, Algo algo,
                                 Phase phase, int episode_length) {
    Snapshot snap;
    put_meta(snap, "domain", static_cast<double>(domain));
    put_meta(snap, "algo", static_cast<double>(algo));
    put_meta(snap, "phase", static_cast<double>(phase));
    put_meta(snap, "episode_length", static_cast<double>(episode_length));
    put_meta(snap, "n_agents", static_cast<double>(bundles.size()));
    for (size_t i = 0; i < bundles.size(); ++i) {
        std::string a = "agent" + std::to_string(i);
        pack_net(snap, a + "/actor", bundles[i].actor);
        pack_net(snap, a + "/critic", bundles[i].critic);
        if (algo == Algo::maddpg_discrete) {
            pack_net(snap, a + "/target_actor", bundles[i].target_actor);
            pack_net(snap, a + "/target_critic", bundles[i].target_critic);
        } else {
            pack_net(snap, a + "/value", bundles[i].value);
            pack_net(snap, a + "/target_value", bundles[i].target_value);
        }
    }
    return snap;
}

inline LoadedRun load_bundles(const std::string& path) {
    Snapshot snap = read_snapshot(path);
    LoadedRun run;
    run.domain = static_cast<Domain>(static_cast<int>(get_meta(snap, "domain")));
    run.algo = static_cast<Algo>(static_cast<int>(get_meta(snap, "algo")));
    run.phase = static_cast<Phase>(static_cast<int>(get_meta(snap, "phase")));
    run.episode_length = static_cast<int>(get_meta(snap, "episode_length"));
    int n = static_cast<int>(get_meta(snap, "n_agents"));
    for (int i = 0; i < n; ++i) {
        std::string a = "agent" + std::to_string(i);
        AgentBundle b;
        b.actor = unpack_net(snap, a + "/actor");
        b.critic = unpack_net(snap, a + "/critic");
        if (run.algo == Algo::maddpg_discrete) {
            b.target_actor = unpack_net(snap, a + "/target_actor");
            b.target_critic = unpack_net(snap, a + "/target_critic");
        } else {
            b.value = unpack_net(snap, a + "/value");
            b.target_value = unpack_net(snap, a + "/target_value");
        }
        run.bundles.push_back(std::move(b));
    }
    return run;
}

}  // namespace dvm
