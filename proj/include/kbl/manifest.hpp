#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbl/config.hpp"

namespace kbl {

/**
 * Self-describing record of one CLI invocation. Written into the output
 * directory before any computation starts, so a crashed or interrupted
 * run still documents what was attempted, and the manifest plus the
 * config snapshot suffice to reproduce the outputs byte-for-byte.
 */
struct RunManifest {
    std::string command;            // subcommand name
    std::string config_snapshot;    // canonical key = value serialization
    std::uint64_t seed = 0;         // effective seed after any override
    std::uint64_t content_hash = 0; // chained fnv1a over command/config/seed/inputs
    std::string outdir;

    std::string serialize() const {
        std::ostringstream out;
        out << "command = " << command << "\n";
        out << "seed = " << seed << "\n";
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx", (unsigned long long)content_hash);
        out << "content_hash = " << hex << "\n";
        out << "outdir = " << outdir << "\n";
        out << "[config]\n" << config_snapshot;
        return out.str();
    }
};

/// Builds the manifest, hashing the command, the canonical config
/// snapshot, the effective seed, and the raw bytes of each input file.
inline RunManifest make_manifest(const std::string& command, const Config& config,
                                 std::uint64_t seed, const std::string& outdir,
                                 const std::vector<std::string>& input_paths = {}) {
    RunManifest m;
    m.command = command;
    m.config_snapshot = config.serialize();
    m.seed = seed;
    m.outdir = outdir;
    std::uint64_t h = fnv1a(command);
    h = fnv1a(m.config_snapshot, h);
    h = fnv1a(std::to_string(seed), h);
    for (const std::string& p : input_paths) {
        std::ifstream f(p, std::ios::binary);
        if (!f) throw ConfigError("manifest: cannot read input file: " + p);
        std::ostringstream ss;
        ss << f.rdbuf();
        h = fnv1a(p, h);
        h = fnv1a(ss.str(), h);
    }
    m.content_hash = h;
    return m;
}

/// Creates the output directory and writes manifest.txt plus
/// config.snapshot. Call before any computation.
inline void write_manifest(const RunManifest& m) {
    std::filesystem::create_directories(m.outdir);
    {
        std::ofstream f(std::filesystem::path(m.outdir) / "manifest.txt", std::ios::binary);
        if (!f) throw std::runtime_error("manifest: cannot write to " + m.outdir);
        f << m.serialize();
    }
    {
        std::ofstream f(std::filesystem::path(m.outdir) / "config.snapshot",
                        std::ios::binary);
        if (!f) throw std::runtime_error("manifest: cannot write to " + m.outdir);
        f << m.config_snapshot;
    }
}

}  // namespace kbl
