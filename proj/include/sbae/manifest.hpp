#pragma once

// Run manifests: one JSON document written atomically next to every
// produced artifact, recording the command, flags, seed, input digests and
// timestamps. Digests are 64-bit FNV-1a over the documented serialized
// forms.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sbae {

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

inline std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return fnv1a64_hex(os.str());
}

inline std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

inline void write_file_atomic(const std::string& path, std::string_view content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f || !f.write(content.data(), static_cast<std::streamsize>(content.size()))) {
            std::remove(tmp.c_str());
            throw std::runtime_error("cannot write file: " + path);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot finalize file: " + path);
    }
}

struct RunManifest {
    std::string command;
    nlohmann::json flags = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string corpus_digest;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> artifacts;

    nlohmann::json to_json() const {
        return nlohmann::json{{"command", command},
                              {"flags", flags},
                              {"seed", seed},
                              {"config_digest", config_digest},
                              {"corpus_digest", corpus_digest},
                              {"started_at", started_at},
                              {"finished_at", finished_at},
                              {"artifacts", artifacts}};
    }

    void write(const std::string& path) const {
        write_file_atomic(path, to_json().dump(2) + "\n");
    }
};

}  // namespace sbae
