#include "patdet/spike_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "binary spike format assumes a little-endian host");

namespace patdet {

void write_spikes_csv(std::ostream& os, const std::vector<Spike>& spikes) {
    os << "afferent_index,time_ms\n";
    char buf[64];
    for (const Spike& s : spikes) {
        std::snprintf(buf, sizeof buf, "%u,%.17g\n", s.afferent, s.time_ms);
        os << buf;
    }
}

std::vector<Spike> read_spikes_csv(std::istream& is) {
    std::vector<Spike> spikes;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("spike CSV: missing header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        unsigned long afferent = 0;
        double t = 0.0;
        if (std::sscanf(line.c_str(), "%lu,%lg", &afferent, &t) != 2)
            throw std::runtime_error("spike CSV: malformed row: " + line);
        spikes.push_back({static_cast<std::uint32_t>(afferent), t});
    }
    return spikes;
}

void write_spikes_binary(std::ostream& os, const std::vector<Spike>& spikes) {
    for (const Spike& s : spikes) {
        os.write(reinterpret_cast<const char*>(&s.afferent), sizeof s.afferent);
        os.write(reinterpret_cast<const char*>(&s.time_ms), sizeof s.time_ms);
    }
}

std::vector<Spike> read_spikes_binary(std::istream& is) {
    std::vector<Spike> spikes;
    std::uint32_t afferent = 0;
    double t = 0.0;
    while (is.read(reinterpret_cast<char*>(&afferent), sizeof afferent)) {
        if (!is.read(reinterpret_cast<char*>(&t), sizeof t))
            throw std::runtime_error("binary spike file: truncated record");
        spikes.push_back({afferent, t});
    }
    return spikes;
}

namespace {

template <typename Fn>
void with_output_file(const std::string& path, Fn fn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    fn(os);
    if (!os) throw std::runtime_error("write failed: " + path);
}

template <typename Fn>
auto with_input_file(const std::string& path, Fn fn) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return fn(is);
}

} // namespace

void save_spikes_csv(const std::string& path, const std::vector<Spike>& spikes) {
    with_output_file(path, [&](std::ostream& os) { write_spikes_csv(os, spikes); });
}

void save_spikes_binary(const std::string& path, const std::vector<Spike>& spikes) {
    with_output_file(path, [&](std::ostream& os) { write_spikes_binary(os, spikes); });
}

std::vector<Spike> load_spikes_csv(const std::string& path) {
    return with_input_file(path, [](std::istream& is) { return read_spikes_csv(is); });
}

std::vector<Spike> load_spikes_binary(const std::string& path) {
    return with_input_file(path, [](std::istream& is) { return read_spikes_binary(is); });
}

} // namespace patdet
