#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "patdet/spikes.hpp"

namespace patdet {

// Two interchangeable on-disk forms for spike lists. CSV prints times with 17
// significant digits, the binary form stores raw little-endian u32 + f64
// records; both reproduce the exact doubles on read-back.

void write_spikes_csv(std::ostream& os, const std::vector<Spike>& spikes);
std::vector<Spike> read_spikes_csv(std::istream& is);

void write_spikes_binary(std::ostream& os, const std::vector<Spike>& spikes);
std::vector<Spike> read_spikes_binary(std::istream& is);

void save_spikes_csv(const std::string& path, const std::vector<Spike>& spikes);
void save_spikes_binary(const std::string& path, const std::vector<Spike>& spikes);
std::vector<Spike> load_spikes_csv(const std::string& path);
std::vector<Spike> load_spikes_binary(const std::string& path);

} // namespace patdet
