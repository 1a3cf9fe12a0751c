#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

// Small I/O utilities shared by every module: stable float formatting,
// FNV hashing for config fingerprints, atomic file writes, and the
// JSON-header + raw-float64-payload container used by checkpoints and
// latency models.

namespace pnas {

using json = nlohmann::json;

// Shortest round-trip decimal form (std::to_chars). Keeps CSV output
// byte-stable and loss-free.
std::string fmt_double(double v);

// FNV-1a over bytes; used to fingerprint canonical JSON dumps.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Write-to-temp + rename so readers never observe partial files.
void atomic_write_text(const std::string& path, const std::string& content);

// Container format: one JSON header line ('\n' terminated), then
// header["payload_count"] little-endian float64 values.
void write_blob(const std::string& path, json header, const std::vector<double>& payload);
// Returns header; payload copied into `payload`.
json read_blob(const std::string& path, std::vector<double>& payload);

std::string read_text(const std::string& path);

} // namespace pnas
