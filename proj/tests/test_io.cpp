#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pnas/errors.hpp"
#include "pnas/io.hpp"
#include "pnas/rng.hpp"

using namespace pnas;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
} // namespace

TEST_CASE("fmt_double emits shortest round-trip form") {
    CHECK(fmt_double(0.0) == "0");
    CHECK(fmt_double(1.0) == "1");
    CHECK(fmt_double(0.1) == "0.1");
    CHECK(fmt_double(-2.5) == "-2.5");
    CHECK(fmt_double(1e100) == "1e+100");
    // round-trip exactness on awkward values
    for (double v : {1.0 / 3.0, 0.30000000000000004, 3404.668928, 6.1e-17}) {
        CHECK(std::stod(fmt_double(v)) == v);
    }
}

TEST_CASE("fmt_double round-trips arbitrary doubles") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = (uniform_real(rng) - 0.5) * std::pow(10.0, (i % 61) - 30);
        CHECK(std::stod(fmt_double(v)) == v);
    }
}

TEST_CASE("fnv1a64 matches reference vectors") {
    // standard FNV-1a test vectors
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
    CHECK(hex64(0xcbf29ce484222325ull) == "cbf29ce484222325");
    CHECK(hex64(0x1ull) == "0000000000000001");
}

TEST_CASE("atomic_write_text replaces content and leaves no temp files") {
    const std::string path = tmp_path("pnas_io_atomic.txt");
    atomic_write_text(path, "first\n");
    atomic_write_text(path, "second\n");
    CHECK(read_text(path) == "second\n");
    int siblings = 0;
    for (const auto& e : std::filesystem::directory_iterator(
             std::filesystem::path(path).parent_path())) {
        const std::string n = e.path().filename().string();
        if (n.find("pnas_io_atomic.txt") == 0 && n != "pnas_io_atomic.txt") ++siblings;
    }
    CHECK(siblings == 0);
    std::filesystem::remove(path);
}

TEST_CASE("blob container round-trips header and payload exactly") {
    const std::string path = tmp_path("pnas_io_blob.bin");
    json header{{"format", "test"}, {"note", "exact"}};
    std::vector<double> payload;
    Rng rng(42);
    for (int i = 0; i < 257; ++i) payload.push_back(gaussian(rng) * 1e3);
    payload.push_back(0.1);
    payload.push_back(-0.0);
    write_blob(path, header, payload);

    std::vector<double> back;
    const json h2 = read_blob(path, back);
    CHECK(h2.at("format") == "test");
    CHECK(h2.at("payload_count").get<std::size_t>() == payload.size());
    REQUIRE(back.size() == payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        // bitwise equality, not just value equality
        CHECK(std::memcmp(&back[i], &payload[i], sizeof(double)) == 0);
    }
    std::filesystem::remove(path);
}

TEST_CASE("read_blob rejects truncated payloads") {
    const std::string path = tmp_path("pnas_io_trunc.bin");
    write_blob(path, json{{"k", 1}}, std::vector<double>(16, 1.5));
    // chop off the last 8 bytes
    const std::string full = read_text(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(full.data(), static_cast<std::streamsize>(full.size() - 8));
    out.close();
    std::vector<double> payload;
    CHECK_THROWS_AS(read_blob(path, payload), IoError);
    std::filesystem::remove(path);
}

TEST_CASE("read_text reports missing files") {
    CHECK_THROWS_AS(read_text(tmp_path("pnas_io_nope_missing.txt")), IoError);
}

TEST_CASE("seed mixing separates streams") {
    CHECK(mix_seed(0, 0) != mix_seed(0, 1));
    CHECK(mix_seed(0, 1) != mix_seed(1, 0));
    CHECK(mix_seed(123, 7) == mix_seed(123, 7));
}

TEST_CASE("uniform_real stays in [0,1) and gaussian is roughly standard") {
    Rng rng(99);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = uniform_real(rng);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double g = gaussian(rng);
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}
