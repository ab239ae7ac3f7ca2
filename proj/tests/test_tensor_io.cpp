#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "posekit/rng.hpp"
#include "posekit/tensor_io.hpp"

using namespace posekit;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "posekit_io_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

Tensor random_tensor(std::vector<int> dims, uint64_t seed) {
    Rng rng(seed);
    Tensor t(std::move(dims));
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    return t;
}

} // namespace

TEST_CASE("tensor container round trip is bitwise") {
    const Tensor t = random_tensor({16, 16, 8}, 3);
    const auto path = (temp_dir() / "roundtrip.mlt").string();
    save_tensor(path, t);
    const Tensor back = load_tensor(path);
    REQUIRE(back.dims == t.dims);
    REQUIRE(std::memcmp(back.data.data(), t.data.data(), 4 * t.numel()) == 0);
}

TEST_CASE("truncated file is a distinct error") {
    const Tensor t = random_tensor({4, 4}, 5);
    std::string bytes = encode_tensor(t);
    bytes.resize(bytes.size() / 2);
    REQUIRE_THROWS_AS(decode_tensor(bytes, "trunc"), TruncatedFileError);
}

TEST_CASE("bad magic is a distinct error") {
    const Tensor t = random_tensor({4}, 6);
    std::string bytes = encode_tensor(t);
    bytes[0] = 'X';
    REQUIRE_THROWS_AS(decode_tensor(bytes, "magic"), BadMagicError);
}

TEST_CASE("payload corruption fails the checksum") {
    const Tensor t = random_tensor({8, 8}, 7);
    std::string bytes = encode_tensor(t);
    bytes[20] = static_cast<char>(bytes[20] ^ 0x40);
    REQUIRE_THROWS_AS(decode_tensor(bytes, "crc"), ChecksumError);
}

TEST_CASE("header dims inconsistent with payload size") {
    const Tensor t = random_tensor({4, 4}, 8);
    std::string bytes = encode_tensor(t);
    // grow a dim; payload is now too small for the header
    bytes[8] = 5;
    REQUIRE_THROWS(decode_tensor(bytes, "dims"));
    REQUIRE_THROWS_AS(decode_tensor(bytes, "dims"), IoError);
}

TEST_CASE("crc32 reference value") {
    // standard check vector for the IEEE polynomial
    REQUIRE(crc32_of("123456789", 9) == 0xCBF43926u);
}
