#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace siren::util {

// Little-endian IEEE-754 float32 payloads, base64 (RFC 4648, padded).
std::string encode_f32_base64(std::span<const float> values);
std::vector<float> decode_f32_base64(std::string_view text);  // throws DataError

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);  // throws DataError if unreadable

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never see a
// partial artifact.
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Binary helpers for checkpoint / codebook files (little-endian on disk).
void append_u32(std::string& out, std::uint32_t v);
void append_u64(std::string& out, std::uint64_t v);
void append_f32(std::string& out, float v);
void append_f64(std::string& out, double v);

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string_view take(std::size_t n);
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace siren::util
