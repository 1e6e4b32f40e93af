#include "siren/util/encoding.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "siren/errors.hpp"

namespace siren::util {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

std::string encode_f32_base64(std::span<const float> values) {
    const auto* raw = reinterpret_cast<const unsigned char*>(values.data());
    const std::size_t n = values.size_bytes();
    std::string out(4 * ((n + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), raw, static_cast<int>(n));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

std::vector<float> decode_f32_base64(std::string_view text) {
    if (text.size() % 4 != 0) throw DataError("base64 payload length is not a multiple of 4");
    std::string buf(3 * text.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(buf.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw DataError("invalid base64 payload");
    // EVP_DecodeBlock keeps padding bytes in its output length.
    std::size_t len = static_cast<std::size_t>(n);
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    if (len % sizeof(float) != 0) throw DataError("base64 payload is not a whole number of float32 values");
    std::vector<float> out(len / sizeof(float));
    std::memcpy(out.data(), buf.data(), len);
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {
template <typename T>
void append_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}
}  // namespace

void append_u32(std::string& out, std::uint32_t v) { append_raw(out, v); }
void append_u64(std::string& out, std::uint64_t v) { append_raw(out, v); }
void append_f32(std::string& out, float v) { append_raw(out, v); }
void append_f64(std::string& out, double v) { append_raw(out, v); }

std::string_view ByteReader::take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw DataError(what_ + ": truncated file");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
}

namespace {
template <typename T>
T read_raw(ByteReader& r) {
    T v;
    std::memcpy(&v, r.take(sizeof(T)).data(), sizeof(T));
    return v;
}
}  // namespace

std::uint32_t ByteReader::u32() { return read_raw<std::uint32_t>(*this); }
std::uint64_t ByteReader::u64() { return read_raw<std::uint64_t>(*this); }
float ByteReader::f32() { return read_raw<float>(*this); }
double ByteReader::f64() { return read_raw<double>(*this); }

}  // namespace siren::util
