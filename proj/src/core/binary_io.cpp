#include "binary_io.hpp"

#include "error.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

namespace rw {

namespace fs = std::filesystem;

namespace {

std::uint64_t to_le(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
    return out;
}

void write_bytes(const fs::path& file, const void* data, std::size_t n)
{
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot open " + file.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) fail(ErrorCode::io, "failed writing " + file.string());
}

std::vector<char> read_bytes(const fs::path& file, std::size_t expected)
{
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) fail(ErrorCode::io, "cannot open " + file.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected)
        fail(ErrorCode::shape_mismatch, file.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                                            std::to_string(size));
    std::vector<char> buf(size);
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(size));
    if (!in) fail(ErrorCode::io, "failed reading " + file.string());
    return buf;
}

}  // namespace

void write_u8(const fs::path& file, const std::vector<std::uint8_t>& data)
{
    write_bytes(file, data.data(), data.size());
}

void write_f64(const fs::path& file, const std::vector<double>& data)
{
    std::vector<std::uint64_t> raw(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) raw[i] = to_le(std::bit_cast<std::uint64_t>(data[i]));
    write_bytes(file, raw.data(), raw.size() * sizeof(std::uint64_t));
}

std::vector<std::uint8_t> read_u8(const fs::path& file, std::size_t count)
{
    const auto buf = read_bytes(file, count);
    return {buf.begin(), buf.end()};
}

std::vector<double> read_f64(const fs::path& file, std::size_t count)
{
    const auto buf = read_bytes(file, count * sizeof(double));
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t raw = 0;
        std::memcpy(&raw, buf.data() + i * 8, 8);
        out[i] = std::bit_cast<double>(to_le(raw));
    }
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) fail(ErrorCode::internal, "format_double failed");
    return std::string(buf, ptr);
}

}  // namespace rw
