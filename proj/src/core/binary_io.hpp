#pragma once

// Little-endian flat array files.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rw {

void write_u8(const std::filesystem::path& file, const std::vector<std::uint8_t>& data);
void write_f64(const std::filesystem::path& file, const std::vector<double>& data);
// Fail with ErrorCode::shape_mismatch when the file does not hold exactly
// `count` elements.
std::vector<std::uint8_t> read_u8(const std::filesystem::path& file, std::size_t count);
std::vector<double> read_f64(const std::filesystem::path& file, std::size_t count);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace rw
