#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lidarharm/pointcloud.hpp"

namespace lidarharm {

enum class ScanFormat { binary, ascii };

/// "binary" | "ascii"; anything else throws DomainError.
ScanFormat parse_scan_format(std::string_view name);

/// Binary layout (little-endian): "LHS1", u16 version = 1, u16 scan_id,
/// u64 count, then count x (f64 x, f64 y, f64 z, f32 intensity).
inline constexpr std::size_t kScanHeaderBytes = 16;
inline constexpr std::size_t kScanRecordBytes = 28;

std::vector<char> encode_scan_binary(const Scan& scan);
Scan decode_scan_binary(std::span<const char> bytes);

std::string encode_scan_ascii(const Scan& scan);
Scan decode_scan_ascii(std::string_view text);

Scan read_scan(const std::string& path, ScanFormat format = ScanFormat::binary);
void write_scan(const Scan& scan, const std::string& path, ScanFormat format = ScanFormat::binary);

} // namespace lidarharm
