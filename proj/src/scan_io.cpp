#include "lidarharm/scan_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lidarharm/binary_io.hpp"
#include "lidarharm/error.hpp"

namespace lidarharm {

namespace {

constexpr char kMagic[4] = {'L', 'H', 'S', '1'};
constexpr std::uint16_t kVersion = 1;

void check_intensity(float value, const std::string& where)
{
    if (!(value >= 0.0f && value <= 1.0f))
        throw FormatError(where + ": intensity outside [0,1]");
}

template <typename T>
bool parse_number(std::string_view token, T& out)
{
    // std::from_chars for floating point is available in libstdc++ 11.
    const auto* begin = token.data();
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
            ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
            ++j;
        if (j > i)
            out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

} // namespace

ScanFormat parse_scan_format(std::string_view name)
{
    if (name == "binary")
        return ScanFormat::binary;
    if (name == "ascii")
        return ScanFormat::ascii;
    throw DomainError("unknown scan format '" + std::string(name) + "'");
}

std::vector<char> encode_scan_binary(const Scan& scan)
{
    binary::Writer w;
    w.data().reserve(kScanHeaderBytes + kScanRecordBytes * scan.points.size());
    w.put_bytes(std::string_view(kMagic, 4));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint16_t>(scan.scan_id);
    w.put<std::uint64_t>(scan.points.size());
    for (const Point& p : scan.points) {
        w.put<double>(p.x);
        w.put<double>(p.y);
        w.put<double>(p.z);
        w.put<float>(p.intensity);
    }
    return std::move(w.data());
}

Scan decode_scan_binary(std::span<const char> bytes)
{
    binary::Reader r(bytes, "scan");
    if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != std::string_view(kMagic, 4))
        throw FormatError("bad magic at byte offset 0");
    r.get_bytes(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw FormatError("unsupported scan version " + std::to_string(version) + " at byte offset 4");
    Scan scan;
    scan.scan_id = r.get<std::uint16_t>();
    const auto count = r.get<std::uint64_t>();
    if (count > r.remaining() / kScanRecordBytes)
        throw FormatError("scan: truncated payload at byte offset " + std::to_string(r.offset()) + " (header declares " +
                          std::to_string(count) + " points)");
    scan.points.resize(count);
    for (auto& p : scan.points) {
        p.x = r.get<double>();
        p.y = r.get<double>();
        p.z = r.get<double>();
        const std::size_t at = r.offset();
        p.intensity = r.get<float>();
        check_intensity(p.intensity, "scan record field at byte offset " + std::to_string(at));
    }
    if (r.remaining() != 0)
        throw FormatError("scan: trailing bytes at byte offset " + std::to_string(r.offset()));
    return scan;
}

std::string encode_scan_ascii(const Scan& scan)
{
    std::string out = "# x y z intensity scan_id=" + std::to_string(scan.scan_id) + "\n";
    char line[160];
    for (const Point& p : scan.points) {
        const int n = std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.9g\n", p.x, p.y, p.z,
                                    static_cast<double>(p.intensity));
        out.append(line, static_cast<std::size_t>(n));
    }
    return out;
}

Scan decode_scan_ascii(std::string_view text)
{
    Scan scan;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        const auto where = "line " + std::to_string(line_no);
        const auto tokens = split_ws(line);
        if (tokens.empty())
            continue;
        if (!header_seen) {
            if (tokens[0] != "#")
                throw FormatError(where + ": missing '# x y z intensity scan_id=<n>' header");
            const auto& last = tokens.back();
            constexpr std::string_view key = "scan_id=";
            if (tokens.size() != 6 || last.substr(0, key.size()) != key)
                throw FormatError(where + ": malformed header");
            unsigned id = 0;
            if (!parse_number(last.substr(key.size()), id) || id > std::numeric_limits<std::uint16_t>::max())
                throw FormatError(where + ": bad scan_id");
            scan.scan_id = static_cast<std::uint16_t>(id);
            header_seen = true;
            continue;
        }
        if (tokens[0].front() == '#')
            continue;
        if (tokens.size() != 4)
            throw FormatError(where + ": expected 4 fields, got " + std::to_string(tokens.size()));
        Point p;
        double intensity = 0.0;
        if (!parse_number(tokens[0], p.x) || !parse_number(tokens[1], p.y) || !parse_number(tokens[2], p.z) ||
            !parse_number(tokens[3], intensity))
            throw FormatError(where + ": unparsable number");
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw FormatError(where + ": non-finite coordinate");
        p.intensity = static_cast<float>(intensity);
        check_intensity(p.intensity, where);
        scan.points.push_back(p);
    }
    if (!header_seen)
        throw FormatError("line 1: missing '# x y z intensity scan_id=<n>' header");
    return scan;
}

Scan read_scan(const std::string& path, ScanFormat format)
{
    const auto bytes = binary::read_file(path);
    try {
        if (format == ScanFormat::binary)
            return decode_scan_binary(bytes);
        return decode_scan_ascii(std::string_view(bytes.data(), bytes.size()));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_scan(const Scan& scan, const std::string& path, ScanFormat format)
{
    if (format == ScanFormat::binary) {
        binary::write_file(path, encode_scan_binary(scan));
    } else {
        const auto text = encode_scan_ascii(scan);
        binary::write_file(path, std::span<const char>(text.data(), text.size()));
    }
}

} // namespace lidarharm
