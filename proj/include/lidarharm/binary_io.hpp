#pragma once

// Little-endian primitive encoding shared by the scan, dataset and
// checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "lidarharm/error.hpp"

namespace lidarharm::binary {

template <typename T>
T byteswap_if_big(T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &value, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&value, bytes, sizeof(T));
    }
    return value;
}

class Writer {
public:
    template <typename T>
    void put(T value)
    {
        value = byteswap_if_big(value);
        const auto* p = reinterpret_cast<const char*>(&value);
        buffer_.insert(buffer_.end(), p, p + sizeof(T));
    }

    void put_bytes(std::string_view bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

    const std::vector<char>& data() const { return buffer_; }
    std::vector<char>& data() { return buffer_; }
    std::size_t size() const { return buffer_.size(); }

private:
    std::vector<char> buffer_;
};

/// Bounds-checked cursor over a byte buffer. Every failure names the offset.
class Reader {
public:
    Reader(std::span<const char> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    template <typename T>
    T get()
    {
        require(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return byteswap_if_big(value);
    }

    std::string_view get_bytes(std::size_t n)
    {
        require(n);
        std::string_view out(bytes_.data() + pos_, n);
        pos_ += n;
        return out;
    }

    void require(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw FormatError(what_ + ": truncated payload at byte offset " + std::to_string(pos_) + " (need " +
                              std::to_string(n) + " more bytes, " + std::to_string(bytes_.size() - pos_) +
                              " available)");
    }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& what() const { return what_; }

private:
    std::span<const char> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<char> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const char> bytes);

/// 64-bit FNV-1a; used as a payload checksum.
std::uint64_t fnv1a64(std::span<const char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

} // namespace lidarharm::binary
