// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace icdbert::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Append-only byte buffer for little-endian serialisation.
class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        put_bytes(s);
    }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

/// Bounds-checked cursor over a byte buffer; every getter returns false on a short read.
class ByteReader {
public:
    ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}

    template <typename T>
    bool get(T& value) {
        if (size_ - pos_ < sizeof(T)) return false;
        std::memcpy(&value, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return true;
    }
    bool get_bytes(std::size_t n, std::string& out) {
        if (size_ - pos_ < n) return false;
        out.assign(data_ + pos_, n);
        pos_ += n;
        return true;
    }
    bool get_string(std::string& out) {
        std::uint32_t n = 0;
        return get(n) && get_bytes(n, out);
    }
    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

private:
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

}  // namespace icdbert::detail
