#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "ladr/types.hpp"

namespace ladr::io {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
    std::string bytes;
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    if (size > 0) {
        bytes.resize(static_cast<std::size_t>(size));
        in.read(bytes.data(), size);
    }
    if (!in && size > 0) throw Error(Errc::io_error, "failed reading " + path.string());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot create " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "failed writing " + path.string());
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
T byteswap(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

/// Appends little-endian encodings to a byte string.
class Writer {
public:
    void bytes(std::string_view raw) { out_.append(raw); }

    template <typename T>
    void put(T value) {
        if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
        out_.append(reinterpret_cast<const char*>(&value), sizeof(T));
    }

    template <typename T>
    void put_array(std::span<const T> values) {
        if constexpr (std::endian::native == std::endian::little) {
            out_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
        } else {
            for (T v : values) put(v);
        }
    }

    std::string& str() { return out_; }

private:
    std::string out_;
};

/// Bounds-checked little-endian cursor; running off the end is a TruncationError.
class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
        return value;
    }

    template <typename T>
    void get_array(std::span<T> out) {
        need(out.size_bytes());
        std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
        if constexpr (std::endian::native == std::endian::big) {
            for (auto& v : out) v = byteswap(v);
        }
    }

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw Error(Errc::truncation_error, "need " + std::to_string(n) + " bytes at offset " +
                                                    std::to_string(pos_) + ", have " +
                                                    std::to_string(data_.size() - pos_));
        }
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

/// Checks an 8-byte magic. Files shorter than the magic are a format error too.
inline void expect_magic(Reader& in, std::string_view magic, const std::string& what) {
    if (in.remaining() < magic.size() || in.bytes(magic.size()) != magic) {
        throw Error(Errc::format_error, what + ": bad magic, expected " + std::string(magic));
    }
}

}  // namespace ladr::io
