#pragma once

// Little-endian byte packing shared by the feature and bundle formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heat/error.hpp"

namespace heat::detail {

class ByteWriter {
public:
    void put_u8(std::uint8_t v) { bytes_.push_back(v); }
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
    void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    void put_tag(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

    std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    std::size_t offset() const noexcept { return pos_; }

    std::uint8_t get_u8() { return take(1)[0]; }
    std::uint32_t get_u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t get_u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
    float get_f32() { return std::bit_cast<float>(get_u32()); }
    double get_f64() { return std::bit_cast<double>(get_u64()); }
    std::span<const std::uint8_t> get_bytes(std::size_t n) { return take(n); }
    bool peek_tag(std::string_view tag) const {
        return remaining() >= tag.size() && std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) == 0;
    }

private:
    std::span<const std::uint8_t> take(std::size_t n) {
        if (remaining() < n)
            fail(ErrorCode::ParseError, "unexpected end of data at offset " + std::to_string(pos_) + " (needed " +
                                            std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left)");
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace heat::detail
