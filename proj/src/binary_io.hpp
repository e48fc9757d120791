#pragma once

// Little-endian primitive readers/writers shared by the checkpoint and dataset formats.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "aecnn/checkpoint.hpp"

namespace aecnn {

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64s(const std::vector<double>& v) { bytes(v.data(), v.size() * sizeof(double)); }
    void str32(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint64_t position() const { return pos_; }

    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got != n) throw FormatError(std::string("truncated file while reading ") + what, pos_ + got);
        pos_ += n;
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        bytes(&v, 1, what);
        return v;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        bytes(&v, 4, what);
        return v;
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        bytes(&v, 8, what);
        return v;
    }
    std::vector<double> f64s(std::uint64_t n, const char* what) {
        if (n > (std::uint64_t{1} << 34)) throw FormatError(std::string("implausible length for ") + what, pos_);
        // Grow in chunks so a corrupted length fails on truncation rather than on allocation.
        constexpr std::uint64_t kChunk = 1 << 20;
        std::vector<double> v;
        for (std::uint64_t done = 0; done < n;) {
            const std::uint64_t take = std::min(kChunk, n - done);
            v.resize(done + take);
            bytes(v.data() + done, take * sizeof(double), what);
            done += take;
        }
        return v;
    }
    std::string str32(const char* what) {
        const std::uint32_t n = u32(what);
        if (n > (1u << 20)) throw FormatError(std::string("implausible length for ") + what, pos_);
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after end of data", pos_);
    }

private:
    std::istream& in_;
    std::uint64_t pos_ = 0;
};

}  // namespace aecnn
