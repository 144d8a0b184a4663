// Little-endian binary writer/reader for model checkpoints.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "replayforge/common.hpp"

namespace replayforge {

class BinaryWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        if (!v.empty()) raw(v.data(), v.size() * 8);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    const std::string& bytes() const { return buf_; }

private:
    void raw(const void* p, std::size_t n) {
        buf_.append(static_cast<const char*>(p), n);
    }
    std::string buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& bytes) : buf_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(buf_[need(1)]); }
    std::uint32_t u32() {
        std::uint32_t v;
        std::memcpy(&v, buf_.data() + need(4), 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        std::memcpy(&v, buf_.data() + need(8), 8);
        return v;
    }
    double f64() {
        double v;
        std::memcpy(&v, buf_.data() + need(8), 8);
        return v;
    }
    std::vector<double> f64s() {
        const std::uint64_t n = u64();
        std::vector<double> v(n);
        if (n) std::memcpy(v.data(), buf_.data() + need(n * 8), n * 8);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        return std::string(buf_.data() + need(n), n);
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    std::size_t need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw ParseError("checkpoint truncated");
        const std::size_t at = pos_;
        pos_ += n;
        return at;
    }
    const std::string& buf_;
    std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace replayforge
