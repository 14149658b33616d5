#include "fibo/io_util.hpp"

#include <unistd.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fibo/common.hpp"

namespace fibo::io {

namespace {

void put_le(std::ostream& os, std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, bytes);
}

std::uint64_t get_le(std::istream& is, int bytes) {
    unsigned char buf[8] = {0};
    is.read(reinterpret_cast<char*>(buf), bytes);
    if (!is) fail("read: unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v, 4); }
void write_u64(std::ostream& os, std::uint64_t v) { put_le(os, v, 8); }
void write_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v), 8); }
void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

std::uint32_t read_u32(std::istream& is) { return static_cast<std::uint32_t>(get_le(is, 4)); }
std::uint64_t read_u64(std::istream& is) { return get_le(is, 8); }
double read_f64(std::istream& is) { return std::bit_cast<double>(get_le(is, 8)); }
void read_bytes(std::istream& is, void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) fail("read: unexpected end of file");
}

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& writer) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        require(os.good(), "cannot open for writing: " + tmp);
        writer(os);
        os.flush();
        require(os.good(), "write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        fail("rename failed for " + path + ": " + ec.message());
    }
}

void atomic_write_text(const std::string& path, const std::string& content) {
    atomic_write(path, [&](std::ostream& os) { os.write(content.data(), static_cast<std::streamsize>(content.size())); });
}

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "cannot open: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t file_hash(const std::string& path) {
    const std::string bytes = read_text(path);
    return fnv1a64(bytes.data(), bytes.size());
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace fibo::io
