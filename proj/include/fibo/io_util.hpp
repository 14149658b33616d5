#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace fibo::io {

// Little-endian primitives; file formats here are LE regardless of host.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
void write_bytes(std::ostream& os, const void* p, std::size_t n);

std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
void read_bytes(std::istream& is, void* p, std::size_t n);

// Writes via temp file + rename so readers never observe partial content.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& writer);
void atomic_write_text(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t file_hash(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace fibo::io
