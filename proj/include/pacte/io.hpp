#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pacte::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place, so readers never
// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  std::string hex_digest();

 private:
  void* ctx_;
};

// Little-endian primitives used by the binary formats.
void put_u8(std::string& out, std::uint8_t v);
void put_u16(std::string& out, std::uint16_t v);
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string encode_f64_array(std::span<const double> values);
std::vector<double> decode_f64_array(std::string_view bytes);

// Reads a list file: a JSON array of strings, or one entry per line
// (blank lines and lines starting with '#' skipped).
std::vector<std::string> read_list_file(const std::filesystem::path& path);

// Reads a key/value file: a JSON object of string values, or one
// whitespace-separated "key value" pair per line.
std::vector<std::pair<std::string, std::string>> read_map_file(
    const std::filesystem::path& path);

}  // namespace pacte::io
