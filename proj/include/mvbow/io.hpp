#ifndef MVBOW_IO_HPP
#define MVBOW_IO_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "mvbow/error.hpp"

// Binary container helpers shared by all on-disk formats. All multi-byte
// values are little-endian; we write raw host representations and require
// a little-endian target.

static_assert(sizeof(float) == 4 && sizeof(double) == 8, "IEEE-754 layout required");

namespace mvbow {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot open for writing: " + path);
  }

  void magic(const char tag[4]) { out_.write(tag, 4); check(); }

  template <typename T>
  void scalar(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    check();
  }

  template <typename T>
  void array(const T* data, std::size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
    check();
  }

  // u32 length followed by raw bytes.
  void string(const std::string& s) {
    scalar<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    check();
  }

  void close() {
    out_.close();
    if (!out_) throw DataError("write failed: " + path_);
  }

 private:
  void check() {
    if (!out_) throw DataError("write failed: " + path_);
  }

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open for reading: " + path);
  }

  // Throws FormatError when the leading 4 bytes differ from `tag`.
  void magic(const char tag[4]) {
    char got[4] = {0, 0, 0, 0};
    in_.read(got, 4);
    if (in_.gcount() != 4 || std::string(got, 4) != std::string(tag, 4))
      throw FormatError("bad magic in " + path_ + " (expected " + std::string(tag, 4) + ")");
  }

  void expect_version(std::uint32_t want) {
    const auto got = scalar<std::uint32_t>();
    if (got != want)
      throw FormatError("unsupported version " + std::to_string(got) + " in " + path_);
  }

  template <typename T>
  T scalar() {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T)))
      throw CorruptionError("truncated file: " + path_);
    return v;
  }

  template <typename T>
  void array(T* data, std::size_t count) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto bytes = static_cast<std::streamsize>(count * sizeof(T));
    in_.read(reinterpret_cast<char*>(data), bytes);
    if (in_.gcount() != bytes) throw CorruptionError("truncated payload in " + path_);
  }

  std::string string() {
    const auto len = scalar<std::uint32_t>();
    std::string s(len, '\0');
    if (len > 0) {
      in_.read(s.data(), len);
      if (in_.gcount() != static_cast<std::streamsize>(len))
        throw CorruptionError("truncated string in " + path_);
    }
    return s;
  }

  // Declared payload consumed; anything left over means the size header lied.
  void expect_eof() {
    char extra;
    in_.read(&extra, 1);
    if (in_.gcount() != 0) throw CorruptionError("trailing bytes in " + path_);
  }

 private:
  std::string path_;
  std::ifstream in_;
};

// Reads a whole file as bytes; used by byte-identity tests and checksums.
std::vector<char> read_file_bytes(const std::string& path);

}  // namespace mvbow

#endif  // MVBOW_IO_HPP
