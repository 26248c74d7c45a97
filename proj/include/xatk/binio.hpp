#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "xatk/errors.hpp"

namespace xatk {

// Little-endian binary writer with atomic-rename semantics: the payload
// goes to `path + ".tmp"` and is renamed into place on commit().
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  ~BinaryWriter();

  void write_bytes(const void* data, std::size_t len);
  void write_u32(std::uint32_t v);
  void write_u64(std::uint64_t v);
  void write_f64(double v);
  void write_f64_array(const std::vector<double>& v);
  void write_string(const std::string& s);  // u32 length + bytes

  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

// Little-endian binary reader that reports truncation with the byte
// offset at which the read failed.
class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  void read_bytes(void* data, std::size_t len);
  std::uint32_t read_u32();
  std::uint64_t read_u64();
  double read_f64();
  std::vector<double> read_f64_array(std::size_t n);
  std::string read_string();

  std::size_t offset() const { return offset_; }
  bool at_eof();

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace xatk
