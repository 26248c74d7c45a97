#include "xatk/binio.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace xatk {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

BinaryWriter::BinaryWriter(const std::string& path)
    : path_(path), tmp_path_(path + ".tmp") {
  out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
  if (!out_) {
    throw FormatError(FormatError::Kind::Io, "cannot open for write: " + tmp_path_);
  }
}

BinaryWriter::~BinaryWriter() {
  if (!committed_) {
    out_.close();
    std::remove(tmp_path_.c_str());
  }
}

void BinaryWriter::write_bytes(const void* data, std::size_t len) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void BinaryWriter::write_u32(std::uint32_t v) { write_bytes(&v, sizeof(v)); }
void BinaryWriter::write_u64(std::uint64_t v) { write_bytes(&v, sizeof(v)); }
void BinaryWriter::write_f64(double v) { write_bytes(&v, sizeof(v)); }

void BinaryWriter::write_f64_array(const std::vector<double>& v) {
  write_bytes(v.data(), v.size() * sizeof(double));
}

void BinaryWriter::write_string(const std::string& s) {
  write_u32(static_cast<std::uint32_t>(s.size()));
  write_bytes(s.data(), s.size());
}

void BinaryWriter::commit() {
  out_.flush();
  if (!out_) {
    throw FormatError(FormatError::Kind::Io, "write failed: " + tmp_path_);
  }
  out_.close();
  std::remove(path_.c_str());
  if (std::rename(tmp_path_.c_str(), path_.c_str()) != 0) {
    throw FormatError(FormatError::Kind::Io, "rename failed: " + path_);
  }
  committed_ = true;
}

BinaryReader::BinaryReader(const std::string& path) : path_(path) {
  in_.open(path, std::ios::binary);
  if (!in_) {
    throw FormatError(FormatError::Kind::Io, "cannot open for read: " + path);
  }
}

void BinaryReader::read_bytes(void* data, std::size_t len) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (static_cast<std::size_t>(in_.gcount()) != len) {
    throw FormatError(FormatError::Kind::Truncated,
                      path_ + ": truncated at byte offset " +
                          std::to_string(offset_ + in_.gcount()),
                      offset_ + static_cast<std::size_t>(in_.gcount()));
  }
  offset_ += len;
}

std::uint32_t BinaryReader::read_u32() {
  std::uint32_t v;
  read_bytes(&v, sizeof(v));
  return v;
}

std::uint64_t BinaryReader::read_u64() {
  std::uint64_t v;
  read_bytes(&v, sizeof(v));
  return v;
}

double BinaryReader::read_f64() {
  double v;
  read_bytes(&v, sizeof(v));
  return v;
}

std::vector<double> BinaryReader::read_f64_array(std::size_t n) {
  std::vector<double> v(n);
  read_bytes(v.data(), n * sizeof(double));
  return v;
}

std::string BinaryReader::read_string() {
  const std::uint32_t len = read_u32();
  std::string s(len, '\0');
  read_bytes(s.data(), len);
  return s;
}

bool BinaryReader::at_eof() { return in_.peek() == EOF; }

}  // namespace xatk
