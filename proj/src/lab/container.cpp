/*
 * Copyright 2026 The ma3srn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "lab/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "diffcore/errors.hpp"

namespace ma3srn {
namespace {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes) {
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::u32(std::uint32_t v) { put_le(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(bytes_, v); }
void ByteWriter::f32(float v) { put_le(bytes_, v); }
void ByteWriter::f64(double v) { put_le(bytes_, v); }

void ByteWriter::f32_from(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + 4 * values.size());
  for (double v : values) f32(static_cast<float>(v));
}

void ByteWriter::f64_from(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + 8 * values.size());
  for (double v : values) f64(v);
}

void ByteWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::raw(std::span<const std::uint8_t> bytes) { bytes_.insert(bytes_.end(), bytes.begin(), bytes.end()); }

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > remaining())
    throw FormatError(FormatError::Kind::truncated, "unexpected end of data at byte " + std::to_string(pos_));
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return get_le<std::uint64_t>(take(8)); }
float ByteReader::f32() { return get_le<float>(take(4)); }
double ByteReader::f64() { return get_le<double>(take(8)); }

void ByteReader::f32_into(std::span<double> out) {
  auto bytes = take(4 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_le<float>(bytes.subspan(4 * i, 4));
}

void ByteReader::f64_into(std::span<double> out) {
  auto bytes = take(8 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_le<double>(bytes.subspan(8 * i, 8));
}

std::string ByteReader::string() {
  const std::uint32_t n = u32();
  auto bytes = take(n);
  return {bytes.begin(), bytes.end()};
}

std::vector<std::uint8_t> seal(std::string_view magic, std::uint32_t version, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(magic.data()), magic.size()});
  w.u32(version);
  w.u64(payload.size());
  w.raw(payload);
  w.u32(crc32_of(payload));
  return w.bytes();
}

std::vector<std::uint8_t> unseal(std::span<const std::uint8_t> file, std::string_view magic, std::uint32_t version) {
  using Kind = FormatError::Kind;
  const std::size_t header = magic.size() + 4 + 8;
  if (file.size() < magic.size()) throw FormatError(Kind::truncated, "file shorter than its magic bytes");
  if (std::memcmp(file.data(), magic.data(), magic.size()) != 0)
    throw FormatError(Kind::bad_magic, "bad magic bytes, expected \"" + std::string(magic) + "\"");
  if (file.size() < header) throw FormatError(Kind::truncated, "file shorter than its header");
  ByteReader r(file.subspan(magic.size()));
  const std::uint32_t found = r.u32();
  if (found != version)
    throw FormatError(Kind::version_mismatch,
                      "format version " + std::to_string(found) + ", expected " + std::to_string(version));
  const std::uint64_t length = r.u64();
  if (file.size() - header < length || file.size() - header - length < 4)
    throw FormatError(Kind::truncated, "payload of " + std::to_string(length) + " bytes is truncated");
  if (file.size() - header - length != 4) throw FormatError(Kind::malformed, "trailing bytes after checksum");
  auto payload = file.subspan(header, length);
  const auto stored = get_le<std::uint32_t>(file.subspan(header + length, 4));
  if (stored != crc32_of(payload)) throw FormatError(Kind::checksum_mismatch, "payload checksum mismatch");
  return {payload.begin(), payload.end()};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "write failed for " + path);
}

}  // namespace ma3srn
