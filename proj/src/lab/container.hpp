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


#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ma3srn {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

/// Little-endian byte sink.
class ByteWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void f32_from(std::span<const double> values);  // each narrowed to float
  void f64_from(std::span<const double> values);
  void string(std::string_view s);  // u32 length + bytes
  void raw(std::span<const std::uint8_t> bytes);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Little-endian byte source; running past the end throws a truncation
/// FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  void f32_into(std::span<double> out);
  void f64_into(std::span<double> out);
  std::string string();

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Container: 4-byte magic, u32 version, u64 payload length, payload, u32
/// CRC-32 of the payload.
std::vector<std::uint8_t> seal(std::string_view magic, std::uint32_t version, std::span<const std::uint8_t> payload);

/// Checks the envelope and returns the payload. Throws FormatError with
/// bad_magic, version_mismatch, truncated or checksum_mismatch.
std::vector<std::uint8_t> unseal(std::span<const std::uint8_t> file, std::string_view magic, std::uint32_t version);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace ma3srn
