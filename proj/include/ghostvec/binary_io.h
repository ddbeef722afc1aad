// Copyright (c) 2026 The GhostVec Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GHOSTVEC_BINARY_IO_H_
#define GHOSTVEC_BINARY_IO_H_

#include <cstdint>
#include <cstring>
#include <string>

#include "ghostvec/common.h"

namespace ghostvec {

// Little-endian checkpoint serialization helpers.
class BinaryWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void i32(int32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf_ += s;
  }
  void matrix(const Matrix& m) {
    u32(static_cast<uint32_t>(m.rows()));
    u32(static_cast<uint32_t>(m.cols()));
    raw(m.data(), static_cast<size_t>(m.size()) * sizeof(double));
  }
  void magic(const char* m) { buf_.append(m, 8); }
  const std::string& data() const { return buf_; }

 private:
  void raw(const void* p, size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class BinaryReader {
 public:
  BinaryReader(std::string data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}
  uint8_t u8() { return static_cast<uint8_t>(take(1)[0]); }
  uint32_t u32() { return pod<uint32_t>(); }
  int32_t i32() { return pod<int32_t>(); }
  uint64_t u64() { return pod<uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const uint32_t n = u32();
    return std::string(take(n), n);
  }
  Matrix matrix() {
    const uint32_t r = u32(), c = u32();
    Matrix m(r, c);
    const size_t n = static_cast<size_t>(r) * c * sizeof(double);
    std::memcpy(m.data(), take(n), n);
    return m;
  }
  void expect_magic(const char* m) {
    if (std::memcmp(take(8), m, 8) != 0) throw FormatError(source_ + ": bad magic");
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(size_t n) {
    if (pos_ + n > data_.size()) throw FormatError(source_ + ": truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string data_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace ghostvec

#endif  // GHOSTVEC_BINARY_IO_H_
