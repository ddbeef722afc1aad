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

#include "ghostvec/matrix_io.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ghostvec {

static_assert(std::endian::native == std::endian::little,
              "matrix files are little-endian; big-endian hosts unsupported");

void write_matrix(std::ostream& os, const Matrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  std::vector<float> buf(static_cast<size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      buf[r * m.cols() + c] = static_cast<float>(m(r, c));
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!os) throw FormatError("write_matrix: stream failure");
}

Matrix read_matrix(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw FormatError("read_matrix: missing header");
  std::istringstream hs(header);
  long long rows = -1, cols = -1;
  std::string extra;
  if (!(hs >> rows >> cols) || (hs >> extra) || rows < 0 || cols < 0)
    throw FormatError("read_matrix: bad header '" + header + "'");
  std::vector<float> buf(static_cast<size_t>(rows * cols));
  is.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (static_cast<size_t>(is.gcount()) != buf.size() * sizeof(float))
    throw FormatError("read_matrix: truncated payload");
  Matrix m(rows, cols);
  for (long long r = 0; r < rows; ++r)
    for (long long c = 0; c < cols; ++c) m(r, c) = buf[r * cols + c];
  return m;
}

void save_matrix(const std::string& path, const Matrix& m) {
  std::ostringstream os(std::ios::binary);
  write_matrix(os, m);
  write_file_atomic(path, os.str());
}

Matrix load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DanglingReferenceError("cannot open matrix file: " + path);
  return read_matrix(is);
}

Matrix quantize_f32(const Matrix& m) {
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + tmp.string());
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw InputError("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DanglingReferenceError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace ghostvec
