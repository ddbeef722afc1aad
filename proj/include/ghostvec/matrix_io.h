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

#ifndef GHOSTVEC_MATRIX_IO_H_
#define GHOSTVEC_MATRIX_IO_H_

#include <iosfwd>
#include <string>

#include "ghostvec/common.h"

namespace ghostvec {

// On-disk matrix format used for features, embeddings and mel spectrograms:
//
//   <rows> <cols>\n            ASCII header, single space, newline
//   rows*cols float32 values   little-endian, row-major
//
// Values are stored as float32; reading widens them back to double.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

// Atomic (temp + rename) file variants.
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

// Rounds every entry through float32, i.e. what a save/load cycle yields.
Matrix quantize_f32(const Matrix& m);

// Writes `contents` to `path` via a sibling temp file and rename(2).
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace ghostvec

#endif  // GHOSTVEC_MATRIX_IO_H_
