#pragma once

// Plain-text matrix and tensor files.
//
// Matrix: a "rows cols" header line, then `rows` lines of space-separated values.
// Tensor: a header line with every dimension, then the row-major data with one line per
// trailing-mode fiber. An order-2 tensor file is therefore a matrix file.
// Values are written with 17 significant digits so doubles round-trip exactly.

#include "specbnp/tensor.hpp"

#include <filesystem>
#include <iosfwd>

namespace specbnp {

void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);
void save_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);

void write_tensor(std::ostream& out, const DenseTensor& t);
DenseTensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor load_tensor(const std::filesystem::path& path);

}  // namespace specbnp
