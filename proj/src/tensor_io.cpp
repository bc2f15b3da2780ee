#include "specbnp/tensor_io.hpp"

#include "specbnp/error.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace specbnp {
namespace {

std::vector<std::size_t> parse_header(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::size_t> dims;
  long long d = 0;
  while (ss >> d) {
    if (d <= 0) throw InputError("non-positive dimension in header: " + line);
    dims.push_back(static_cast<std::size_t>(d));
  }
  if (!ss.eof()) throw InputError("malformed header: " + line);
  return dims;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot read " + path.string());
  return f;
}

}  // namespace

void write_matrix(std::ostream& out, const Matrix& m) {
  write_tensor(out, DenseTensor::from_matrix(m));
}

Matrix read_matrix(std::istream& in) {
  DenseTensor t = read_tensor(in);
  if (t.order() != 2) throw InputError("expected a matrix file (2 header dimensions)");
  return t.to_matrix();
}

void write_tensor(std::ostream& out, const DenseTensor& t) {
  const auto& dims = t.dims();
  for (std::size_t m = 0; m < dims.size(); ++m) out << (m ? " " : "") << dims[m];
  out << '\n';
  const std::size_t fiber = dims.empty() ? 1 : dims.back();
  auto data = t.data();
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data[i] << ((i + 1) % fiber == 0 ? '\n' : ' ');
  }
}

DenseTensor read_tensor(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty tensor file");
  auto dims = parse_header(line);
  if (dims.empty()) throw InputError("tensor header has no dimensions");
  DenseTensor t(dims);
  auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(in >> data[i]))
      throw InputError("tensor file ends after " + std::to_string(i) + " of " + std::to_string(data.size()) +
                       " values");
  }
  return t;
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  auto f = open_out(path);
  write_matrix(f, m);
}

Matrix load_matrix(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_matrix(f);
}

void save_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  auto f = open_out(path);
  write_tensor(f, t);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_tensor(f);
}

}  // namespace specbnp
