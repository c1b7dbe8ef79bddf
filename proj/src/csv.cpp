#include "dvi/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dvi {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

}  // namespace

Tensor load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_csv: cannot open " + path);

  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t lineno = 0;
  std::string line;
  bool first_data_row = true;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);

    if (first_data_row) {
      // header auto-detection: a non-numeric first row is skipped
      double v;
      bool numeric = true;
      for (const auto& c : cells)
        if (!parse_double(c, v)) {
          numeric = false;
          break;
        }
      if (!numeric && lineno == 1) continue;
      first_data_row = false;
      cols = cells.size();
    }

    if (cells.size() != cols)
      throw Error("load_csv: ragged row at line " + std::to_string(lineno) +
                  " (" + std::to_string(cells.size()) + " cells, expected " +
                  std::to_string(cols) + ")");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!parse_double(cells[c], v))
        throw Error("load_csv: non-numeric cell at line " +
                    std::to_string(lineno) + ", column " + std::to_string(c + 1));
      data.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw Error("load_csv: no data rows in " + path);
  return Tensor({rows, cols}, std::move(data));
}

void write_csv(const std::string& path, const Tensor& t) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("write_csv: cannot open " + path);
  const std::size_t rows = t.rows(), cols = t.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c)
      std::fprintf(f, c ? ",%.17g" : "%.17g", t.at(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

std::vector<int> load_labels(const std::string& path) {
  Tensor t = load_csv(path);
  if (t.cols() != 1) throw Error("load_labels: expected a single column");
  std::vector<int> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    out[i] = static_cast<int>(t[i]);
  return out;
}

}  // namespace dvi
