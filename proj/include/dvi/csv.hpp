#pragma once

#include <string>
#include <vector>

#include "dvi/tensor.hpp"

namespace dvi {

// Load a rectangular numeric CSV. A single non-numeric first row is treated
// as a header and skipped. Throws Error on ragged rows (with line number) or
// non-numeric cells (with row/column).
Tensor load_csv(const std::string& path);

// Write an [N x d] tensor as CSV with full round-trip precision ("%.17g").
void write_csv(const std::string& path, const Tensor& t);

// Single-column integer labels, used by dataset tooling and tests.
std::vector<int> load_labels(const std::string& path);

}  // namespace dvi
