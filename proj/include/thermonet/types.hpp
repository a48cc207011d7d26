#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <span>
#include <vector>

namespace thermonet {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Mode-1 matricization of a third-order tensor given by its frontal slices:
/// [S_1, S_2, ..., S_m], an n x (n*m) matrix.
inline SparseMatrix mode1_matricization(std::span<const SparseMatrix> slices) {
  if (slices.empty()) return {};
  const Index rows = slices.front().rows();
  const Index cols = slices.front().cols();
  std::vector<Triplet> entries;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto& s = slices[k];
    for (Index outer = 0; outer < s.outerSize(); ++outer)
      for (SparseMatrix::InnerIterator it(s, outer); it; ++it)
        entries.emplace_back(it.row(), static_cast<Index>(k) * cols + it.col(), it.value());
  }
  SparseMatrix out(rows, cols * static_cast<Index>(slices.size()));
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

/// Dense counterpart of mode1_matricization.
inline Matrix mode1_matricization(std::span<const Matrix> slices) {
  if (slices.empty()) return {};
  const Index rows = slices.front().rows();
  const Index cols = slices.front().cols();
  Matrix out(rows, cols * static_cast<Index>(slices.size()));
  for (std::size_t k = 0; k < slices.size(); ++k)
    out.middleCols(static_cast<Index>(k) * cols, cols) = slices[k];
  return out;
}

/// Kronecker product of two column vectors.
inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Returns true if the sparse matrix has no structurally or numerically nonzero entry.
inline bool is_zero(const SparseMatrix& m) {
  for (Index outer = 0; outer < m.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(m, outer); it; ++it)
      if (it.value() != 0.0) return false;
  return true;
}

}  // namespace thermonet
