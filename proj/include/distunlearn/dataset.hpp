#pragma once

// Labeled datasets with p1/p2 group tags, over dense or sparse feature storage.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace distunlearn {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// P1 is the distribution to forget, P2 the one to preserve.
enum class Group : std::uint8_t { P1, P2 };

inline const char* to_string(Group g) { return g == Group::P1 ? "p1" : "p2"; }

template <class Matrix>
struct BasicDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<Group> groups;
  std::vector<std::string> row_ids;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }

  /// Throws if the column vectors disagree in length, labels fall outside
  /// [0, num_classes), or the dataset is empty.
  void validate() const {
    const auto n = static_cast<std::size_t>(features.rows());
    if (n == 0) throw std::invalid_argument("dataset: no rows");
    if (labels.size() != n || groups.size() != n || row_ids.size() != n) {
      throw std::invalid_argument("dataset: column lengths disagree with feature rows");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) {
        throw std::invalid_argument("dataset: label out of range at row " + row_ids[i]);
      }
    }
  }

  /// Row indices (into this dataset) of the given group, in dataset order.
  std::vector<std::size_t> rows_of(Group g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i] == g) out.push_back(i);
    }
    return out;
  }

  std::size_t count(Group g) const {
    return static_cast<std::size_t>(std::count(groups.begin(), groups.end(), g));
  }
};

using DenseDataset = BasicDataset<DenseMatrix>;
using SparseDataset = BasicDataset<SparseMatrix>;

inline DenseMatrix select_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

inline SparseMatrix select_rows(const SparseMatrix& m, std::span<const std::size_t> rows) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(rows[i])); it; ++it) {
      triplets.emplace_back(static_cast<int>(i), static_cast<int>(it.col()), it.value());
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

template <class Matrix>
BasicDataset<Matrix> subset(const BasicDataset<Matrix>& ds, std::span<const std::size_t> rows) {
  for (std::size_t r : rows) {
    if (r >= ds.size()) throw std::out_of_range("subset: row index out of range");
  }
  BasicDataset<Matrix> out;
  out.features = select_rows(ds.features, rows);
  out.num_classes = ds.num_classes;
  out.labels.reserve(rows.size());
  out.groups.reserve(rows.size());
  out.row_ids.reserve(rows.size());
  for (std::size_t r : rows) {
    out.labels.push_back(ds.labels[r]);
    out.groups.push_back(ds.groups[r]);
    out.row_ids.push_back(ds.row_ids[r]);
  }
  return out;
}

/// Rows of one group as a standalone feature matrix.
template <class Matrix>
Matrix group_features(const BasicDataset<Matrix>& ds, Group g) {
  const auto rows = ds.rows_of(g);
  return select_rows(ds.features, rows);
}

}  // namespace distunlearn
