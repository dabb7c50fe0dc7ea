#pragma once

#include "nkdb/tabular.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nkdb {

/// Dense contingency table over (feature value, [second feature value,] label).
class JointCounts {
public:
    /// Counts of (X_i, y).
    static JointCounts pair(const Dataset& data, std::size_t feature);
    /// Counts of (X_i, X_j, y).
    static JointCounts triple(const Dataset& data, std::size_t i, std::size_t j);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t total() const { return total_; }
    std::uint64_t at(std::size_t a, std::size_t y) const { return cells_[a * shape_[1] + y]; }
    std::uint64_t at(std::size_t a, std::size_t b, std::size_t y) const {
        return cells_[(a * shape_[1] + b) * shape_[2] + y];
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<std::uint64_t> cells_;
    std::size_t total_ = 0;
};

/// Empirical MI(X_i; y) in nats, clamped at zero.
double mutual_information(const Dataset& data, std::size_t feature);

/// Empirical MI(X_i; X_j | y) in nats, clamped at zero. Symmetric in (i, j).
double conditional_mutual_information(const Dataset& data, std::size_t i, std::size_t j);

/// MI(X_i; y) for every feature.
std::vector<double> mutual_information_vector(const Dataset& data);

/// Symmetric m x m matrix of CMI values, zero diagonal, row-major.
struct CmiMatrix {
    std::size_t size = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

CmiMatrix conditional_mutual_information_matrix(const Dataset& data);

}  // namespace nkdb
