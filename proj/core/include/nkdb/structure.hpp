#pragma once

#include "nkdb/infotheory.hpp"
#include "nkdb/tabular.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nkdb {

/// Feature dependency DAG. Every feature additionally depends on the label.
struct DependenceStructure {
    std::vector<std::size_t> order;                 // visitation order; parents precede children
    std::vector<std::vector<std::size_t>> parents;  // indexed by feature, sorted ascending
    std::size_t k = 0;                              // maximum parent count

    std::size_t num_features() const { return parents.size(); }
    std::size_t num_edges() const;

    /// Checks the acyclicity witness and canonical form; throws std::invalid_argument on violation.
    void validate() const;

    /// "child <- p1,p2" per feature, in visitation order, using the given names.
    std::string to_text(std::span<const std::string> names) const;

    friend bool operator==(const DependenceStructure&, const DependenceStructure&) = default;
};

/// k-dependence structure: features in descending MI(X_i; y), each taking
/// the top-min(k, visited) previously visited features by CMI as parents.
/// Ties go to the smaller feature index.
DependenceStructure build_kdb_structure(const Dataset& data, std::size_t k);
DependenceStructure build_kdb_structure(std::span<const double> mi, const CmiMatrix& cmi, std::size_t k);

/// Tree-augmented structure: maximum-weight spanning tree over CMI edge
/// weights, rooted at the feature with the largest MI(X_i; y).
DependenceStructure build_tan_structure(const Dataset& data);
DependenceStructure build_tan_structure(std::span<const double> mi, const CmiMatrix& cmi);

/// No feature-feature edges.
DependenceStructure build_empty_structure(std::size_t num_features);

}  // namespace nkdb
