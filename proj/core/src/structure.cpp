#include "nkdb/structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nkdb {

std::size_t DependenceStructure::num_edges() const {
    std::size_t n = 0;
    for (const auto& p : parents) n += p.size();
    return n;
}

void DependenceStructure::validate() const {
    const std::size_t m = parents.size();
    if (order.size() != m) throw std::invalid_argument("structure: order is not a permutation of the features");
    std::vector<std::size_t> position(m, m);
    for (std::size_t pos = 0; pos < m; ++pos) {
        const auto f = order[pos];
        if (f >= m || position[f] != m) throw std::invalid_argument("structure: order is not a permutation of the features");
        position[f] = pos;
    }
    for (std::size_t f = 0; f < m; ++f) {
        const auto& ps = parents[f];
        if (ps.size() > k) throw std::invalid_argument("structure: parent count exceeds k");
        if (!std::is_sorted(ps.begin(), ps.end()) || std::adjacent_find(ps.begin(), ps.end()) != ps.end())
            throw std::invalid_argument("structure: parent list not in canonical form");
        for (auto p : ps)
            if (p >= m || position[p] >= position[f]) throw std::invalid_argument("structure: parent does not precede child");
    }
}

std::string DependenceStructure::to_text(std::span<const std::string> names) const {
    std::string out;
    for (auto f : order) {
        out += names[f];
        out += " <-";
        for (std::size_t i = 0; i < parents[f].size(); ++i) {
            out += i == 0 ? " " : ",";
            out += names[parents[f][i]];
        }
        out += '\n';
    }
    return out;
}

namespace {

// Scores are ranked on a 1e-12 grid, so values that differ only by
// summation order count as ties.
double key(double v) { return std::round(v * 1e12); }

}  // namespace

DependenceStructure build_kdb_structure(std::span<const double> mi, const CmiMatrix& cmi, std::size_t k) {
    const std::size_t m = mi.size();
    if (cmi.size != m) throw std::invalid_argument("kdb structure: MI/CMI size mismatch");
    DependenceStructure s;
    s.k = k;
    s.parents.resize(m);
    s.order.resize(m);
    std::iota(s.order.begin(), s.order.end(), 0);
    std::stable_sort(s.order.begin(), s.order.end(), [&](std::size_t a, std::size_t b) { return key(mi[a]) > key(mi[b]); });

    std::vector<std::size_t> candidates;
    for (std::size_t pos = 0; pos < m; ++pos) {
        const auto child = s.order[pos];
        // Previously visited features, ranked by CMI with the child, smaller index first on ties.
        candidates.assign(s.order.begin(), s.order.begin() + static_cast<std::ptrdiff_t>(pos));
        std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
            const double wa = key(cmi(child, a));
            const double wb = key(cmi(child, b));
            return wa != wb ? wa > wb : a < b;
        });
        const std::size_t take = std::min(k, candidates.size());
        s.parents[child].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(s.parents[child].begin(), s.parents[child].end());
    }
    return s;
}

DependenceStructure build_kdb_structure(const Dataset& data, std::size_t k) {
    if (data.num_rows() == 0) throw std::invalid_argument("kdb structure: empty dataset");
    const auto mi = mutual_information_vector(data);
    if (k == 0) return build_kdb_structure(mi, CmiMatrix{mi.size(), std::vector<double>(mi.size() * mi.size(), 0.0)}, 0);
    return build_kdb_structure(mi, conditional_mutual_information_matrix(data), k);
}

DependenceStructure build_tan_structure(std::span<const double> mi, const CmiMatrix& cmi) {
    const std::size_t m = mi.size();
    if (m == 0) throw std::invalid_argument("tan structure: no features");
    if (cmi.size != m) throw std::invalid_argument("tan structure: MI/CMI size mismatch");
    DependenceStructure s;
    s.k = 1;
    s.parents.resize(m);

    std::size_t root = 0;
    for (std::size_t f = 1; f < m; ++f)
        if (key(mi[f]) > key(mi[root])) root = f;

    // Prim's algorithm; best_parent[v] is the tree vertex giving v its
    // heaviest connection, smallest index on ties.
    std::vector<bool> in_tree(m, false);
    std::vector<std::size_t> best_parent(m, root);
    in_tree[root] = true;
    s.order.push_back(root);
    while (s.order.size() < m) {
        std::size_t next = m;
        for (std::size_t v = 0; v < m; ++v) {
            if (in_tree[v]) continue;
            if (next == m || key(cmi(v, best_parent[v])) > key(cmi(next, best_parent[next]))) next = v;
        }
        in_tree[next] = true;
        s.order.push_back(next);
        s.parents[next] = {best_parent[next]};
        for (std::size_t v = 0; v < m; ++v) {
            if (in_tree[v]) continue;
            const double w_new = key(cmi(v, next));
            const double w_old = key(cmi(v, best_parent[v]));
            if (w_new > w_old || (w_new == w_old && next < best_parent[v])) best_parent[v] = next;
        }
    }
    return s;
}

DependenceStructure build_tan_structure(const Dataset& data) {
    if (data.num_rows() == 0) throw std::invalid_argument("tan structure: empty dataset");
    return build_tan_structure(mutual_information_vector(data), conditional_mutual_information_matrix(data));
}

DependenceStructure build_empty_structure(std::size_t num_features) {
    if (num_features == 0) throw std::invalid_argument("empty structure: no features");
    DependenceStructure s;
    s.parents.resize(num_features);
    s.order.resize(num_features);
    std::iota(s.order.begin(), s.order.end(), 0);
    return s;
}

}  // namespace nkdb
