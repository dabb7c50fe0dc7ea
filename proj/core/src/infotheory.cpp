#include "nkdb/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nkdb {

namespace {

void require_rows(const Dataset& data) {
    if (data.num_rows() == 0) throw std::invalid_argument("mutual information of an empty dataset");
}

void require_feature(const Dataset& data, std::size_t i) {
    if (i >= data.num_features()) throw std::out_of_range("feature index out of range");
}

}  // namespace

JointCounts JointCounts::pair(const Dataset& data, std::size_t feature) {
    require_feature(data, feature);
    JointCounts jc;
    jc.shape_ = {data.alphabet_size(feature), data.num_classes()};
    jc.cells_.assign(jc.shape_[0] * jc.shape_[1], 0);
    for (std::size_t r = 0; r < data.num_rows(); ++r) ++jc.cells_[data.value(r, feature) * jc.shape_[1] + data.label(r)];
    jc.total_ = data.num_rows();
    return jc;
}

JointCounts JointCounts::triple(const Dataset& data, std::size_t i, std::size_t j) {
    require_feature(data, i);
    require_feature(data, j);
    JointCounts jc;
    jc.shape_ = {data.alphabet_size(i), data.alphabet_size(j), data.num_classes()};
    jc.cells_.assign(jc.shape_[0] * jc.shape_[1] * jc.shape_[2], 0);
    for (std::size_t r = 0; r < data.num_rows(); ++r)
        ++jc.cells_[(data.value(r, i) * jc.shape_[1] + data.value(r, j)) * jc.shape_[2] + data.label(r)];
    jc.total_ = data.num_rows();
    return jc;
}

double mutual_information(const Dataset& data, std::size_t feature) {
    require_rows(data);
    const auto jc = JointCounts::pair(data, feature);
    const std::size_t na = jc.shape()[0];
    const std::size_t ny = jc.shape()[1];
    std::vector<double> pa(na, 0.0);
    std::vector<double> py(ny, 0.0);
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t y = 0; y < ny; ++y) {
            pa[a] += static_cast<double>(jc.at(a, y));
            py[y] += static_cast<double>(jc.at(a, y));
        }
    const double n = static_cast<double>(jc.total());
    // With counts: p(a,y) ln(p(a,y)/(p(a)p(y))) = c/n ln(c n / (c_a c_y)).
    double mi = 0.0;
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t y = 0; y < ny; ++y) {
            const double c = static_cast<double>(jc.at(a, y));
            if (c == 0.0) continue;
            mi += c / n * std::log(c * n / (pa[a] * py[y]));
        }
    return std::max(mi, 0.0);
}

double conditional_mutual_information(const Dataset& data, std::size_t i, std::size_t j) {
    if (i == j) throw std::invalid_argument("conditional mutual information needs two distinct features");
    require_rows(data);
    // Canonical argument order keeps CMI(i, j) == CMI(j, i) bit for bit.
    if (i > j) std::swap(i, j);
    const auto jc = JointCounts::triple(data, i, j);
    const std::size_t na = jc.shape()[0];
    const std::size_t nb = jc.shape()[1];
    const std::size_t ny = jc.shape()[2];
    std::vector<double> cay(na * ny, 0.0);
    std::vector<double> cby(nb * ny, 0.0);
    std::vector<double> cy(ny, 0.0);
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t y = 0; y < ny; ++y) {
                const double c = static_cast<double>(jc.at(a, b, y));
                cay[a * ny + y] += c;
                cby[b * ny + y] += c;
                cy[y] += c;
            }
    const double n = static_cast<double>(jc.total());
    // p(y) p(a,b|y) ln(p(a,b|y) / (p(a|y) p(b|y))) = c/n ln(c c_y / (c_ay c_by)).
    double cmi = 0.0;
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = 0; b < nb; ++b)
            for (std::size_t y = 0; y < ny; ++y) {
                const double c = static_cast<double>(jc.at(a, b, y));
                if (c == 0.0) continue;
                cmi += c / n * std::log(c * cy[y] / (cay[a * ny + y] * cby[b * ny + y]));
            }
    return std::max(cmi, 0.0);
}

std::vector<double> mutual_information_vector(const Dataset& data) {
    std::vector<double> out(data.num_features());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mutual_information(data, i);
    return out;
}

CmiMatrix conditional_mutual_information_matrix(const Dataset& data) {
    const std::size_t m = data.num_features();
    CmiMatrix mat{m, std::vector<double>(m * m, 0.0)};
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double v = conditional_mutual_information(data, i, j);
            mat.values[i * m + j] = v;
            mat.values[j * m + i] = v;
        }
    return mat;
}

}  // namespace nkdb
