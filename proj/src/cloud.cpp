#include "cpm/cloud.hpp"

#include <algorithm>

#include "cpm/errors.hpp"

namespace cpm {

int PointCloud::vocab_index(const std::string& part) const {
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (vocab[i] == part) return static_cast<int>(i);
    return -1;
}

std::size_t PointCloud::count_part(const std::string& part) const {
    int idx = vocab_index(part);
    if (idx < 0) return 0;
    return static_cast<std::size_t>(std::count(part_labels.begin(), part_labels.end(), idx));
}

Eigen::Vector3d PointCloud::centroid() const {
    if (points.empty()) throw EmptyCloudError("centroid of empty cloud");
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const auto& p : points) sum += p;
    return sum / static_cast<double>(points.size());
}

Eigen::Vector3d PointCloud::part_centroid(const std::string& part) const {
    int idx = vocab_index(part);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::size_t n = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (idx >= 0 && part_labels[i] == idx) {
            sum += points[i];
            ++n;
        }
    }
    if (n == 0) throw PartMissingError("no '" + part + "' points in " + category + " cloud");
    return sum / static_cast<double>(n);
}

std::vector<Eigen::Vector3d> resample(const std::vector<Eigen::Vector3d>& points, std::size_t n,
                                      Rng& rng) {
    const std::size_t m = points.size();
    std::vector<Eigen::Vector3d> out;
    out.reserve(n);
    if (m == 0) throw EmptyCloudError("resample of empty point set");
    if (m >= n) {
        // Partial Fisher-Yates: first n entries of a random permutation.
        std::vector<std::size_t> idx(m);
        for (std::size_t i = 0; i < m; ++i) idx[i] = i;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(m - 1)));
            std::swap(idx[i], idx[j]);
            out.push_back(points[idx[i]]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(points[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(m - 1)))]);
    }
    return out;
}

namespace {

PartCloud finish_part(std::vector<Eigen::Vector3d> selected, std::string part, Rng& rng) {
    PartCloud pc;
    pc.points = resample(selected, kPartPoints, rng);
    pc.part = std::move(part);
    pc.frame = centroid_frame(pc.points);
    for (auto& p : pc.points) p -= pc.frame.translation;
    return pc;
}

}  // namespace

PartCloud extract_part(const PointCloud& cloud, const std::string& part, Rng& rng) {
    int idx = cloud.vocab_index(part);
    std::vector<Eigen::Vector3d> selected;
    if (idx >= 0) {
        for (std::size_t i = 0; i < cloud.points.size(); ++i)
            if (cloud.part_labels[i] == idx) selected.push_back(cloud.points[i]);
    }
    if (selected.empty())
        throw PartMissingError("no '" + part + "' points in " + cloud.category + " cloud");
    return finish_part(std::move(selected), part, rng);
}

PartCloud whole_object_part(const PointCloud& cloud, Rng& rng) {
    if (cloud.points.empty()) throw EmptyCloudError("whole_object_part of empty cloud");
    return finish_part(cloud.points, "all", rng);
}

}  // namespace cpm
