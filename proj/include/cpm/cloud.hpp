#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "cpm/rng.hpp"
#include "cpm/se3.hpp"

namespace cpm {

constexpr int kPartPoints = 512;

// Labeled point cloud of one object in the world frame.
struct PointCloud {
    std::vector<Eigen::Vector3d> points;
    std::vector<int> part_labels;     // index into vocab, parallel to points
    std::vector<std::string> vocab;   // part vocabulary of the task family
    std::string category;

    // Index of the part name in the vocabulary, -1 if not in the vocab.
    int vocab_index(const std::string& part) const;
    std::size_t count_part(const std::string& part) const;
    bool has_part(const std::string& part) const { return count_part(part) > 0; }
    Eigen::Vector3d centroid() const;
    Eigen::Vector3d part_centroid(const std::string& part) const;  // PartMissing
};

// Fixed-size conditioning input for the denoiser: 512 points centered at
// the part centroid; frame carries the original centroid, world-aligned.
struct PartCloud {
    std::vector<Eigen::Vector3d> points;
    std::string part;
    Pose frame;
};

// Uniform resample: without replacement when m >= n (a permutation when
// m == n), with replacement otherwise. Deterministic given the stream.
std::vector<Eigen::Vector3d> resample(const std::vector<Eigen::Vector3d>& points, std::size_t n,
                                      Rng& rng);

// Selects the labeled points, resamples to kPartPoints and centers them.
// Throws PartMissingError when no point carries the label.
PartCloud extract_part(const PointCloud& cloud, const std::string& part, Rng& rng);

// The whole object as a PartCloud ("all"), centered at the object centroid.
// Conditioning input of the monolithic baseline.
PartCloud whole_object_part(const PointCloud& cloud, Rng& rng);

}  // namespace cpm
