#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpm/cloud.hpp"
#include "cpm/se3.hpp"

namespace cpm {

// One recorded manipulation: the observed (partial) clouds of both objects,
// the task, and the ground-truth relative poses T_AF at the two waypoints.
struct Demonstration {
    std::uint64_t uid = 0;   // record index within its dataset
    std::uint64_t seed = 0;  // per-record generator stream
    std::string task;
    PointCloud anchor;
    PointCloud function;
    TrajectorySpec gt_poses;
    nlohmann::json free_params;  // sampled nuisance values (azimuth, tilt, ...)
};

nlohmann::json demonstration_to_json(const Demonstration& demo);
Demonstration demonstration_from_json(const nlohmann::json& j);

struct DatasetManifest {
    std::string task;
    std::uint64_t master_seed = 0;
    std::size_t count = 0;
    // category pair -> record count, keys "anchor|function"
    std::map<std::string, std::size_t> category_counts;
    nlohmann::json config;  // generator RunConfig for provenance

    nlohmann::json to_json() const;
};

// JSON-lines, one record per demonstration.
void write_demonstrations(const std::string& path, const std::vector<Demonstration>& demos);
std::vector<Demonstration> read_demonstrations(const std::string& path);

}  // namespace cpm
