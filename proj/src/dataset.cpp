#include "cpm/dataset.hpp"

#include <fstream>

#include "cpm/errors.hpp"

namespace cpm {

namespace {

nlohmann::json cloud_to_json(const PointCloud& c) {
    std::vector<double> flat;
    flat.reserve(c.points.size() * 3);
    for (const auto& p : c.points) {
        flat.push_back(p.x());
        flat.push_back(p.y());
        flat.push_back(p.z());
    }
    return {{"category", c.category},
            {"vocab", c.vocab},
            {"points", flat},
            {"labels", c.part_labels}};
}

PointCloud cloud_from_json(const nlohmann::json& j) {
    PointCloud c;
    c.category = j.at("category").get<std::string>();
    c.vocab = j.at("vocab").get<std::vector<std::string>>();
    c.part_labels = j.at("labels").get<std::vector<int>>();
    const auto flat = j.at("points").get<std::vector<double>>();
    if (flat.size() != c.part_labels.size() * 3)
        throw IoError("demonstration cloud: points/labels length mismatch");
    c.points.reserve(c.part_labels.size());
    for (std::size_t i = 0; i < flat.size(); i += 3)
        c.points.emplace_back(flat[i], flat[i + 1], flat[i + 2]);
    return c;
}

nlohmann::json pose_to_json(const Pose& p) {
    const auto d = p.flat();
    return std::vector<double>(d.begin(), d.end());
}

Pose pose_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 12) throw IoError("pose encoding must have 12 numbers");
    std::array<double, 12> d;
    std::copy(v.begin(), v.end(), d.begin());
    return Pose::from_flat(d);
}

}  // namespace

nlohmann::json demonstration_to_json(const Demonstration& demo) {
    return {{"uid", demo.uid},
            {"seed", demo.seed},
            {"task", demo.task},
            {"anchor", cloud_to_json(demo.anchor)},
            {"function", cloud_to_json(demo.function)},
            {"gt_start", pose_to_json(demo.gt_poses.start())},
            {"gt_end", pose_to_json(demo.gt_poses.end())},
            {"free_params", demo.free_params}};
}

Demonstration demonstration_from_json(const nlohmann::json& j) {
    Demonstration d;
    d.uid = j.at("uid").get<std::uint64_t>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.task = j.at("task").get<std::string>();
    d.anchor = cloud_from_json(j.at("anchor"));
    d.function = cloud_from_json(j.at("function"));
    d.gt_poses.start() = pose_from_json(j.at("gt_start"));
    d.gt_poses.end() = pose_from_json(j.at("gt_end"));
    d.free_params = j.value("free_params", nlohmann::json::object());
    return d;
}

nlohmann::json DatasetManifest::to_json() const {
    return {{"task", task},
            {"master_seed", master_seed},
            {"count", count},
            {"category_counts", category_counts},
            {"config", config}};
}

void write_demonstrations(const std::string& path, const std::vector<Demonstration>& demos) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open dataset for writing: " + path);
    for (const auto& d : demos) out << demonstration_to_json(d).dump() << "\n";
    if (!out) throw IoError("short write on dataset: " + path);
}

std::vector<Demonstration> read_demonstrations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::vector<Demonstration> demos;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw IoError(path + ":" + std::to_string(lineno) + ": bad JSON record");
        demos.push_back(demonstration_from_json(j));
    }
    return demos;
}

}  // namespace cpm
