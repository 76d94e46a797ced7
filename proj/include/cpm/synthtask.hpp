#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpm/dataset.hpp"
#include "cpm/task.hpp"

namespace cpm {

struct ParamRange {
    double lo = 0.0, hi = 0.0;
    double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Parameter ranges of one procedural family. Vessel fields drive the
// surface-of-revolution generator; stick fields the cylinder+cone one.
struct CategoryParams {
    ParamRange rim_radius;  // top opening radius
    ParamRange height;
    ParamRange base_frac;   // base radius / rim radius
    ParamRange belly_frac;  // mid-profile radius / rim radius
    double wall = 0.003;
    std::string handle_style = "none";  // none | loop | rod
    ParamRange handle_size;             // loop radius or rod length

    ParamRange stick_radius;
    ParamRange stick_length;
    ParamRange head_factor;  // head radius / shaft radius
    ParamRange tip_frac;     // tip cone length / stick length
};

// Declarative category table; families: bowl-like, glass-like, mug-like,
// pan-like (pour) and container-like, stick-like (place).
struct CategoryTable {
    std::map<std::string, CategoryParams> families;

    static CategoryTable defaults();
    // Key-value text: "family.field = lo hi" or "family.field = value".
    static CategoryTable from_file(const std::string& path);
    nlohmann::json to_json() const;

    const CategoryParams& at(const std::string& family) const;  // InvalidSpecError
};

std::vector<std::string> pour_function_families();
std::vector<std::string> pour_anchor_families();

struct ObjectSpec {
    std::string category;
    std::uint64_t seed = 0;
    // vessels
    double rim_radius = 0, base_radius = 0, belly_radius = 0, height = 0, wall = 0.003;
    std::string handle_style = "none";
    double handle_size = 0;
    // sticks
    double stick_radius = 0, stick_length = 0, head_radius = 0, tip_length = 0;

    bool is_stick() const { return category == "stick-like"; }
    bool is_container() const { return category == "container-like"; }
    bool has_handle() const { return handle_style != "none"; }

    nlohmann::json to_json() const;
};

ObjectSpec sample_object_spec(const std::string& category, const CategoryTable& table, Rng& rng);

// Canonical-pose partial cloud: ~2000 surface points, labeled, then culled
// against a random camera (points whose outward normal faces away are
// dropped). Cameras are re-drawn until every required part keeps at least
// a minimal number of points. Vessels sit base-down with the axis +z;
// sticks have the tip at the origin and the head toward +z.
PointCloud gen_object(const ObjectSpec& spec, Rng& rng);

// Scoring calibrations; defaults are recorded in every report config.
struct OracleParams {
    double align_sigma = 0.01;   // m
    double touch_sigma = 0.005;  // m
    double tilt_lo_deg = 95.0;
    double tilt_hi_deg = 135.0;
    double tilt_falloff_deg = 20.0;
    double clearance = 0.002;  // interpenetration gate, m

    nlohmann::json to_json() const;
};

// Per-constraint score in [0,1] evaluated at the end pose (the start pose
// only enters the interpenetration gate). Throws PartMissingError when a
// required part has no points.
double oracle(Relation relation, const PointCloud& anchor, const PointCloud& function,
              const TrajectorySpec& poses, const OracleParams& params = {});

struct OracleResult {
    std::map<std::string, double> per_constraint;  // relation name -> [0,1]
    std::vector<std::string> skipped;              // constraints without parts
    bool interpenetration = false;
    double overall = 0.0;  // 100 x mean of present constraint scores, 0 on gate
    bool success = false;  // every present constraint >= 0.7 and gate clean
};

// Full trial scorer: interpenetration gate at both waypoints, then the
// mean of the per-constraint oracles. Missing parts soft-skip.
OracleResult score_poses(const PointCloud& anchor, const PointCloud& function,
                         const TaskDefinition& task, const TrajectorySpec& poses,
                         const OracleParams& params = {});

// World-frame motion of the function cloud implied by T_AF.
Pose function_motion(const PointCloud& anchor, const PointCloud& function, const Pose& t_af);

// Analytic demonstration generator; rejection-samples scenes and action
// parameters until the demo passes its own oracles (at most 100 attempts,
// then GenerationFailedError).
Demonstration gen_demonstration(const TaskDefinition& task, const ObjectSpec& anchor_spec,
                                const ObjectSpec& function_spec, std::uint64_t seed,
                                const OracleParams& params = {});

// Dataset-level driver: samples compatible category pairs and specs, then
// generates n demonstrations with per-record derived seeds (parallel).
std::vector<Demonstration> gen_dataset(const std::string& task_name, std::size_t n,
                                       std::uint64_t master_seed, const CategoryTable& table,
                                       int jobs, const OracleParams& params = {});

}  // namespace cpm
