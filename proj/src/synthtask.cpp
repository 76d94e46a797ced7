#include "cpm/synthtask.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "cpm/errors.hpp"
#include "cpm/parallel.hpp"

namespace cpm {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }
}  // namespace

// ---------------------------------------------------------------------------
// Category table

CategoryTable CategoryTable::defaults() {
    CategoryTable t;
    CategoryParams bowl;
    bowl.rim_radius = {0.07, 0.13};
    bowl.height = {0.035, 0.07};
    bowl.base_frac = {0.30, 0.45};
    bowl.belly_frac = {0.72, 0.90};
    t.families["bowl-like"] = bowl;

    CategoryParams glass;
    glass.rim_radius = {0.030, 0.050};
    glass.height = {0.09, 0.15};
    glass.base_frac = {0.70, 0.95};
    glass.belly_frac = {0.80, 0.98};
    t.families["glass-like"] = glass;

    CategoryParams mug;
    mug.rim_radius = {0.035, 0.060};
    mug.height = {0.07, 0.11};
    mug.base_frac = {0.85, 1.00};
    mug.belly_frac = {0.90, 1.02};
    mug.handle_style = "loop";
    mug.handle_size = {0.020, 0.040};
    t.families["mug-like"] = mug;

    CategoryParams pan;
    pan.rim_radius = {0.10, 0.17};
    pan.height = {0.030, 0.050};
    pan.base_frac = {0.90, 1.00};
    pan.belly_frac = {0.95, 1.02};
    pan.handle_style = "rod";
    pan.handle_size = {0.07, 0.13};
    t.families["pan-like"] = pan;

    CategoryParams container;
    container.rim_radius = {0.032, 0.055};
    container.height = {0.14, 0.21};
    container.base_frac = {0.85, 1.00};
    container.belly_frac = {0.90, 1.00};
    t.families["container-like"] = container;

    CategoryParams stick;
    stick.stick_radius = {0.005, 0.010};
    stick.stick_length = {0.085, 0.115};
    stick.head_factor = {1.4, 1.9};
    stick.tip_frac = {0.06, 0.12};
    t.families["stick-like"] = stick;
    return t;
}

const CategoryParams& CategoryTable::at(const std::string& family) const {
    auto it = families.find(family);
    if (it == families.end()) throw InvalidSpecError("unknown object family: " + family);
    return it->second;
}

CategoryTable CategoryTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open category table: " + path);
    CategoryTable t = defaults();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string key, eq;
        ls >> key >> eq;
        const auto dot = key.find('.');
        if (eq != "=" || dot == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) +
                          ": expected 'family.field = value(s)'");
        const std::string family = key.substr(0, dot);
        const std::string field = key.substr(dot + 1);
        CategoryParams& p = t.families[family];
        if (field == "wall") {
            ls >> p.wall;
        } else if (field == "handle_style") {
            ls >> p.handle_style;
        } else {
            double lo = 0, hi = 0;
            ls >> lo;
            if (!(ls >> hi)) hi = lo;
            ParamRange r{lo, hi};
            if (field == "rim_radius") p.rim_radius = r;
            else if (field == "height") p.height = r;
            else if (field == "base_frac") p.base_frac = r;
            else if (field == "belly_frac") p.belly_frac = r;
            else if (field == "handle_size") p.handle_size = r;
            else if (field == "stick_radius") p.stick_radius = r;
            else if (field == "stick_length") p.stick_length = r;
            else if (field == "head_factor") p.head_factor = r;
            else if (field == "tip_frac") p.tip_frac = r;
            else
                throw IoError(path + ":" + std::to_string(lineno) + ": unknown field " + field);
        }
    }
    return t;
}

nlohmann::json CategoryTable::to_json() const {
    nlohmann::json j;
    for (const auto& [family, p] : families) {
        j[family] = {{"rim_radius", {p.rim_radius.lo, p.rim_radius.hi}},
                     {"height", {p.height.lo, p.height.hi}},
                     {"base_frac", {p.base_frac.lo, p.base_frac.hi}},
                     {"belly_frac", {p.belly_frac.lo, p.belly_frac.hi}},
                     {"wall", p.wall},
                     {"handle_style", p.handle_style},
                     {"handle_size", {p.handle_size.lo, p.handle_size.hi}},
                     {"stick_radius", {p.stick_radius.lo, p.stick_radius.hi}},
                     {"stick_length", {p.stick_length.lo, p.stick_length.hi}},
                     {"head_factor", {p.head_factor.lo, p.head_factor.hi}},
                     {"tip_frac", {p.tip_frac.lo, p.tip_frac.hi}}};
    }
    return j;
}

std::vector<std::string> pour_function_families() {
    return {"bowl-like", "glass-like", "mug-like", "pan-like"};
}
std::vector<std::string> pour_anchor_families() { return pour_function_families(); }

nlohmann::json ObjectSpec::to_json() const {
    return {{"category", category},       {"seed", seed},
            {"rim_radius", rim_radius},   {"base_radius", base_radius},
            {"belly_radius", belly_radius}, {"height", height},
            {"wall", wall},               {"handle_style", handle_style},
            {"handle_size", handle_size}, {"stick_radius", stick_radius},
            {"stick_length", stick_length}, {"head_radius", head_radius},
            {"tip_length", tip_length}};
}

ObjectSpec sample_object_spec(const std::string& category, const CategoryTable& table, Rng& rng) {
    const CategoryParams& p = table.at(category);
    ObjectSpec s;
    s.category = category;
    s.seed = rng.next_u64();
    if (category == "stick-like") {
        s.stick_radius = p.stick_radius.sample(rng);
        s.stick_length = p.stick_length.sample(rng);
        s.head_radius = s.stick_radius * p.head_factor.sample(rng);
        s.tip_length = s.stick_length * p.tip_frac.sample(rng);
    } else {
        s.rim_radius = p.rim_radius.sample(rng);
        s.height = p.height.sample(rng);
        s.base_radius = s.rim_radius * p.base_frac.sample(rng);
        s.belly_radius = s.rim_radius * p.belly_frac.sample(rng);
        s.wall = p.wall;
        s.handle_style = p.handle_style;
        if (p.handle_style != "none") s.handle_size = p.handle_size.sample(rng);
    }
    if (s.is_stick() ? s.stick_length <= 0 : (s.rim_radius <= 0 || s.height <= 0))
        throw InvalidSpecError("degenerate object spec for " + category);
    return s;
}

// ---------------------------------------------------------------------------
// Procedural surface sampling

namespace {

struct SurfacePoint {
    Eigen::Vector3d p;
    Eigen::Vector3d n;
    int label;
};

// A slim patch of surface plus how to draw a point from it.
struct Patch {
    double area = 0.0;
    std::function<SurfacePoint(Rng&)> draw;
};

// Labels are indices into the object's task vocabulary.
struct LabelRule {
    std::function<int(double z, bool is_handle, bool is_base)> classify;
};

// Revolution band between (z0,r0) and (z1,r1); inner shells flip normals.
Patch band_patch(double z0, double z1, double r0, double r1, bool inward,
                 const LabelRule& rule) {
    const double dz = z1 - z0;
    const double dr = r1 - r0;
    const double slant = std::sqrt(dz * dz + dr * dr);
    const double mean_r = 0.5 * (r0 + r1);
    Patch patch;
    patch.area = kTwoPi * std::max(mean_r, 1e-6) * slant;
    patch.draw = [=](Rng& rng) {
        const double u = rng.uniform();
        const double z = z0 + u * dz;
        const double r = r0 + u * dr;
        const double theta = rng.uniform(0.0, kTwoPi);
        const double c = std::cos(theta), s = std::sin(theta);
        Eigen::Vector3d n(c * dz, s * dz, -dr);
        if (n.norm() < 1e-12) n = Eigen::Vector3d(c, s, 0.0);
        n.normalize();
        if (inward) n = -n;
        return SurfacePoint{{r * c, r * s, z}, n, rule.classify(z, false, false)};
    };
    return patch;
}

Patch annulus_patch(double z, double r_in, double r_out, double nz, bool base,
                    const LabelRule& rule) {
    Patch patch;
    patch.area = kPi * std::max(r_out * r_out - r_in * r_in, 1e-10);
    patch.draw = [=](Rng& rng) {
        const double r = std::sqrt(r_in * r_in + rng.uniform() * (r_out * r_out - r_in * r_in));
        const double theta = rng.uniform(0.0, kTwoPi);
        return SurfacePoint{{r * std::cos(theta), r * std::sin(theta), z},
                            {0.0, 0.0, nz},
                            rule.classify(z, false, base)};
    };
    return patch;
}

// C-shaped loop handle in the x-z plane, bulging toward +x.
Patch loop_patch(const Eigen::Vector3d& center, double major, double minor, double a0, double a1,
                 const LabelRule& rule) {
    Patch patch;
    patch.area = (a1 - a0) * major * kTwoPi * minor;
    patch.draw = [=](Rng& rng) {
        const double a = rng.uniform(a0, a1);
        const double b = rng.uniform(0.0, kTwoPi);
        const Eigen::Vector3d n1(std::cos(a), 0.0, std::sin(a));
        const Eigen::Vector3d n2(0.0, 1.0, 0.0);
        const Eigen::Vector3d ring = center + major * n1;
        const Eigen::Vector3d normal = std::cos(b) * n1 + std::sin(b) * n2;
        return SurfacePoint{ring + minor * normal, normal, rule.classify(ring.z(), true, false)};
    };
    return patch;
}

// Straight rod handle along +x at a fixed height.
Patch rod_patch(double x0, double x1, double z, double radius, const LabelRule& rule) {
    Patch patch;
    patch.area = (x1 - x0) * kTwoPi * radius;
    patch.draw = [=](Rng& rng) {
        const double x = rng.uniform(x0, x1);
        const double b = rng.uniform(0.0, kTwoPi);
        const Eigen::Vector3d n(0.0, std::cos(b), std::sin(b));
        return SurfacePoint{{x, radius * std::cos(b), z + radius * std::sin(b)}, n,
                            rule.classify(z, true, false)};
    };
    return patch;
}

std::vector<Patch> vessel_patches(const ObjectSpec& spec, const LabelRule& rule) {
    std::vector<Patch> patches;
    const double h = spec.height;
    const double w = spec.wall;
    // piecewise-linear radius through base, belly (at 0.45h) and rim
    auto radius_at = [&](double z) {
        const double zb = 0.45 * h;
        if (z <= zb)
            return spec.base_radius + (spec.belly_radius - spec.base_radius) * (z / zb);
        return spec.belly_radius + (spec.rim_radius - spec.belly_radius) * ((z - zb) / (h - zb));
    };
    const int slices = 40;
    for (int i = 0; i < slices; ++i) {
        const double z0 = h * i / slices;
        const double z1 = h * (i + 1) / slices;
        patches.push_back(band_patch(z0, z1, radius_at(z0), radius_at(z1), false, rule));
        const double zi0 = std::max(z0, w);
        if (zi0 < z1)
            patches.push_back(band_patch(zi0, z1, std::max(radius_at(zi0) - w, 1e-4),
                                         std::max(radius_at(z1) - w, 1e-4), true, rule));
    }
    // rim top edge, outer bottom, inner floor
    patches.push_back(annulus_patch(h, std::max(radius_at(h) - w, 1e-4), radius_at(h), 1.0,
                                    false, rule));
    patches.push_back(annulus_patch(0.0, 0.0, radius_at(0.0), -1.0, true, rule));
    patches.push_back(
        annulus_patch(w, 0.0, std::max(radius_at(w) - w, 1e-4), 1.0, true, rule));

    if (spec.handle_style == "loop") {
        const double zc = 0.55 * h;
        const Eigen::Vector3d center(radius_at(zc), 0.0, zc);
        patches.push_back(
            loop_patch(center, spec.handle_size, 0.004, deg2rad(-85.0), deg2rad(85.0), rule));
    } else if (spec.handle_style == "rod") {
        const double zc = 0.85 * h;
        const double r0 = radius_at(zc);
        patches.push_back(rod_patch(r0, r0 + spec.handle_size, zc, 0.006, rule));
    }
    return patches;
}

std::vector<Patch> stick_patches(const ObjectSpec& spec, const LabelRule& rule) {
    std::vector<Patch> patches;
    const double L = spec.stick_length;
    const double rs = spec.stick_radius;
    const double rh = spec.head_radius;
    const double tip = spec.tip_length;
    const double shoulder = 0.70 * L;
    patches.push_back(band_patch(0.0, tip, 0.0, rs, false, rule));        // tip cone
    patches.push_back(band_patch(tip, shoulder, rs, rs, false, rule));    // shaft
    patches.push_back(band_patch(shoulder, L, rh, rh, false, rule));      // head
    patches.push_back(annulus_patch(shoulder, rs, rh, -1.0, false, rule));  // shoulder ring
    patches.push_back(annulus_patch(L, 0.0, rh, 1.0, false, rule));         // head cap
    return patches;
}

struct GenProfile {
    std::vector<Patch> patches;
    std::vector<std::string> vocab;
    std::map<std::string, std::size_t> required;  // label -> min points after culling
};

GenProfile make_profile(const ObjectSpec& spec) {
    GenProfile prof;
    if (spec.is_stick()) {
        prof.vocab = task_vocabulary("place");
        const double L = spec.stick_length;
        LabelRule rule{[&prof, L](double z, bool, bool) {
            if (z <= 0.10 * L) return 0;  // tip
            if (z >= 0.75 * L) return 1;  // head
            return 2;                     // body
        }};
        prof.patches = stick_patches(spec, rule);
        prof.required = {{"tip", 10}, {"head", 15}, {"body", 30}};
    } else if (spec.is_container()) {
        prof.vocab = task_vocabulary("place");
        const double h = spec.height;
        LabelRule rule{[h](double z, bool, bool base) {
            if (base) return 3;           // bottom
            if (z >= 0.90 * h) return 4;  // opening
            return 2;                     // body
        }};
        prof.patches = vessel_patches(spec, rule);
        prof.required = {{"opening", 15}, {"bottom", 12}, {"body", 50}};
    } else {
        prof.vocab = task_vocabulary("pour");
        const double h = spec.height;
        LabelRule rule{[h](double z, bool handle, bool) {
            if (handle) return 2;         // handle
            if (z >= 0.90 * h) return 0;  // rim
            return 1;                     // body
        }};
        prof.patches = vessel_patches(spec, rule);
        prof.required = {{"rim", 15}, {"body", 50}};
    }
    return prof;
}

}  // namespace

PointCloud gen_object(const ObjectSpec& spec, Rng& rng) {
    const GenProfile prof = make_profile(spec);
    std::vector<double> cumulative;
    cumulative.reserve(prof.patches.size());
    double total = 0.0;
    for (const Patch& p : prof.patches) {
        total += p.area;
        cumulative.push_back(total);
    }
    if (total <= 0.0) throw InvalidSpecError("object with zero surface area: " + spec.category);

    const std::size_t n_surface = 2000;
    const double center_z = spec.is_stick() ? 0.5 * spec.stick_length : 0.5 * spec.height;

    for (int camera_try = 0; camera_try < 30; ++camera_try) {
        std::vector<SurfacePoint> raw;
        raw.reserve(n_surface);
        for (std::size_t i = 0; i < n_surface; ++i) {
            const double u = rng.uniform(0.0, total);
            const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
            const auto idx = static_cast<std::size_t>(it - cumulative.begin());
            raw.push_back(prof.patches[std::min(idx, prof.patches.size() - 1)].draw(rng));
        }
        const double az = rng.uniform(0.0, kTwoPi);
        const double el = rng.uniform(deg2rad(15.0), deg2rad(70.0));
        const Eigen::Vector3d cam = Eigen::Vector3d(0, 0, center_z) +
                                    1.0 * Eigen::Vector3d(std::cos(el) * std::cos(az),
                                                          std::cos(el) * std::sin(az),
                                                          std::sin(el));
        PointCloud cloud;
        cloud.category = spec.category;
        cloud.vocab = prof.vocab;
        for (const SurfacePoint& sp : raw) {
            if (sp.n.dot(cam - sp.p) > 0.0) {
                cloud.points.push_back(sp.p);
                cloud.part_labels.push_back(sp.label);
            }
        }
        bool ok = true;
        for (const auto& [part, min_count] : prof.required)
            if (cloud.count_part(part) < min_count) ok = false;
        if (ok) return cloud;
    }
    throw InvalidSpecError("camera culling starved a required part on " + spec.category);
}

// ---------------------------------------------------------------------------
// Oracles

nlohmann::json OracleParams::to_json() const {
    return {{"align_sigma", align_sigma},
            {"touch_sigma", touch_sigma},
            {"tilt_lo_deg", tilt_lo_deg},
            {"tilt_hi_deg", tilt_hi_deg},
            {"tilt_falloff_deg", tilt_falloff_deg},
            {"clearance", clearance}};
}

Pose function_motion(const PointCloud& anchor, const PointCloud& function, const Pose& t_af) {
    return to_world(centroid_frame(anchor.points), t_af, centroid_frame(function.points));
}

namespace {

std::vector<Eigen::Vector3d> part_points(const PointCloud& c, const std::string& part) {
    const int idx = c.vocab_index(part);
    std::vector<Eigen::Vector3d> pts;
    for (std::size_t i = 0; i < c.points.size(); ++i)
        if (idx >= 0 && c.part_labels[i] == idx) pts.push_back(c.points[i]);
    if (pts.empty()) throw PartMissingError("no '" + part + "' points in " + c.category);
    return pts;
}

// Symmetry axis estimate: plane normal of the rim/opening ring when one
// exists, otherwise the principal component (sticks), oriented upward
// along the labeled direction.
Eigen::Vector3d object_axis(const PointCloud& c) {
    const bool has_rim = c.has_part("rim");
    const bool has_opening = c.has_part("opening");
    if (has_rim || has_opening) {
        const auto ring = part_points(c, has_rim ? "rim" : "opening");
        Eigen::Vector3d mu = Eigen::Vector3d::Zero();
        for (const auto& p : ring) mu += p;
        mu /= static_cast<double>(ring.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& p : ring) cov += (p - mu) * (p - mu).transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
        Eigen::Vector3d axis = eig.eigenvectors().col(0);  // smallest: ring normal
        if (axis.dot(mu - c.centroid()) < 0.0) axis = -axis;
        return axis.normalized();
    }
    Eigen::Vector3d mu = c.centroid();
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : c.points) cov += (p - mu) * (p - mu).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d axis = eig.eigenvectors().col(2);  // largest: elongation
    if (c.has_part("head") && c.has_part("tip")) {
        if (axis.dot(c.part_centroid("head") - c.part_centroid("tip")) < 0.0) axis = -axis;
    }
    return axis.normalized();
}

double bottom_plane_z(const PointCloud& anchor) {
    const auto pts = part_points(anchor, "bottom");
    double z = pts.front().z();
    for (const auto& p : pts) z = std::max(z, p.z());
    return z;
}

class PointGrid {
public:
    PointGrid(const std::vector<Eigen::Vector3d>& pts, double cell) : cell_(cell) {
        cells_.reserve(pts.size());
        for (const auto& p : pts) cells_[key(p)].push_back(p);
    }

    bool any_within(const Eigen::Vector3d& p, double d) const {
        const double d2 = d * d;
        const auto cx = coord(p.x()), cy = coord(p.y()), cz = coord(p.z());
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dz = -1; dz <= 1; ++dz) {
                    const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
                    if (it == cells_.end()) continue;
                    for (const auto& q : it->second)
                        if ((q - p).squaredNorm() < d2) return true;
                }
        return false;
    }

private:
    long coord(double v) const { return static_cast<long>(std::floor(v / cell_)); }
    static std::uint64_t pack(long x, long y, long z) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 42) ^
               (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 21) ^
               static_cast<std::uint64_t>(static_cast<std::uint32_t>(z));
    }
    std::uint64_t key(const Eigen::Vector3d& p) const {
        return pack(coord(p.x()), coord(p.y()), coord(p.z()));
    }
    double cell_;
    std::unordered_map<std::uint64_t, std::vector<Eigen::Vector3d>> cells_;
};

bool interpenetrates(const PointGrid& anchor_grid, const PointCloud& function, const Pose& motion,
                     double clearance) {
    for (const auto& p : function.points)
        if (anchor_grid.any_within(motion.apply(p), clearance)) return true;
    return false;
}

double tilt_window_score(double angle_deg, const OracleParams& params) {
    if (angle_deg >= params.tilt_lo_deg && angle_deg <= params.tilt_hi_deg) return 1.0;
    const double outside = angle_deg < params.tilt_lo_deg ? params.tilt_lo_deg - angle_deg
                                                          : angle_deg - params.tilt_hi_deg;
    return std::max(0.0, 1.0 - outside / params.tilt_falloff_deg);
}

void require_part(const PointCloud& c, const std::string& part) {
    if (!c.has_part(part))
        throw PartMissingError("no '" + part + "' points in " + c.category);
}

}  // namespace

double oracle(Relation relation, const PointCloud& anchor, const PointCloud& function,
              const TrajectorySpec& poses, const OracleParams& params) {
    const Pose motion = function_motion(anchor, function, poses.end());
    switch (relation) {
        case Relation::Align: {
            const Eigen::Vector3d rim_a = anchor.part_centroid("rim");
            const Eigen::Vector3d rim_f = motion.apply(function.part_centroid("rim"));
            if (rim_f.z() <= rim_a.z()) return 0.0;
            const double lat = (rim_f - rim_a).head<2>().norm();
            return std::exp(-lat * lat / (2.0 * params.align_sigma * params.align_sigma));
        }
        case Relation::Tilt: {
            require_part(anchor, "body");
            require_part(function, "body");
            const Eigen::Vector3d axis_end = motion.rotation * object_axis(function);
            const double angle = rad2deg(std::acos(std::clamp(axis_end.z(), -1.0, 1.0)));
            return tilt_window_score(angle, params);
        }
        case Relation::FacingUp: {
            require_part(anchor, "body");
            const Eigen::Vector3d handle = function.part_centroid("handle");
            const Eigen::Vector3d body = function.part_centroid("body");
            const Eigen::Vector3d axis_end = motion.rotation * object_axis(function);
            Eigen::Vector3d h = motion.rotation * (handle - body);
            h -= axis_end.dot(h) * axis_end;  // keep the component around the axis
            const Eigen::Vector2d h2 = h.head<2>();
            const Eigen::Vector2d pour = axis_end.head<2>();
            if (h2.norm() < 1e-9 || pour.norm() < 1e-9) return 0.0;
            return std::max(0.0, -h2.normalized().dot(pour.normalized()));
        }
        case Relation::Contain: {
            const auto body = part_points(anchor, "body");
            const auto head = part_points(function, "head");
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (const auto& p : body) c += p;
            c /= static_cast<double>(body.size());
            double radius = 0.0, z_lo = body.front().z(), z_hi = body.front().z();
            for (const auto& p : body) {
                radius = std::max(radius, (p - c).head<2>().norm());
                z_lo = std::min(z_lo, p.z());
                z_hi = std::max(z_hi, p.z());
            }
            std::size_t inside = 0;
            for (const auto& p : head) {
                const Eigen::Vector3d q = motion.apply(p);
                if ((q - c).head<2>().norm() <= radius && q.z() >= z_lo && q.z() <= z_hi)
                    ++inside;
            }
            return static_cast<double>(inside) / static_cast<double>(head.size());
        }
        case Relation::Touch: {
            const double zb = bottom_plane_z(anchor);
            const auto tip = part_points(function, "tip");
            double d = std::abs(motion.apply(tip.front()).z() - zb);
            for (const auto& p : tip) d = std::min(d, std::abs(motion.apply(p).z() - zb));
            return std::exp(-d * d / (2.0 * params.touch_sigma * params.touch_sigma));
        }
        case Relation::Place: {
            require_part(anchor, "body");
            require_part(function, "body");
            const Eigen::Vector3d axis_a = object_axis(anchor);
            const Eigen::Vector3d axis_f = motion.rotation * object_axis(function);
            return std::max(0.0, axis_a.dot(axis_f));
        }
    }
    return 0.0;
}

OracleResult score_poses(const PointCloud& anchor, const PointCloud& function,
                         const TaskDefinition& task, const TrajectorySpec& poses,
                         const OracleParams& params) {
    OracleResult result;
    const PointGrid grid(anchor.points, params.clearance);
    for (const Pose& waypoint : poses.poses) {
        if (interpenetrates(grid, function, function_motion(anchor, function, waypoint),
                            params.clearance)) {
            result.interpenetration = true;
            break;
        }
    }
    double sum = 0.0;
    std::size_t present = 0;
    bool all_pass = true;
    for (const CorrespondenceSpec& spec : task.correspondences) {
        try {
            const double s = oracle(spec.relation, anchor, function, poses, params);
            result.per_constraint[to_string(spec.relation)] = s;
            sum += s;
            ++present;
            if (s < 0.7) all_pass = false;
        } catch (const PartMissingError&) {
            result.skipped.push_back(to_string(spec.relation));
        }
    }
    if (result.interpenetration || present == 0) {
        result.overall = 0.0;
        result.success = false;
        return result;
    }
    result.overall = 100.0 * sum / static_cast<double>(present);
    result.success = all_pass;
    return result;
}

// ---------------------------------------------------------------------------
// Demonstration generator

namespace {

struct RejectAttempt {};

Eigen::Matrix3d rot_z(double a) {
    return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Matrix3d rot_axis(const Eigen::Vector3d& axis, double a) {
    return Eigen::AngleAxisd(a, axis.normalized()).toRotationMatrix();
}

double rotation_angle(const Eigen::Matrix3d& r) {
    return std::acos(std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0));
}

PointCloud transformed(const PointCloud& c, const Eigen::Matrix3d& r,
                       const Eigen::Vector3d& t) {
    PointCloud out = c;
    for (auto& p : out.points) p = r * p + t;
    return out;
}

Pose relative_pose(const PointCloud& anchor, const PointCloud& function,
                   const Eigen::Matrix3d& r_w, const Eigen::Vector3d& t_w) {
    // T_AF from the world-frame motion (R_w, t_w) of the function cloud.
    Pose t_af;
    t_af.rotation = r_w;
    t_af.translation = r_w * function.centroid() + t_w - anchor.centroid();
    return t_af;
}

struct Placement {
    PointCloud cloud;
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

Placement place_function_object(const ObjectSpec& spec, const PointCloud& canonical, Rng& rng) {
    Placement out;
    const double yaw = rng.uniform(0.0, kTwoPi);
    const double beta = rng.uniform(0.0, kTwoPi);
    const double dist = rng.uniform(0.28, 0.45);
    if (spec.is_stick()) {
        // sticks rest on their side
        out.r = rot_z(yaw) *
                Eigen::AngleAxisd(0.5 * kPi, Eigen::Vector3d::UnitX()).toRotationMatrix();
        out.t = {dist * std::cos(beta), dist * std::sin(beta), spec.head_radius};
    } else {
        out.r = rot_z(yaw);
        out.t = {dist * std::cos(beta), dist * std::sin(beta), 0.0};
    }
    out.cloud = transformed(canonical, out.r, out.t);
    return out;
}

Demonstration attempt_pour(const TaskDefinition& task, const ObjectSpec& anchor_spec,
                           const ObjectSpec& function_spec, std::uint64_t seed, Rng& rng,
                           const OracleParams& params) {
    PointCloud anchor = gen_object(anchor_spec, rng);
    const PointCloud function_canonical = gen_object(function_spec, rng);
    const Placement placed = place_function_object(function_spec, function_canonical, rng);
    const PointCloud& function = placed.cloud;

    const Eigen::Vector3d rim_a = anchor.part_centroid("rim");
    const Eigen::Vector3d rim_f = function.part_centroid("rim");

    const double azimuth = rng.uniform(0.0, kTwoPi);
    const double tilt = rng.uniform(deg2rad(100.0), deg2rad(130.0));
    double spin;
    if (function.has_part("handle")) {
        const Eigen::Vector3d h = function.part_centroid("handle") - function.centroid();
        spin = azimuth - std::atan2(h.y(), h.x());
    } else {
        spin = rng.uniform(0.0, kTwoPi);
    }
    Eigen::Vector2d lateral(rng.normal() * 0.0015, rng.normal() * 0.0015);
    lateral = lateral.cwiseMax(-0.003).cwiseMin(0.003);
    const double rim_dz = rng.uniform(0.008, 0.025);
    const double start_lift = function_spec.height + rng.uniform(0.03, 0.08);

    const Eigen::Vector3d tilt_axis(-std::sin(azimuth), std::cos(azimuth), 0.0);
    const Eigen::Matrix3d r_end = rot_axis(tilt_axis, tilt) * rot_z(spin);
    const Eigen::Vector3d rim_target = rim_a + Eigen::Vector3d(lateral.x(), lateral.y(), rim_dz);
    const Eigen::Vector3d t_end = rim_target - r_end * rim_f;

    const Eigen::Matrix3d r_start = rot_z(spin);
    const Eigen::Vector3d t_start = rim_a + Eigen::Vector3d(0, 0, start_lift) - r_start * rim_f;

    if (rotation_angle(r_end) > 2.9 || rotation_angle(r_start) > 2.9) throw RejectAttempt{};

    Demonstration demo;
    demo.seed = seed;
    demo.task = task.name;
    demo.anchor = std::move(anchor);
    demo.function = function;
    demo.gt_poses.start() = relative_pose(demo.anchor, demo.function, r_start, t_start);
    demo.gt_poses.end() = relative_pose(demo.anchor, demo.function, r_end, t_end);
    demo.free_params = {{"azimuth", azimuth},
                        {"tilt_deg", rad2deg(tilt)},
                        {"spin", spin},
                        {"rim_dz", rim_dz},
                        {"start_lift", start_lift},
                        {"lateral", {lateral.x(), lateral.y()}}};

    const OracleResult check = score_poses(demo.anchor, demo.function, task, demo.gt_poses, params);
    if (!check.success || check.overall < 95.0) throw RejectAttempt{};
    auto align_it = check.per_constraint.find("align");
    if (align_it == check.per_constraint.end() || align_it->second < 0.95) throw RejectAttempt{};
    return demo;
}

Demonstration attempt_place(const TaskDefinition& task, const ObjectSpec& anchor_spec,
                            const ObjectSpec& function_spec, std::uint64_t seed, Rng& rng,
                            const OracleParams& params) {
    PointCloud anchor = gen_object(anchor_spec, rng);
    const PointCloud function_canonical = gen_object(function_spec, rng);
    const Placement placed = place_function_object(function_spec, function_canonical, rng);
    const PointCloud& function = placed.cloud;

    const double zb = bottom_plane_z(anchor);
    const auto opening = part_points(anchor, "opening");
    double z_open = opening.front().z();
    for (const auto& p : opening) z_open = std::max(z_open, p.z());
    const Eigen::Vector3d body_c = anchor.part_centroid("body");

    const double spin = rng.uniform(0.0, kTwoPi);
    Eigen::Vector2d lateral(rng.normal() * 0.0015, rng.normal() * 0.0015);
    lateral = lateral.cwiseMax(-0.004).cwiseMin(0.004);
    const double gap = rng.uniform(0.0022, 0.0026);
    const double clearance_start = rng.uniform(0.03, 0.08);

    // canonical tip apex is the origin; its observed position is placed.t
    const Eigen::Vector3d tip_obs = placed.t;
    const Eigen::Matrix3d r_end = rot_z(spin) * placed.r.transpose();
    const Eigen::Vector3d tip_target(body_c.x() + lateral.x(), body_c.y() + lateral.y(),
                                     zb + gap);
    const Eigen::Vector3d t_end = tip_target - r_end * tip_obs;
    const Eigen::Vector3d tip_start(tip_target.x(), tip_target.y(), z_open + clearance_start);
    const Eigen::Vector3d t_start = tip_start - r_end * tip_obs;

    if (rotation_angle(r_end) > 2.9) throw RejectAttempt{};

    Demonstration demo;
    demo.seed = seed;
    demo.task = task.name;
    demo.anchor = std::move(anchor);
    demo.function = function;
    demo.gt_poses.start() = relative_pose(demo.anchor, demo.function, r_end, t_start);
    demo.gt_poses.end() = relative_pose(demo.anchor, demo.function, r_end, t_end);
    demo.free_params = {{"spin", spin},
                        {"gap", gap},
                        {"start_clearance", clearance_start},
                        {"lateral", {lateral.x(), lateral.y()}}};

    const OracleResult check = score_poses(demo.anchor, demo.function, task, demo.gt_poses, params);
    if (!check.success || check.overall < 95.0) throw RejectAttempt{};
    return demo;
}

}  // namespace

Demonstration gen_demonstration(const TaskDefinition& task, const ObjectSpec& anchor_spec,
                                const ObjectSpec& function_spec, std::uint64_t seed,
                                const OracleParams& params) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Rng rng(derive_seed(seed, "attempt", static_cast<std::uint64_t>(attempt)));
        try {
            if (task.name == "pour")
                return attempt_pour(task, anchor_spec, function_spec, seed, rng, params);
            if (task.name == "place")
                return attempt_place(task, anchor_spec, function_spec, seed, rng, params);
            throw ArgumentError("gen_demonstration: unknown task " + task.name);
        } catch (const RejectAttempt&) {
        } catch (const PartMissingError&) {
        } catch (const AngleNearPiError&) {
        }
    }
    throw GenerationFailedError("no valid demonstration after 100 attempts (task " + task.name +
                                ", anchor " + anchor_spec.category + ", function " +
                                function_spec.category + ")");
}

std::vector<Demonstration> gen_dataset(const std::string& task_name, std::size_t n,
                                       std::uint64_t master_seed, const CategoryTable& table,
                                       int jobs, const OracleParams& params) {
    const TaskDefinition& task = task_by_name(task_name);
    std::vector<Demonstration> demos(n);
    parallel_chunks(n, jobs, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const std::uint64_t dseed = derive_seed(master_seed, "demo", i);
            Rng srng(derive_seed(dseed, "specs"));
            bool done = false;
            for (int pair_try = 0; pair_try < 200 && !done; ++pair_try) {
                ObjectSpec a_spec, f_spec;
                if (task.name == "pour") {
                    const auto anchors = pour_anchor_families();
                    const auto functions = pour_function_families();
                    a_spec = sample_object_spec(
                        anchors[static_cast<std::size_t>(srng.uniform_int(
                            0, static_cast<std::int64_t>(anchors.size()) - 1))],
                        table, srng);
                    f_spec = sample_object_spec(
                        functions[static_cast<std::size_t>(srng.uniform_int(
                            0, static_cast<std::int64_t>(functions.size()) - 1))],
                        table, srng);
                    if (f_spec.rim_radius > 1.1 * a_spec.rim_radius) continue;
                } else {
                    a_spec = sample_object_spec("container-like", table, srng);
                    f_spec = sample_object_spec("stick-like", table, srng);
                    if (f_spec.stick_length > 0.85 * a_spec.height) continue;
                }
                try {
                    demos[i] = gen_demonstration(task, a_spec, f_spec,
                                                 derive_seed(dseed, "gen", pair_try), params);
                    demos[i].uid = i;
                    done = true;
                } catch (const GenerationFailedError&) {
                }
            }
            if (!done)
                throw GenerationFailedError("record " + std::to_string(i) +
                                            ": no compatible spec pair produced a demo");
        }
    });
    return demos;
}

}  // namespace cpm
