#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cpm/dataset.hpp"
#include "cpm/denoiser.hpp"
#include "cpm/schedule.hpp"
#include "cpm/task.hpp"

namespace cpm {

// Forward noising on the 12 tangent coordinates:
//   sqrt(abar_t) * xi0 + sqrt(1 - abar_t) * eps.
TwistPair q_sample(const TwistPair& xi0, int t, const TwistPair& eps, const NoiseSchedule& sched);

struct ReverseOptions {
    double sigma_scale = 1.0;          // 0 for deterministic chains
    bool literal_inverse_alpha = false;  // 1/alpha_t instead of 1/sqrt(alpha_t)
};

// One ancestral update from step t to t-1; no fresh noise at t = 1.
TwistPair reverse_step(const TwistPair& noisy, const TwistPair& noise_sum, int t, Rng& rng,
                       const NoiseSchedule& sched, const ReverseOptions& opts = {});

// Part-frame tangent noise expressed in the object frame: the rotation
// block of the anchor-side frame change applied to omega and v separately.
// Identity whenever part frames share the world orientation.
Twist transport_noise_to_object(const Twist& eps_part, const Eigen::Matrix3d& r_left);

// Shrinks the rotation vector just enough to keep exp(xi) clear of the log
// branch point at pi. Chain states pass through exp/log every step.
Twist nudge_twist_from_pi(Twist xi);

// Noise source for the reverse chain. Implementations receive and return
// part-frame twists.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual TwistPair predict(const TwistPair& part_twists, int t) = 0;
};

// Denoiser-backed predictor; part features are encoded once and reused for
// every diffusion step.
class ModelPredictor : public NoisePredictor {
public:
    ModelPredictor(const DenoiserModel& model, const PartCloud& anchor, const PartCloud& function);
    TwistPair predict(const TwistPair& part_twists, int t) override;

private:
    const DenoiserModel* model_;
    ad::Array anchor_feat_, function_feat_;
};

// Analytic denoiser: returns the exact noise implied by a known clean
// target, (xi_t - sqrt(abar) xi0) / sqrt(1 - abar). Test harness for the
// reverse chain.
class OraclePredictor : public NoisePredictor {
public:
    OraclePredictor(TwistPair xi0_part, const NoiseSchedule& sched)
        : xi0_(xi0_part), sched_(&sched) {}
    TwistPair predict(const TwistPair& part_twists, int t) override;

private:
    TwistPair xi0_;
    const NoiseSchedule* sched_;
};

// One correspondence prepared for sampling: extracted part clouds turned
// into frame offsets plus a predictor.
struct SamplerConstraint {
    std::string label;  // relation name, for diagnostics
    Pose t_a_pa;        // anchor object frame -> anchor part frame
    Pose t_f_pf;        // function object frame -> function part frame
    std::shared_ptr<NoisePredictor> predictor;
};

struct SampleOptions {
    ReverseOptions reverse;
    bool average_over_constraints = false;  // 1/K scaling of the noise sum
};

// Reverse chain over object-frame twists. Each step converts the state to
// every constraint's part frame (exp, frame change, log), sums the
// transported noise predictions and applies one reverse_step. Draws 12
// normals for the init plus 12 per step with fresh noise.
TrajectorySpec sample_trajectory(const std::vector<SamplerConstraint>& constraints, Rng& rng,
                                 const NoiseSchedule& sched, const SampleOptions& opts = {});

// Deterministic per-demo part extraction; training and sampling must see
// identical part clouds, so the stream is derived from the demo seed and
// the part name only.
PartCloud demo_part(const Demonstration& demo, bool anchor_side, const std::string& part);
PartCloud demo_whole(const Demonstration& demo, bool anchor_side);

// Frame offset of a part cloud relative to its object's centroid frame.
Pose part_offset(const PointCloud& object, const PartCloud& part);

struct ConstraintBuild {
    std::vector<SamplerConstraint> constraints;
    std::vector<std::string> skipped;  // relations dropped for missing parts
};

// Builds sampler constraints for a task. Missing parts soft-skip their
// correspondence; an absent model raises NoModelForRelationError; all
// correspondences skipped raises AllPartsMissingError.
ConstraintBuild build_constraints(const Demonstration& demo, const TaskDefinition& task,
                                  const std::map<Relation, const DenoiserModel*>& models);

// Single whole-object constraint for the monolithic baseline.
ConstraintBuild build_monolithic_constraint(const Demonstration& demo,
                                            const DenoiserModel& model);

}  // namespace cpm
