#include "cpm/diffusion.hpp"

#include <cmath>
#include <numbers>

#include "cpm/errors.hpp"

namespace cpm {

TwistPair q_sample(const TwistPair& xi0, int t, const TwistPair& eps, const NoiseSchedule& sched) {
    const double a = std::sqrt(sched.alpha_bar_t(t));
    const double b = std::sqrt(1.0 - sched.alpha_bar_t(t));
    TwistPair out;
    for (int n = 0; n < 2; ++n) {
        out[n].omega = a * xi0[n].omega + b * eps[n].omega;
        out[n].v = a * xi0[n].v + b * eps[n].v;
    }
    return out;
}

TwistPair reverse_step(const TwistPair& noisy, const TwistPair& noise_sum, int t, Rng& rng,
                       const NoiseSchedule& sched, const ReverseOptions& opts) {
    const double alpha = sched.alpha_t(t);
    const double denom = opts.literal_inverse_alpha ? alpha : std::sqrt(alpha);
    const double coef = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar_t(t));
    const double sigma = t > 1 ? opts.sigma_scale * sched.sigma_t(t) : 0.0;
    TwistPair out;
    for (int n = 0; n < 2; ++n) {
        out[n].omega = (noisy[n].omega - coef * noise_sum[n].omega) / denom;
        out[n].v = (noisy[n].v - coef * noise_sum[n].v) / denom;
        if (sigma > 0.0) {
            for (int i = 0; i < 3; ++i) out[n].omega(i) += sigma * rng.normal();
            for (int i = 0; i < 3; ++i) out[n].v(i) += sigma * rng.normal();
        }
    }
    return out;
}

Twist transport_noise_to_object(const Twist& eps_part, const Eigen::Matrix3d& r_left) {
    return {r_left * eps_part.omega, r_left * eps_part.v};
}

ModelPredictor::ModelPredictor(const DenoiserModel& model, const PartCloud& anchor,
                               const PartCloud& function)
    : model_(&model),
      anchor_feat_(model.encode_part_features(anchor)),
      function_feat_(model.encode_part_features(function)) {}

TwistPair ModelPredictor::predict(const TwistPair& part_twists, int t) {
    return model_->predict_noise_cached(anchor_feat_, function_feat_, part_twists, t);
}

TwistPair OraclePredictor::predict(const TwistPair& part_twists, int t) {
    const double a = std::sqrt(sched_->alpha_bar_t(t));
    const double b = std::sqrt(1.0 - sched_->alpha_bar_t(t));
    TwistPair out;
    for (int n = 0; n < 2; ++n) {
        out[n].omega = (part_twists[n].omega - a * xi0_[n].omega) / b;
        out[n].v = (part_twists[n].v - a * xi0_[n].v) / b;
    }
    return out;
}

Twist nudge_twist_from_pi(Twist xi) {
    double norm = xi.omega.norm();
    if (norm == 0.0) return xi;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int guard = 0; guard < 4; ++guard) {
        double wrapped = std::fmod(norm, two_pi);
        if (wrapped > std::numbers::pi) wrapped = two_pi - wrapped;
        if (std::abs(wrapped - std::numbers::pi) > 2e-6) break;
        double shrunk = norm - 5e-6;
        xi.omega *= shrunk / norm;
        norm = shrunk;
    }
    return xi;
}

TrajectorySpec sample_trajectory(const std::vector<SamplerConstraint>& constraints, Rng& rng,
                                 const NoiseSchedule& sched, const SampleOptions& opts) {
    if (constraints.empty()) throw AllPartsMissingError("sample: no usable constraints");
    TwistPair xi;
    for (int n = 0; n < 2; ++n) {
        for (int i = 0; i < 3; ++i) xi[n].omega(i) = rng.normal();
        for (int i = 0; i < 3; ++i) xi[n].v(i) = rng.normal();
    }
    for (int t = sched.T; t >= 1; --t) {
        TwistPair sum;
        for (const SamplerConstraint& c : constraints) {
            TwistPair part_twists;
            for (int n = 0; n < 2; ++n) {
                xi[n] = nudge_twist_from_pi(xi[n]);
                Pose t_af = exp_map(xi[n]);
                part_twists[n] = log_map(to_part_frame(t_af, c.t_a_pa, c.t_f_pf));
            }
            TwistPair eps = c.predictor->predict(part_twists, t);
            for (int n = 0; n < 2; ++n) {
                Twist obj = transport_noise_to_object(eps[n], c.t_a_pa.rotation);
                sum[n].omega += obj.omega;
                sum[n].v += obj.v;
            }
        }
        if (opts.average_over_constraints && constraints.size() > 1) {
            const double inv = 1.0 / static_cast<double>(constraints.size());
            for (int n = 0; n < 2; ++n) {
                sum[n].omega *= inv;
                sum[n].v *= inv;
            }
        }
        xi = reverse_step(xi, sum, t, rng, sched, opts.reverse);
    }
    TrajectorySpec out;
    out.start() = exp_map(xi[0]);
    out.end() = exp_map(xi[1]);
    return out;
}

PartCloud demo_part(const Demonstration& demo, bool anchor_side, const std::string& part) {
    const PointCloud& cloud = anchor_side ? demo.anchor : demo.function;
    Rng rng(derive_seed(demo.seed, std::string("part/") + (anchor_side ? "anchor/" : "function/") +
                                       part));
    return extract_part(cloud, part, rng);
}

PartCloud demo_whole(const Demonstration& demo, bool anchor_side) {
    const PointCloud& cloud = anchor_side ? demo.anchor : demo.function;
    Rng rng(derive_seed(demo.seed, std::string("part/") + (anchor_side ? "anchor/" : "function/") +
                                       "all"));
    return whole_object_part(cloud, rng);
}

Pose part_offset(const PointCloud& object, const PartCloud& part) {
    Pose off;
    off.translation = part.frame.translation - object.centroid();
    return off;
}

ConstraintBuild build_constraints(const Demonstration& demo, const TaskDefinition& task,
                                  const std::map<Relation, const DenoiserModel*>& models) {
    ConstraintBuild out;
    for (const CorrespondenceSpec& spec : task.correspondences) {
        PartCloud anchor_part, function_part;
        try {
            anchor_part = demo_part(demo, true, spec.anchor_part);
            function_part = demo_part(demo, false, spec.function_part);
        } catch (const PartMissingError&) {
            out.skipped.push_back(to_string(spec.relation));
            continue;
        }
        auto it = models.find(spec.relation);
        if (it == models.end() || it->second == nullptr)
            throw NoModelForRelationError(std::string("no model for relation ") +
                                          to_string(spec.relation));
        SamplerConstraint c;
        c.label = to_string(spec.relation);
        c.t_a_pa = part_offset(demo.anchor, anchor_part);
        c.t_f_pf = part_offset(demo.function, function_part);
        c.predictor = std::make_shared<ModelPredictor>(*it->second, anchor_part, function_part);
        out.constraints.push_back(std::move(c));
    }
    if (out.constraints.empty())
        throw AllPartsMissingError("task " + task.name + ": every correspondence lacks parts");
    return out;
}

ConstraintBuild build_monolithic_constraint(const Demonstration& demo,
                                            const DenoiserModel& model) {
    PartCloud anchor = demo_whole(demo, true);
    PartCloud function = demo_whole(demo, false);
    ConstraintBuild out;
    SamplerConstraint c;
    c.label = "monolithic";
    c.t_a_pa = part_offset(demo.anchor, anchor);
    c.t_f_pf = part_offset(demo.function, function);
    c.predictor = std::make_shared<ModelPredictor>(model, anchor, function);
    out.constraints.push_back(std::move(c));
    return out;
}

}  // namespace cpm
