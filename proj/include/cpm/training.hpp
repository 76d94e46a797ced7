#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpm/diffusion.hpp"

namespace cpm {

// One prepared supervision pair: conditioning part clouds plus the clean
// part-frame twists the forward process noises.
struct TrainingExample {
    PartCloud anchor_part;
    PartCloud function_part;
    TwistPair xi0;
};

// Extracts the correspondence's parts (PartMissingError if absent) and
// converts the ground-truth poses into that part frame.
TrainingExample make_training_example(const Demonstration& demo, const CorrespondenceSpec& spec);

// Whole objects, object-frame twists; supervision for the monolithic
// baseline.
TrainingExample make_monolithic_example(const Demonstration& demo);

struct TrainOptions {
    int epochs = 2000;  // architecture default; desk profiles override downward
    int batch = 16;
    int jobs = 2;
    double lr = 1e-4;
    double clip = 1.0;
    bool use_mse = false;  // Huber with delta 1 unless flipped
    double huber_delta = 1.0;
    int log_every = 100;
    std::uint64_t seed = 0;
};

struct LossLogRow {
    int step;
    double loss;
};

// Single-example training step: extract, noise, predict, loss, backward,
// Adam. Returns the loss. Unit-level entry point; the batched driver below
// is what cmd-train uses.
double training_step(DenoiserModel& model, ad::AdamState& opt, const Demonstration& demo,
                     const CorrespondenceSpec& spec, Rng& rng, const NoiseSchedule& sched,
                     bool use_mse = false, double huber_delta = 1.0);

// Batched training driver. Gradients of a batch are averaged strictly in
// member order, so results are bit-reproducible for a fixed seed
// regardless of the worker count.
std::vector<LossLogRow> train_model(DenoiserModel& model, const std::vector<TrainingExample>& examples,
                                    const NoiseSchedule& sched, const TrainOptions& opts);

// Train-time composition: every model evaluates its part-frame view of the
// same noisy object-frame twists, predictions are transported back and
// summed, and one shared optimizer updates all models jointly.
struct JointMember {
    int model_index;  // into the models span
    PartCloud anchor_part;
    PartCloud function_part;
    Pose t_a_pa, t_f_pf;
};
struct JointExample {
    TwistPair xi0_object;
    std::vector<JointMember> members;
};

JointExample make_joint_example(const Demonstration& demo, const TaskDefinition& task);

std::vector<LossLogRow> train_joint(std::vector<DenoiserModel*> models,
                                    const std::vector<JointExample>& examples,
                                    const NoiseSchedule& sched, const TrainOptions& opts);

void write_loss_csv(const std::string& path, const std::vector<LossLogRow>& rows);

}  // namespace cpm
