#include "cpm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cpm/errors.hpp"
#include "cpm/parallel.hpp"

namespace cpm {

using ad::Array;
using ad::ParamMap;
using ad::Tape;
using ad::Tensor;

namespace {

TwistPair draw_twist_pair(Rng& rng) {
    TwistPair eps;
    for (int n = 0; n < 2; ++n) {
        for (int i = 0; i < 3; ++i) eps[n].omega(i) = rng.normal();
        for (int i = 0; i < 3; ++i) eps[n].v(i) = rng.normal();
    }
    return eps;
}

Array rows_from_twists(const TwistPair& tp) {
    Array a({2, 6});
    for (int n = 0; n < 2; ++n) {
        auto c = tp[static_cast<std::size_t>(n)].coords();
        for (int i = 0; i < 6; ++i) a[static_cast<std::size_t>(6 * n + i)] = c(i);
    }
    return a;
}

ParamMap collect_grads(Tape& tape, const DenoiserModel::Lifted& L) {
    ParamMap g;
    for (const auto& [name, tensor] : L.p) g.emplace(name, tape.grad(tensor.index()));
    return g;
}

// Both maps always carry identical keys (one entry per model parameter).
void accumulate(ParamMap& into, const ParamMap& from) {
    auto a = into.begin();
    auto b = from.begin();
    for (; a != into.end() && b != from.end(); ++a, ++b)
        for (std::size_t i = 0; i < b->second.numel(); ++i) a->second[i] += b->second[i];
}

void scale_params(ParamMap& m, double s) {
    for (auto& [name, a] : m)
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] *= s;
}

ParamMap zeros_like(const ParamMap& p) {
    ParamMap z;
    for (const auto& [name, a] : p) z.emplace(name, Array(a.shape(), 0.0));
    return z;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "train/shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
        auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

Tensor example_loss(Tape& tape, const DenoiserModel& model, const DenoiserModel::Lifted& L,
                    const TrainingExample& ex, int t, const TwistPair& eps,
                    const NoiseSchedule& sched, const TrainOptions& opts) {
    TwistPair noisy = q_sample(ex.xi0, t, eps, sched);
    Tensor pred = model.predict_noise_t(tape, L, ex.anchor_part, ex.function_part, noisy, t);
    Array target = rows_from_twists(eps);
    return opts.use_mse ? mse_loss(pred, target) : huber_loss(pred, target, opts.huber_delta);
}

}  // namespace

TrainingExample make_training_example(const Demonstration& demo, const CorrespondenceSpec& spec) {
    TrainingExample ex;
    ex.anchor_part = demo_part(demo, true, spec.anchor_part);
    ex.function_part = demo_part(demo, false, spec.function_part);
    const Pose off_a = part_offset(demo.anchor, ex.anchor_part);
    const Pose off_f = part_offset(demo.function, ex.function_part);
    for (int n = 0; n < 2; ++n)
        ex.xi0[n] = log_map(to_part_frame(demo.gt_poses.poses[static_cast<std::size_t>(n)],
                                          off_a, off_f));
    return ex;
}

TrainingExample make_monolithic_example(const Demonstration& demo) {
    TrainingExample ex;
    ex.anchor_part = demo_whole(demo, true);
    ex.function_part = demo_whole(demo, false);
    const Pose off_a = part_offset(demo.anchor, ex.anchor_part);
    const Pose off_f = part_offset(demo.function, ex.function_part);
    for (int n = 0; n < 2; ++n)
        ex.xi0[n] = log_map(to_part_frame(demo.gt_poses.poses[static_cast<std::size_t>(n)],
                                          off_a, off_f));
    return ex;
}

double training_step(DenoiserModel& model, ad::AdamState& opt, const Demonstration& demo,
                     const CorrespondenceSpec& spec, Rng& rng, const NoiseSchedule& sched,
                     bool use_mse, double huber_delta) {
    TrainingExample ex = make_training_example(demo, spec);
    const int t = static_cast<int>(rng.uniform_int(1, sched.T));
    const TwistPair eps = draw_twist_pair(rng);
    Tape tape;
    DenoiserModel::Lifted L = model.lift(tape, true);
    TrainOptions o;
    o.use_mse = use_mse;
    o.huber_delta = huber_delta;
    Tensor loss = example_loss(tape, model, L, ex, t, eps, sched, o);
    tape.backward(loss);
    ParamMap grads = collect_grads(tape, L);
    opt.step(model.params(), grads);
    return loss.value().item();
}

std::vector<LossLogRow> train_model(DenoiserModel& model,
                                    const std::vector<TrainingExample>& examples,
                                    const NoiseSchedule& sched, const TrainOptions& opts) {
    if (examples.empty()) throw ArgumentError("train_model: no training examples");
    ad::AdamState opt({opts.lr, 0.9, 0.999, 1e-8, opts.clip});
    std::vector<LossLogRow> log;
    const std::size_t n = examples.size();
    const auto batch = static_cast<std::size_t>(std::max(1, opts.batch));
    int step = 0;
    std::uint64_t draw_counter = 0;

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        const auto order = epoch_order(n, opts.seed, epoch);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t m = std::min(batch, n - start);
            struct Draw {
                int t;
                TwistPair eps;
            };
            std::vector<Draw> draws(m);
            for (std::size_t s = 0; s < m; ++s) {
                Rng r(derive_seed(opts.seed, "train/draw", draw_counter++));
                draws[s].t = static_cast<int>(r.uniform_int(1, sched.T));
                draws[s].eps = draw_twist_pair(r);
            }
            std::vector<ParamMap> grads(m);
            std::vector<double> losses(m, 0.0);
            parallel_chunks(m, opts.jobs, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t s = lo; s < hi; ++s) {
                    const TrainingExample& ex = examples[order[start + s]];
                    Tape tape;
                    DenoiserModel::Lifted L = model.lift(tape, true);
                    Tensor loss =
                        example_loss(tape, model, L, ex, draws[s].t, draws[s].eps, sched, opts);
                    tape.backward(loss);
                    losses[s] = loss.value().item();
                    grads[s] = collect_grads(tape, L);
                }
            });
            ParamMap avg = std::move(grads[0]);
            for (std::size_t s = 1; s < m; ++s) accumulate(avg, grads[s]);
            scale_params(avg, 1.0 / static_cast<double>(m));
            opt.step(model.params(), avg);

            double mean_loss = 0.0;
            for (double l : losses) mean_loss += l;
            mean_loss /= static_cast<double>(m);
            if (step % std::max(1, opts.log_every) == 0) log.push_back({step, mean_loss});
            ++step;
        }
    }
    return log;
}

JointExample make_joint_example(const Demonstration& demo, const TaskDefinition& task) {
    JointExample ex;
    for (int n = 0; n < 2; ++n)
        ex.xi0_object[n] = log_map(demo.gt_poses.poses[static_cast<std::size_t>(n)]);
    for (std::size_t c = 0; c < task.correspondences.size(); ++c) {
        const CorrespondenceSpec& spec = task.correspondences[c];
        JointMember member;
        member.model_index = static_cast<int>(c);
        try {
            member.anchor_part = demo_part(demo, true, spec.anchor_part);
            member.function_part = demo_part(demo, false, spec.function_part);
        } catch (const PartMissingError&) {
            continue;
        }
        member.t_a_pa = part_offset(demo.anchor, member.anchor_part);
        member.t_f_pf = part_offset(demo.function, member.function_part);
        ex.members.push_back(std::move(member));
    }
    if (ex.members.empty()) throw AllPartsMissingError("joint example with no usable parts");
    return ex;
}

std::vector<LossLogRow> train_joint(std::vector<DenoiserModel*> models,
                                    const std::vector<JointExample>& examples,
                                    const NoiseSchedule& sched, const TrainOptions& opts) {
    if (examples.empty()) throw ArgumentError("train_joint: no training examples");
    // Shared optimizer semantics: one global-norm clip across all models,
    // then per-model Adam with clipping already applied.
    ad::AdamConfig acfg{opts.lr, 0.9, 0.999, 1e-8, 0.0};
    std::vector<ad::AdamState> opt_states(models.size(), ad::AdamState(acfg));
    std::vector<LossLogRow> log;
    const std::size_t n = examples.size();
    const auto batch = static_cast<std::size_t>(std::max(1, opts.batch));
    int step = 0;
    std::uint64_t draw_counter = 0;

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        const auto order = epoch_order(n, opts.seed, epoch);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t m = std::min(batch, n - start);
            struct Draw {
                int t;
                TwistPair eps;
            };
            std::vector<Draw> draws(m);
            for (std::size_t s = 0; s < m; ++s) {
                Rng r(derive_seed(opts.seed, "train/draw", draw_counter++));
                draws[s].t = static_cast<int>(r.uniform_int(1, sched.T));
                draws[s].eps = draw_twist_pair(r);
            }
            // grads[s][model] for strict member-order accumulation
            std::vector<std::vector<ParamMap>> grads(m);
            std::vector<double> losses(m, 0.0);
            parallel_chunks(m, opts.jobs, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t s = lo; s < hi; ++s) {
                    const JointExample& ex = examples[order[start + s]];
                    TwistPair noisy = q_sample(ex.xi0_object, draws[s].t, draws[s].eps, sched);
                    Tape tape;
                    std::vector<DenoiserModel::Lifted> lifted;
                    lifted.reserve(models.size());
                    for (DenoiserModel* mod : models) lifted.push_back(mod->lift(tape, true));
                    Tensor sum;
                    bool have = false;
                    for (int w = 0; w < 2; ++w) noisy[w] = nudge_twist_from_pi(noisy[w]);
                    for (const JointMember& member : ex.members) {
                        TwistPair part_twists;
                        for (int w = 0; w < 2; ++w)
                            part_twists[w] = log_map(to_part_frame(
                                exp_map(noisy[w]), member.t_a_pa, member.t_f_pf));
                        const auto mi = static_cast<std::size_t>(member.model_index);
                        Tensor pred = models[mi]->predict_noise_t(
                            tape, lifted[mi], member.anchor_part, member.function_part,
                            part_twists, draws[s].t);
                        sum = have ? add(sum, pred) : pred;
                        have = true;
                    }
                    Array target = rows_from_twists(draws[s].eps);
                    Tensor loss = opts.use_mse ? mse_loss(sum, target)
                                               : huber_loss(sum, target, opts.huber_delta);
                    tape.backward(loss);
                    losses[s] = loss.value().item();
                    grads[s].reserve(models.size());
                    for (const auto& L : lifted) grads[s].push_back(collect_grads(tape, L));
                }
            });
            std::vector<ParamMap> avg;
            avg.reserve(models.size());
            for (std::size_t k = 0; k < models.size(); ++k) {
                ParamMap acc = std::move(grads[0][k]);
                for (std::size_t s = 1; s < m; ++s) accumulate(acc, grads[s][k]);
                scale_params(acc, 1.0 / static_cast<double>(m));
                avg.push_back(std::move(acc));
            }
            double sq = 0.0;
            for (const ParamMap& g : avg) {
                double nm = ad::global_norm(g);
                sq += nm * nm;
            }
            const double norm = std::sqrt(sq);
            if (opts.clip > 0.0 && norm > opts.clip)
                for (ParamMap& g : avg) scale_params(g, opts.clip / norm);
            for (std::size_t k = 0; k < models.size(); ++k)
                opt_states[k].step(models[k]->params(), avg[k]);

            double mean_loss = 0.0;
            for (double l : losses) mean_loss += l;
            mean_loss /= static_cast<double>(m);
            if (step % std::max(1, opts.log_every) == 0) log.push_back({step, mean_loss});
            ++step;
        }
    }
    return log;
}

void write_loss_csv(const std::string& path, const std::vector<LossLogRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open loss log for writing: " + path);
    out << "step,loss\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g\n", row.step, row.loss);
        out << buf;
    }
}

}  // namespace cpm
