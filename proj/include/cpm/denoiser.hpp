#pragma once

#include <array>
#include <map>
#include <string>

#include <json.hpp>

#include "cpm/autodiff.hpp"
#include "cpm/cloud.hpp"
#include "cpm/optim.hpp"
#include "cpm/rng.hpp"
#include "cpm/se3.hpp"

namespace cpm {

using TwistPair = std::array<Twist, 2>;

struct DenoiserConfig {
    int n_points = 512;
    int point_feat_dim = 200;  // part encoder output
    int pos_emb_dim = 16;      // learned position embedding
    int time_emb_dim = 40;     // sinusoidal step embedding
    int pose_feat_dim = 200;   // pose encoder output
    int layers = 4;
    int heads = 4;
    int hidden_dim = 128;  // transformer feed-forward inner width
    int n_poses = 2;

    // Part encoder internals: per-point MLP widths and the attention
    // bottleneck. The contract downstream code relies on is permutation
    // invariance and the point_feat_dim output width.
    int point_mlp1 = 64;
    int point_mlp2 = 128;
    int point_attn_dim = 32;
    int pose_hidden = 128;

    // Common width of part and pose tokens; construction-time error if the
    // two token kinds disagree.
    int token_width() const;

    static DenoiserConfig standard() { return {}; }
    // Desk-size config for gradient checking: 16 points, hidden 32.
    static DenoiserConfig reduced();

    nlohmann::json to_json() const;
    static DenoiserConfig from_json(const nlohmann::json& j);
};

// Interleaved sin/cos of t at geometric frequencies with divisors spanning
// [1, 10000]; entry 0 is sin(t), entry 1 cos(t).
std::vector<double> time_embedding(int t, int dim);

// One primitive denoiser: part encoders, pose/time/position embeddings, a
// small transformer trunk and a shared linear head that reads the pose
// tokens out as tangent-space noise.
class DenoiserModel {
public:
    DenoiserModel() = default;

    static DenoiserModel init(const DenoiserConfig& cfg, std::string relation, Rng& rng);

    const DenoiserConfig& config() const { return cfg_; }
    const std::string& relation() const { return relation_; }
    ad::ParamMap& params() { return params_; }
    const ad::ParamMap& params() const { return params_; }

    struct Lifted {
        std::map<std::string, ad::Tensor> p;
        const ad::Tensor& at(const std::string& name) const { return p.at(name); }
    };
    // Parameters as tape leaves; train=true makes them differentiable.
    Lifted lift(ad::Tape& tape, bool train) const;

    ad::Tensor encode_part_t(ad::Tape& tape, const Lifted& L, const PartCloud& pc) const;
    ad::Tensor encode_pose_t(ad::Tape& tape, const Lifted& L, const Twist& xi) const;

    // Full forward on a tape: four 256-wide tokens (anchor part, function
    // part, two poses) with position indices 0..3 and a shared time
    // embedding, the transformer trunk, then the head on the pose tokens.
    // Returns (n_poses, 6).
    ad::Tensor predict_noise_t(ad::Tape& tape, const Lifted& L, const PartCloud& anchor,
                               const PartCloud& function, const TwistPair& twists, int t) const;
    // Same, but with precomputed part features (sampling reuses them
    // across all diffusion steps).
    ad::Tensor predict_noise_feat_t(ad::Tape& tape, const Lifted& L,
                                    const ad::Array& anchor_feat, const ad::Array& function_feat,
                                    const TwistPair& twists, int t) const;

    // Inference conveniences on a scratch tape.
    ad::Array encode_part_features(const PartCloud& pc) const;
    TwistPair predict_noise(const PartCloud& anchor, const PartCloud& function,
                            const TwistPair& twists, int t) const;
    TwistPair predict_noise_cached(const ad::Array& anchor_feat, const ad::Array& function_feat,
                                   const TwistPair& twists, int t) const;

private:
    DenoiserConfig cfg_;
    std::string relation_;
    ad::ParamMap params_;
};

void save_model(const std::string& path, const DenoiserModel& model, nlohmann::json extra_meta);
std::pair<DenoiserModel, nlohmann::json> load_model(const std::string& path);

TwistPair twists_from_rows(const ad::Array& rows2x6);

}  // namespace cpm
