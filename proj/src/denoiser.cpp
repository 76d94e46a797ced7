#include "cpm/denoiser.hpp"

#include <cmath>

#include "cpm/checkpoint.hpp"
#include "cpm/errors.hpp"

namespace cpm {

using ad::Array;
using ad::Tape;
using ad::Tensor;
using ad::add;
using ad::concat;
using ad::layer_norm;
using ad::linear;
using ad::multi_head_attention;
using ad::reduce_max;
using ad::relu;
using ad::slice;

int DenoiserConfig::token_width() const {
    const int part = point_feat_dim + pos_emb_dim + time_emb_dim;
    const int pose = pose_feat_dim + pos_emb_dim + time_emb_dim;
    if (part != pose)
        throw ShapeMismatchError("token widths differ: part " + std::to_string(part) +
                                 " vs pose " + std::to_string(pose));
    if (part % heads != 0)
        throw ShapeMismatchError("token width " + std::to_string(part) +
                                 " not divisible by heads " + std::to_string(heads));
    return part;
}

DenoiserConfig DenoiserConfig::reduced() {
    DenoiserConfig c;
    c.n_points = 16;
    c.point_feat_dim = 24;
    c.pos_emb_dim = 8;
    c.time_emb_dim = 8;
    c.pose_feat_dim = 24;
    c.layers = 2;
    c.heads = 2;
    c.hidden_dim = 32;
    c.point_mlp1 = 16;
    c.point_mlp2 = 32;
    c.point_attn_dim = 16;
    c.pose_hidden = 32;
    return c;
}

nlohmann::json DenoiserConfig::to_json() const {
    return {{"n_points", n_points},
            {"point_feat_dim", point_feat_dim},
            {"pos_emb_dim", pos_emb_dim},
            {"time_emb_dim", time_emb_dim},
            {"pose_feat_dim", pose_feat_dim},
            {"layers", layers},
            {"heads", heads},
            {"hidden_dim", hidden_dim},
            {"n_poses", n_poses},
            {"point_mlp1", point_mlp1},
            {"point_mlp2", point_mlp2},
            {"point_attn_dim", point_attn_dim},
            {"pose_hidden", pose_hidden}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.n_points = j.at("n_points").get<int>();
    c.point_feat_dim = j.at("point_feat_dim").get<int>();
    c.pos_emb_dim = j.at("pos_emb_dim").get<int>();
    c.time_emb_dim = j.at("time_emb_dim").get<int>();
    c.pose_feat_dim = j.at("pose_feat_dim").get<int>();
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.n_poses = j.at("n_poses").get<int>();
    c.point_mlp1 = j.at("point_mlp1").get<int>();
    c.point_mlp2 = j.at("point_mlp2").get<int>();
    c.point_attn_dim = j.at("point_attn_dim").get<int>();
    c.pose_hidden = j.at("pose_hidden").get<int>();
    return c;
}

std::vector<double> time_embedding(int t, int dim) {
    const int half = dim / 2;
    std::vector<double> emb(static_cast<std::size_t>(dim), 0.0);
    for (int i = 0; i < half; ++i) {
        const double expo = half > 1 ? static_cast<double>(i) / static_cast<double>(half - 1) : 0.0;
        const double divisor = std::pow(10000.0, expo);
        emb[static_cast<std::size_t>(2 * i)] = std::sin(t / divisor);
        emb[static_cast<std::size_t>(2 * i + 1)] = std::cos(t / divisor);
    }
    return emb;
}

namespace {

Array trunc_normal(std::vector<std::size_t> shape, double std_dev, Rng& rng) {
    Array a(std::move(shape));
    for (std::size_t i = 0; i < a.numel(); ++i) {
        double z;
        do {
            z = rng.normal();
        } while (std::abs(z) > 2.0);
        a[i] = z * std_dev;
    }
    return a;
}

std::size_t u(int v) { return static_cast<std::size_t>(v); }

Array cloud_matrix(const PartCloud& pc) {
    Array x({pc.points.size(), 3});
    for (std::size_t i = 0; i < pc.points.size(); ++i) {
        x[3 * i] = pc.points[i].x();
        x[3 * i + 1] = pc.points[i].y();
        x[3 * i + 2] = pc.points[i].z();
    }
    return x;
}

Array twist_row(const Twist& xi) {
    Array x({1, 6});
    auto c = xi.coords();
    for (int i = 0; i < 6; ++i) x[u(i)] = c(i);
    return x;
}

}  // namespace

DenoiserModel DenoiserModel::init(const DenoiserConfig& cfg, std::string relation, Rng& rng) {
    cfg.token_width();  // validate
    DenoiserModel m;
    m.cfg_ = cfg;
    m.relation_ = std::move(relation);
    ad::ParamMap& p = m.params_;
    const double s = 0.02;

    auto weight = [&](const std::string& name, int rows, int cols) {
        p.emplace(name, trunc_normal({u(rows), u(cols)}, s, rng));
    };
    auto bias = [&](const std::string& name, int n) { p.emplace(name, Array({u(n)}, 0.0)); };
    auto ln = [&](const std::string& name, int n) {
        p.emplace(name + ".g", Array({u(n)}, 1.0));
        p.emplace(name + ".b", Array({u(n)}, 0.0));
    };

    weight("hp.w1", 3, cfg.point_mlp1);
    bias("hp.b1", cfg.point_mlp1);
    weight("hp.w2", cfg.point_mlp1, cfg.point_mlp2);
    bias("hp.b2", cfg.point_mlp2);
    weight("hp.wq", cfg.point_mlp2, cfg.point_attn_dim);
    weight("hp.wk", cfg.point_mlp2, cfg.point_attn_dim);
    weight("hp.wv", cfg.point_mlp2, cfg.point_attn_dim);
    weight("hp.wo", cfg.point_attn_dim, cfg.point_mlp2);
    weight("hp.wp", cfg.point_mlp2, cfg.point_feat_dim);
    bias("hp.bp", cfg.point_feat_dim);

    weight("ht.w1", 6, cfg.pose_hidden);
    bias("ht.b1", cfg.pose_hidden);
    weight("ht.w2", cfg.pose_hidden, cfg.pose_feat_dim);
    bias("ht.b2", cfg.pose_feat_dim);

    p.emplace("pos.emb", trunc_normal({u(2 + cfg.n_poses), u(cfg.pos_emb_dim)}, s, rng));

    const int w = cfg.token_width();
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string pre = "trunk." + std::to_string(l) + ".";
        weight(pre + "attn.wq", w, w);
        weight(pre + "attn.wk", w, w);
        weight(pre + "attn.wv", w, w);
        weight(pre + "attn.wo", w, w);
        ln(pre + "ln1", w);
        weight(pre + "ffn.w1", w, cfg.hidden_dim);
        bias(pre + "ffn.b1", cfg.hidden_dim);
        weight(pre + "ffn.w2", cfg.hidden_dim, w);
        bias(pre + "ffn.b2", w);
        ln(pre + "ln2", w);
    }

    weight("head.w", w, 6);
    bias("head.b", 6);
    return m;
}

DenoiserModel::Lifted DenoiserModel::lift(Tape& tape, bool train) const {
    Lifted L;
    for (const auto& [name, arr] : params_) L.p.emplace(name, tape.leaf_ref(arr, train));
    return L;
}

Tensor DenoiserModel::encode_part_t(Tape& tape, const Lifted& L, const PartCloud& pc) const {
    if (static_cast<int>(pc.points.size()) != cfg_.n_points)
        throw ShapeMismatchError("encode_part: cloud has " + std::to_string(pc.points.size()) +
                                 " points, config expects " + std::to_string(cfg_.n_points));
    Tensor x = tape.constant(cloud_matrix(pc));
    Tensor h1 = relu(linear(x, L.at("hp.w1"), L.at("hp.b1")));
    Tensor h2 = relu(linear(h1, L.at("hp.w2"), L.at("hp.b2")));
    Tensor att = multi_head_attention(h2, L.at("hp.wq"), L.at("hp.wk"), L.at("hp.wv"),
                                      L.at("hp.wo"), 1);
    Tensor h3 = add(h2, att);
    Tensor pooled = reduce_max(h3, 0);
    return linear(pooled, L.at("hp.wp"), L.at("hp.bp"));
}

Tensor DenoiserModel::encode_pose_t(Tape& tape, const Lifted& L, const Twist& xi) const {
    Tensor x = tape.constant(twist_row(xi));
    Tensor h = relu(linear(x, L.at("ht.w1"), L.at("ht.b1")));
    return linear(h, L.at("ht.w2"), L.at("ht.b2"));
}

namespace {

Tensor trunk_and_head(Tape& tape, const DenoiserModel::Lifted& L, const DenoiserConfig& cfg,
                      std::vector<Tensor> feats, int t) {
    Tensor time_row = tape.constant(
        Array::from({1, u(cfg.time_emb_dim)}, time_embedding(t, cfg.time_emb_dim)));
    std::vector<Tensor> tokens;
    tokens.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        Tensor pos_row = slice(L.at("pos.emb"), 0, i, 1);
        tokens.push_back(concat({feats[i], pos_row, time_row}, 1));
    }
    Tensor x = concat(tokens, 0);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string pre = "trunk." + std::to_string(l) + ".";
        Tensor att = multi_head_attention(x, L.at(pre + "attn.wq"), L.at(pre + "attn.wk"),
                                          L.at(pre + "attn.wv"), L.at(pre + "attn.wo"), cfg.heads);
        x = layer_norm(add(x, att), L.at(pre + "ln1.g"), L.at(pre + "ln1.b"));
        Tensor ffn = linear(relu(linear(x, L.at(pre + "ffn.w1"), L.at(pre + "ffn.b1"))),
                            L.at(pre + "ffn.w2"), L.at(pre + "ffn.b2"));
        x = layer_norm(add(x, ffn), L.at(pre + "ln2.g"), L.at(pre + "ln2.b"));
    }
    Tensor pose_tokens = slice(x, 0, 2, u(cfg.n_poses));
    return linear(pose_tokens, L.at("head.w"), L.at("head.b"));
}

}  // namespace

Tensor DenoiserModel::predict_noise_t(Tape& tape, const Lifted& L, const PartCloud& anchor,
                                      const PartCloud& function, const TwistPair& twists,
                                      int t) const {
    Tensor fa = encode_part_t(tape, L, anchor);
    Tensor ff = encode_part_t(tape, L, function);
    Tensor p1 = encode_pose_t(tape, L, twists[0]);
    Tensor p2 = encode_pose_t(tape, L, twists[1]);
    return trunk_and_head(tape, L, cfg_, {fa, ff, p1, p2}, t);
}

Tensor DenoiserModel::predict_noise_feat_t(Tape& tape, const Lifted& L, const Array& anchor_feat,
                                           const Array& function_feat, const TwistPair& twists,
                                           int t) const {
    Tensor fa = tape.constant(anchor_feat);
    Tensor ff = tape.constant(function_feat);
    Tensor p1 = encode_pose_t(tape, L, twists[0]);
    Tensor p2 = encode_pose_t(tape, L, twists[1]);
    return trunk_and_head(tape, L, cfg_, {fa, ff, p1, p2}, t);
}

Array DenoiserModel::encode_part_features(const PartCloud& pc) const {
    Tape tape;
    Lifted L = lift(tape, false);
    return encode_part_t(tape, L, pc).value();
}

TwistPair twists_from_rows(const Array& rows) {
    TwistPair out;
    for (int n = 0; n < 2; ++n) {
        Eigen::Matrix<double, 6, 1> c;
        for (int i = 0; i < 6; ++i) c(i) = rows[u(6 * n + i)];
        out[u(n)] = Twist::from_coords(c);
    }
    return out;
}

TwistPair DenoiserModel::predict_noise(const PartCloud& anchor, const PartCloud& function,
                                       const TwistPair& twists, int t) const {
    Tape tape;
    Lifted L = lift(tape, false);
    return twists_from_rows(predict_noise_t(tape, L, anchor, function, twists, t).value());
}

TwistPair DenoiserModel::predict_noise_cached(const Array& anchor_feat, const Array& function_feat,
                                              const TwistPair& twists, int t) const {
    Tape tape;
    Lifted L = lift(tape, false);
    return twists_from_rows(
        predict_noise_feat_t(tape, L, anchor_feat, function_feat, twists, t).value());
}

void save_model(const std::string& path, const DenoiserModel& model, nlohmann::json extra_meta) {
    extra_meta["relation"] = model.relation();
    extra_meta["config"] = model.config().to_json();
    save_checkpoint(path, model.params(), extra_meta);
}

std::pair<DenoiserModel, nlohmann::json> load_model(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    Rng dummy(0);
    DenoiserModel m = DenoiserModel::init(DenoiserConfig::from_json(ck.meta.at("config")),
                                          ck.meta.at("relation").get<std::string>(), dummy);
    for (auto& [name, arr] : m.params()) {
        auto it = ck.params.find(name);
        if (it == ck.params.end()) throw IoError("checkpoint missing tensor " + name);
        if (!it->second.same_shape(arr))
            throw IoError("checkpoint tensor " + name + " has shape " +
                          ad::shape_str(it->second.shape()) + ", expected " +
                          ad::shape_str(arr.shape()));
        arr = it->second;
    }
    if (ck.params.size() != m.params().size())
        throw IoError("checkpoint has extra tensors: " + path);
    return {std::move(m), std::move(ck.meta)};
}

}  // namespace cpm
