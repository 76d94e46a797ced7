#include "cpm/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <deque>

#include "cpm/errors.hpp"

namespace cpm::ad {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RMat>;
using CMatMap = Eigen::Map<const RMat>;
using VecMap = Eigen::Map<Eigen::ArrayXd>;
using CVecMap = Eigen::Map<const Eigen::ArrayXd>;

namespace {

CMatMap mat(const Array& a) { return CMatMap(a.data(), a.rows(), a.cols()); }
MatMap mat(Array& a) { return MatMap(a.data(), a.rows(), a.cols()); }
CVecMap vec(const Array& a) { return CVecMap(a.data(), a.numel()); }
VecMap vec(Array& a) { return VecMap(a.data(), a.numel()); }

void require_rank2(const Array& a, const char* op) {
    if (a.rank() != 2)
        throw ShapeMismatchError(std::string(op) + ": expected rank-2, got " + shape_str(a.shape()));
}

}  // namespace

const Array Tape::empty_grad_{};

Tensor Tape::leaf_ref(const Array& external, bool needs_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.val = &external;
    n.requires_grad = needs_grad;
    return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::leaf(Array owned, bool needs_grad) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.owned = std::move(owned);
    n.val = &n.owned;
    n.requires_grad = needs_grad;
    return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::emplace(Array value, bool needs_grad, Backprop fn) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.owned = std::move(value);
    n.val = &n.owned;
    n.requires_grad = needs_grad;
    if (needs_grad) n.backprop = std::move(fn);
    return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Array& Tape::grad_buffer(int idx) {
    Node& n = nodes_[idx];
    if (!n.grad_alloc) {
        n.grad = Array(n.val->shape(), 0.0);
        n.grad_alloc = true;
    }
    return n.grad;
}

const Array& Tape::grad(int idx) const {
    // Zero gradients materialize lazily so unreached parameters still
    // report a correctly shaped all-zero gradient.
    return const_cast<Tape*>(this)->grad_buffer(idx);
}

void Tape::backward(Tensor loss) {
    if (loss.value().numel() != 1)
        throw NotScalarError("backward: loss has shape " + shape_str(loss.value().shape()));
    grad_buffer(loss.index())[0] = 1.0;
    for (int i = loss.index(); i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad_alloc && n.backprop) n.backprop(*this, i);
    }
}

namespace {

bool rg(Tensor t) { return t.tape().requires_grad(t.index()); }

// b broadcasts over the rows of a when it is rank-1 with a's column count.
bool row_broadcast(const Array& a, const Array& b) {
    return b.rank() == 1 && a.rank() == 2 && b.dim(0) == a.dim(1);
}

void check_binary(const Array& a, const Array& b, const char* op) {
    if (!a.same_shape(b) && !row_broadcast(a, b))
        throw ShapeMismatchError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                                 shape_str(b.shape()));
}

}  // namespace

Tensor add(Tensor a, Tensor b) {
    Tape& t = a.tape();
    const Array& av = a.value();
    const Array& bv = b.value();
    check_binary(av, bv, "add");
    Array out = av;
    if (row_broadcast(av, bv)) {
        mat(out).rowwise() += mat(bv).row(0);
    } else {
        vec(out) += vec(bv);
    }
    int ia = a.index(), ib = b.index();
    return t.emplace(std::move(out), rg(a) || rg(b), [ia, ib](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        if (tp.requires_grad(ia)) vec(tp.grad_buffer(ia)) += vec(g);
        if (tp.requires_grad(ib)) {
            Array& gb = tp.grad_buffer(ib);
            if (gb.numel() == g.numel())
                vec(gb) += vec(g);
            else
                mat(gb).row(0) += mat(g).colwise().sum();
        }
    });
}

Tensor sub(Tensor a, Tensor b) {
    Tape& t = a.tape();
    const Array& av = a.value();
    const Array& bv = b.value();
    check_binary(av, bv, "sub");
    Array out = av;
    if (row_broadcast(av, bv)) {
        mat(out).rowwise() -= mat(bv).row(0);
    } else {
        vec(out) -= vec(bv);
    }
    int ia = a.index(), ib = b.index();
    return t.emplace(std::move(out), rg(a) || rg(b), [ia, ib](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        if (tp.requires_grad(ia)) vec(tp.grad_buffer(ia)) += vec(g);
        if (tp.requires_grad(ib)) {
            Array& gb = tp.grad_buffer(ib);
            if (gb.numel() == g.numel())
                vec(gb) -= vec(g);
            else
                mat(gb).row(0) -= mat(g).colwise().sum();
        }
    });
}

Tensor multiply(Tensor a, Tensor b) {
    Tape& t = a.tape();
    const Array& av = a.value();
    const Array& bv = b.value();
    check_binary(av, bv, "multiply");
    Array out = av;
    if (row_broadcast(av, bv)) {
        mat(out).array().rowwise() *= mat(bv).row(0).array();
    } else {
        vec(out) *= vec(bv);
    }
    int ia = a.index(), ib = b.index();
    return t.emplace(std::move(out), rg(a) || rg(b), [ia, ib](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        const Array& av2 = tp.value(ia);
        const Array& bv2 = tp.value(ib);
        bool bcast = row_broadcast(av2, bv2);
        if (tp.requires_grad(ia)) {
            Array& ga = tp.grad_buffer(ia);
            if (bcast)
                mat(ga).array() += mat(g).array().rowwise() * mat(bv2).row(0).array();
            else
                vec(ga) += vec(g) * vec(bv2);
        }
        if (tp.requires_grad(ib)) {
            Array& gb = tp.grad_buffer(ib);
            if (bcast)
                mat(gb).row(0) += (mat(g).array() * mat(av2).array()).colwise().sum().matrix();
            else
                vec(gb) += vec(g) * vec(av2);
        }
    });
}

Tensor scale(Tensor a, double c) {
    Tape& t = a.tape();
    Array out = a.value();
    vec(out) *= c;
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia, c](Tape& tp, int self) {
        vec(tp.grad_buffer(ia)) += c * vec(tp.grad(self));
    });
}

Tensor matmul(Tensor a, Tensor b) {
    Tape& t = a.tape();
    const Array& av = a.value();
    const Array& bv = b.value();
    require_rank2(av, "matmul");
    require_rank2(bv, "matmul");
    if (av.dim(1) != bv.dim(0))
        throw ShapeMismatchError("matmul: shape " + shape_str(av.shape()) + " vs " +
                                 shape_str(bv.shape()));
    Array out({av.dim(0), bv.dim(1)});
    mat(out).noalias() = mat(av) * mat(bv);
    int ia = a.index(), ib = b.index();
    return t.emplace(std::move(out), rg(a) || rg(b), [ia, ib](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        if (tp.requires_grad(ia))
            mat(tp.grad_buffer(ia)).noalias() += mat(g) * mat(tp.value(ib)).transpose();
        if (tp.requires_grad(ib))
            mat(tp.grad_buffer(ib)).noalias() += mat(tp.value(ia)).transpose() * mat(g);
    });
}

Tensor transpose(Tensor a) {
    Tape& t = a.tape();
    const Array& av = a.value();
    require_rank2(av, "transpose");
    Array out({av.dim(1), av.dim(0)});
    mat(out) = mat(av).transpose();
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia](Tape& tp, int self) {
        mat(tp.grad_buffer(ia)) += mat(tp.grad(self)).transpose();
    });
}

Tensor relu(Tensor a) {
    Tape& t = a.tape();
    Array out = a.value();
    vec(out) = vec(out).max(0.0);
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        const Array& in = tp.value(ia);
        Array& ga = tp.grad_buffer(ia);
        const double* gv = g.data();
        const double* iv = in.data();
        double* out_g = ga.data();
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (iv[i] > 0.0) out_g[i] += gv[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeMismatchError("concat: no inputs");
    Tape& t = parts[0].tape();
    const int other = 1 - axis;
    std::size_t along = 0;
    const std::size_t fixed = parts[0].value().rank() == 2
                                  ? parts[0].value().dim(static_cast<std::size_t>(other))
                                  : 0;
    for (const Tensor& p : parts) {
        require_rank2(p.value(), "concat");
        if (p.value().dim(static_cast<std::size_t>(other)) != fixed)
            throw ShapeMismatchError("concat: shape " + shape_str(parts[0].value().shape()) +
                                     " vs " + shape_str(p.value().shape()));
        along += p.value().dim(static_cast<std::size_t>(axis));
    }
    Array out(axis == 0 ? std::vector<std::size_t>{along, fixed}
                        : std::vector<std::size_t>{fixed, along});
    std::vector<int> idx;
    std::vector<std::size_t> offs;
    bool any = false;
    std::size_t at = 0;
    for (const Tensor& p : parts) {
        const Array& pv = p.value();
        if (axis == 0)
            mat(out).middleRows(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(pv.dim(0))) = mat(pv);
        else
            mat(out).middleCols(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(pv.dim(1))) = mat(pv);
        idx.push_back(p.index());
        offs.push_back(at);
        at += pv.dim(static_cast<std::size_t>(axis));
        any = any || rg(p);
    }
    return t.emplace(std::move(out), any, [idx, offs, axis](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (!tp.requires_grad(idx[i])) continue;
            Array& gp = tp.grad_buffer(idx[i]);
            auto n = static_cast<Eigen::Index>(gp.dim(static_cast<std::size_t>(axis)));
            if (axis == 0)
                mat(gp) += mat(g).middleRows(static_cast<Eigen::Index>(offs[i]), n);
            else
                mat(gp) += mat(g).middleCols(static_cast<Eigen::Index>(offs[i]), n);
        }
    });
}

Tensor slice(Tensor a, int axis, std::size_t start, std::size_t len) {
    Tape& t = a.tape();
    const Array& av = a.value();
    require_rank2(av, "slice");
    if (start + len > av.dim(static_cast<std::size_t>(axis)))
        throw ShapeMismatchError("slice: range past end of " + shape_str(av.shape()));
    Array out(axis == 0 ? std::vector<std::size_t>{len, av.dim(1)}
                        : std::vector<std::size_t>{av.dim(0), len});
    if (axis == 0)
        mat(out) = mat(av).middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len));
    else
        mat(out) = mat(av).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len));
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia, axis, start, len](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        Array& ga = tp.grad_buffer(ia);
        if (axis == 0)
            mat(ga).middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) += mat(g);
        else
            mat(ga).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) += mat(g);
    });
}

Tensor softmax(Tensor a) {
    Tape& t = a.tape();
    Array out = a.value();
    MatMap m = mat(out);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r).array();
        row -= row.maxCoeff();
        row = row.exp();
        row /= row.sum();
    }
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        const Array& s = tp.value(self);
        Array& ga = tp.grad_buffer(ia);
        CMatMap gm = mat(g), sm = mat(s);
        MatMap gam = mat(ga);
        for (Eigen::Index r = 0; r < gm.rows(); ++r) {
            double dot = (gm.row(r).array() * sm.row(r).array()).sum();
            gam.row(r).array() += sm.row(r).array() * (gm.row(r).array() - dot);
        }
    });
}

Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps) {
    Tape& t = x.tape();
    const Array& xv = x.value();
    require_rank2(xv, "layer_norm");
    const Array& gv = gain.value();
    const Array& bv = bias.value();
    if (!row_broadcast(xv, gv) || !row_broadcast(xv, bv))
        throw ShapeMismatchError("layer_norm: gain/bias shape " + shape_str(gv.shape()) +
                                 " vs input " + shape_str(xv.shape()));
    Array out(xv.shape());
    {
        CMatMap xm = mat(xv);
        MatMap om = mat(out);
        auto gr = mat(gv).row(0).array();
        auto br = mat(bv).row(0).array();
        for (Eigen::Index r = 0; r < xm.rows(); ++r) {
            auto row = xm.row(r).array();
            double mu = row.mean();
            double var = (row - mu).square().mean();
            double inv = 1.0 / std::sqrt(var + eps);
            om.row(r).array() = (row - mu) * inv * gr + br;
        }
    }
    int ix = x.index(), ig = gain.index(), ib = bias.index();
    bool needs_grad = rg(x) || rg(gain) || rg(bias);
    return t.emplace(std::move(out), needs_grad, [ix, ig, ib, eps](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        const Array& xv2 = tp.value(ix);
        const Array& gv2 = tp.value(ig);
        CMatMap xm = mat(xv2), gm = mat(g);
        auto gr = mat(gv2).row(0).array();
        const auto n = static_cast<double>(xm.cols());
        Eigen::ArrayXd xhat(xm.cols()), gg(xm.cols());
        for (Eigen::Index r = 0; r < xm.rows(); ++r) {
            auto row = xm.row(r).array();
            double mu = row.mean();
            double var = (row - mu).square().mean();
            double inv = 1.0 / std::sqrt(var + eps);
            xhat = (row.transpose() - mu) * inv;
            gg = gm.row(r).array().transpose() * gr.transpose();
            if (tp.requires_grad(ix)) {
                double mean_gg = gg.mean();
                double mean_ggx = (gg * xhat).mean();
                mat(tp.grad_buffer(ix)).row(r).array() +=
                    ((gg - mean_gg - xhat * mean_ggx) * inv).transpose();
            }
            if (tp.requires_grad(ig))
                mat(tp.grad_buffer(ig)).row(0).array() += (gm.row(r).array().transpose() * xhat).transpose();
            if (tp.requires_grad(ib)) mat(tp.grad_buffer(ib)).row(0) += gm.row(r);
            (void)n;
        }
    });
}

Tensor reduce_mean(Tensor a, int axis) {
    Tape& t = a.tape();
    const Array& av = a.value();
    require_rank2(av, "reduce_mean");
    Array out(axis == 0 ? std::vector<std::size_t>{1, av.dim(1)}
                        : std::vector<std::size_t>{av.dim(0), 1});
    if (axis == 0)
        mat(out).row(0) = mat(av).colwise().mean();
    else
        mat(out).col(0) = mat(av).rowwise().mean();
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia, axis](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        Array& ga = tp.grad_buffer(ia);
        double denom = axis == 0 ? static_cast<double>(ga.dim(0)) : static_cast<double>(ga.dim(1));
        if (axis == 0)
            mat(ga).rowwise() += mat(g).row(0) / denom;
        else
            mat(ga).colwise() += mat(g).col(0) / denom;
    });
}

Tensor reduce_max(Tensor a, int axis) {
    Tape& t = a.tape();
    const Array& av = a.value();
    require_rank2(av, "reduce_max");
    CMatMap m = mat(av);
    Array out(axis == 0 ? std::vector<std::size_t>{1, av.dim(1)}
                        : std::vector<std::size_t>{av.dim(0), 1});
    std::vector<Eigen::Index> arg(axis == 0 ? av.dim(1) : av.dim(0));
    if (axis == 0) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            Eigen::Index r;
            out[static_cast<std::size_t>(c)] = m.col(c).maxCoeff(&r);
            arg[static_cast<std::size_t>(c)] = r;
        }
    } else {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            Eigen::Index c;
            out[static_cast<std::size_t>(r)] = m.row(r).maxCoeff(&c);
            arg[static_cast<std::size_t>(r)] = c;
        }
    }
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia, axis, arg](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        Array& ga = tp.grad_buffer(ia);
        MatMap gam = mat(ga);
        for (std::size_t i = 0; i < arg.size(); ++i) {
            if (axis == 0)
                gam(arg[i], static_cast<Eigen::Index>(i)) += g[i];
            else
                gam(static_cast<Eigen::Index>(i), arg[i]) += g[i];
        }
    });
}

Tensor mean_all(Tensor a) {
    Tape& t = a.tape();
    Array out = Array::scalar(vec(a.value()).mean());
    int ia = a.index();
    return t.emplace(std::move(out), rg(a), [ia](Tape& tp, int self) {
        const Array& g = tp.grad(self);
        Array& ga = tp.grad_buffer(ia);
        vec(ga) += g[0] / static_cast<double>(ga.numel());
    });
}

Tensor linear(Tensor x, Tensor w, Tensor b) { return add(matmul(x, w), b); }

Tensor multi_head_attention(Tensor x, Tensor wq, Tensor wk, Tensor wv, Tensor wo, int heads) {
    Tensor q = matmul(x, wq);
    Tensor k = matmul(x, wk);
    Tensor v = matmul(x, wv);
    const std::size_t proj = q.value().dim(1);
    if (proj % static_cast<std::size_t>(heads) != 0)
        throw ShapeMismatchError("attention: " + std::to_string(proj) + " columns for " +
                                 std::to_string(heads) + " heads");
    const std::size_t dh = proj / static_cast<std::size_t>(heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = heads == 1 ? q : slice(q, 1, static_cast<std::size_t>(h) * dh, dh);
        Tensor kh = heads == 1 ? k : slice(k, 1, static_cast<std::size_t>(h) * dh, dh);
        Tensor vh = heads == 1 ? v : slice(v, 1, static_cast<std::size_t>(h) * dh, dh);
        Tensor att = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
        outs.push_back(matmul(att, vh));
    }
    Tensor cat = heads == 1 ? outs[0] : concat(outs, 1);
    return matmul(cat, wo);
}

namespace {

Tensor pointwise_loss(Tensor pred, const Array& target, double delta, bool huber) {
    const Array& pv = pred.value();
    check_same_shape(pv, target, huber ? "huber_loss" : "mse_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.numel(); ++i) {
        double r = pv[i] - target[i];
        if (!huber)
            acc += r * r;
        else if (std::abs(r) <= delta)
            acc += 0.5 * r * r;
        else
            acc += delta * (std::abs(r) - 0.5 * delta);
    }
    const auto n = static_cast<double>(pv.numel());
    int ip = pred.index();
    return pred.tape().emplace(
        Array::scalar(acc / n), rg(pred), [ip, target, delta, huber, n](Tape& tp, int self) {
            double g = tp.grad(self)[0];
            const Array& pv2 = tp.value(ip);
            Array& gp = tp.grad_buffer(ip);
            for (std::size_t i = 0; i < pv2.numel(); ++i) {
                double r = pv2[i] - target[i];
                double d = huber ? std::clamp(r, -delta, delta) : 2.0 * r;
                gp[i] += g * d / n;
            }
        });
}

}  // namespace

Tensor huber_loss(Tensor pred, const Array& target, double delta) {
    return pointwise_loss(pred, target, delta, true);
}

Tensor mse_loss(Tensor pred, const Array& target) {
    return pointwise_loss(pred, target, 0.0, false);
}

double finite_diff_check(const std::function<Tensor(Tape&, Tensor)>& f, const Array& x, double h) {
    Array g_ad;
    {
        Tape tape;
        Array xin = x;
        xin.requires_grad = true;
        Tensor xt = tape.leaf(std::move(xin), true);
        Tensor loss = f(tape, xt);
        tape.backward(loss);
        g_ad = tape.grad(xt.index());
    }
    auto eval = [&f](const Array& at) {
        Tape tape;
        Tensor xt = tape.leaf_ref(at, false);
        return f(tape, xt).value().item();
    };
    double worst = 0.0;
    Array probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        double up = eval(probe);
        probe[i] = orig - h;
        double down = eval(probe);
        probe[i] = orig;
        double g_fd = (up - down) / (2.0 * h);
        double denom = std::max(1e-12, std::abs(g_ad[i]) + std::abs(g_fd));
        worst = std::max(worst, std::abs(g_ad[i] - g_fd) / denom);
    }
    return worst;
}

}  // namespace cpm::ad
