#pragma once

#include <span>
#include <vector>

#include "ansp/rng.hpp"
#include "ansp/tensor.hpp"

namespace ansp {

struct GateParams {
    Tensor w_in;   // h x d
    Tensor w_rec;  // h x h
    Tensor bias;   // h x 1
};

struct LstmDir {
    GateParams in_g, forget_g, cell_g, out_g;
};

struct BiLstmParams {
    LstmDir fwd, bwd;
    std::size_t in_dim = 0;
    std::size_t hidden = 0;

    static BiLstmParams init(std::size_t d, std::size_t h, Rng& rng) {
        BiLstmParams p;
        p.in_dim = d;
        p.hidden = h;
        auto gate = [&](double bias_fill) {
            GateParams g;
            g.w_in = Tensor::uniform({h, d}, rng, -0.1, 0.1, true);
            g.w_rec = Tensor::uniform({h, h}, rng, -0.1, 0.1, true);
            g.bias = Tensor::full({h, 1}, bias_fill, true);
            return g;
        };
        for (LstmDir* dir : {&p.fwd, &p.bwd}) {
            dir->in_g = gate(0.0);
            dir->forget_g = gate(1.0);  // open memory path at the start of training
            dir->cell_g = gate(0.0);
            dir->out_g = gate(0.0);
        }
        return p;
    }

    // Handle copies alias the underlying storage, so these are usable for
    // updates and serialization alike.  Order is fixed.
    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        for (const LstmDir* dir : {&fwd, &bwd})
            for (const GateParams* g : {&dir->in_g, &dir->forget_g, &dir->cell_g, &dir->out_g}) {
                out.push_back(g->w_in);
                out.push_back(g->w_rec);
                out.push_back(g->bias);
            }
        return out;
    }

    BiLstmParams clone(bool requires_grad) const {
        BiLstmParams p;
        p.in_dim = in_dim;
        p.hidden = hidden;
        auto copy_gate = [&](const GateParams& g) {
            GateParams out;
            out.w_in = g.w_in.detached();
            out.w_rec = g.w_rec.detached();
            out.bias = g.bias.detached();
            if (requires_grad) {
                out.w_in.set_requires_grad(true);
                out.w_rec.set_requires_grad(true);
                out.bias.set_requires_grad(true);
            }
            return out;
        };
        const LstmDir* src[2] = {&fwd, &bwd};
        LstmDir* dst[2] = {&p.fwd, &p.bwd};
        for (int i = 0; i < 2; ++i) {
            dst[i]->in_g = copy_gate(src[i]->in_g);
            dst[i]->forget_g = copy_gate(src[i]->forget_g);
            dst[i]->cell_g = copy_gate(src[i]->cell_g);
            dst[i]->out_g = copy_gate(src[i]->out_g);
        }
        return p;
    }

    // Overwrites this parameter set with the values of another (rollout sync).
    void assign_from(const BiLstmParams& src) {
        auto mine = parameters();
        auto theirs = src.parameters();
        for (std::size_t i = 0; i < mine.size(); ++i) {
            auto src_vals = theirs[i].values();
            std::copy(src_vals.begin(), src_vals.end(), mine[i].values().begin());
        }
    }
};

struct EncodeOut {
    Tensor states;  // T x 2h, row t = [forward h_t, backward h_t]
    Tensor final;   // {2h} = [forward h at last row, backward h at row 0]
};

namespace detail {

struct Step {
    Tensor h, c;  // h x 1 each
};

inline Tensor gate_act(Tape& tape, const GateParams& g, const Tensor& x, const Tensor& h_prev,
                       bool tanh_act) {
    Tensor pre = tape.add(tape.add(tape.matmul(g.w_in, x), tape.matmul(g.w_rec, h_prev)), g.bias);
    return tanh_act ? tape.tanh(pre) : tape.sigmoid(pre);
}

inline Step lstm_step(Tape& tape, const LstmDir& dir, const Tensor& x, const Step& prev) {
    Tensor i = gate_act(tape, dir.in_g, x, prev.h, false);
    Tensor f = gate_act(tape, dir.forget_g, x, prev.h, false);
    Tensor g = gate_act(tape, dir.cell_g, x, prev.h, true);
    Tensor o = gate_act(tape, dir.out_g, x, prev.h, false);
    Step next;
    next.c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
    next.h = tape.mul(o, tape.tanh(next.c));
    return next;
}

}  // namespace detail

// Masks scale input rows before the recurrence: a masked step still advances
// the state, it just sees a zero row.  T must be at least 1.
inline EncodeOut bilstm_encode(Tape& tape, const Tensor& inputs, std::span<const double> mask,
                               const BiLstmParams& params) {
    if (inputs.rank() != 2)
        throw ShapeError("bilstm_encode: inputs " + shape_str(inputs.shape()) + " not 2-D");
    const std::size_t T = inputs.rows();
    if (T == 0) throw ContractError("bilstm_encode: empty input");
    if (mask.size() != T)
        throw ContractError("bilstm_encode: mask length " + std::to_string(mask.size()) +
                            " for " + std::to_string(T) + " rows");
    const std::size_t h = params.hidden;

    std::vector<Tensor> xs(T);
    for (std::size_t t = 0; t < T; ++t)
        xs[t] = tape.transpose(tape.scale(tape.take_row(inputs, t), mask[t]));

    detail::Step zero{Tensor::zeros({h, 1}), Tensor::zeros({h, 1})};
    std::vector<Tensor> hf(T), hb(T);
    detail::Step s = zero;
    for (std::size_t t = 0; t < T; ++t) {
        s = detail::lstm_step(tape, params.fwd, xs[t], s);
        hf[t] = s.h;
    }
    Tensor fwd_last = s.h;
    s = zero;
    for (std::size_t t = T; t-- > 0;) {
        s = detail::lstm_step(tape, params.bwd, xs[t], s);
        hb[t] = s.h;
    }
    Tensor bwd_first = s.h;

    std::vector<Tensor> rows(T);
    for (std::size_t t = 0; t < T; ++t)
        rows[t] = tape.transpose(tape.concat_rows({hf[t], hb[t]}));
    EncodeOut out;
    out.states = tape.concat_rows(rows);
    out.final = tape.reshape(tape.concat_rows({fwd_last, bwd_first}), {2 * h});
    return out;
}

// ---- raw forward path ----
// Arithmetic mirrors the tape ops exactly (same accumulation order), so the
// two paths produce bit-identical values.  Used on reward/rollout hot paths
// where no gradients are needed.

struct RawLstmState {
    std::vector<double> h, c;
    explicit RawLstmState(std::size_t hidden = 0) : h(hidden, 0.0), c(hidden, 0.0) {}
};

inline void lstm_step_raw(const LstmDir& dir, std::span<const double> row, double mask,
                          RawLstmState& st) {
    const std::size_t h = st.h.size();
    const std::size_t d = row.size();
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = row[j] * mask;
    auto pre = [&](const GateParams& g, std::size_t i) {
        double a = 0.0;
        for (std::size_t j = 0; j < d; ++j) a += g.w_in.at(i * d + j) * x[j];
        double b = 0.0;
        for (std::size_t j = 0; j < h; ++j) b += g.w_rec.at(i * h + j) * st.h[j];
        return (a + b) + g.bias.at(i);
    };
    auto sigm = [](double z) {
        if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
        double e = std::exp(z);
        return e / (1.0 + e);
    };
    std::vector<double> hi(h), hf(h), hg(h), ho(h);
    for (std::size_t i = 0; i < h; ++i) hi[i] = sigm(pre(dir.in_g, i));
    for (std::size_t i = 0; i < h; ++i) hf[i] = sigm(pre(dir.forget_g, i));
    for (std::size_t i = 0; i < h; ++i) hg[i] = std::tanh(pre(dir.cell_g, i));
    for (std::size_t i = 0; i < h; ++i) ho[i] = sigm(pre(dir.out_g, i));
    for (std::size_t i = 0; i < h; ++i) {
        st.c[i] = (hf[i] * st.c[i]) + (hi[i] * hg[i]);
        st.h[i] = ho[i] * std::tanh(st.c[i]);
    }
}

// Final bidirectional state over raw rows; returns a 2h vector.
inline std::vector<double> bilstm_final_raw(const BiLstmParams& params,
                                            const std::vector<std::vector<double>>& rows,
                                            std::span<const double> mask) {
    const std::size_t T = rows.size();
    if (T == 0) throw ContractError("bilstm_final_raw: empty input");
    const std::size_t h = params.hidden;
    RawLstmState f(h);
    for (std::size_t t = 0; t < T; ++t) lstm_step_raw(params.fwd, rows[t], mask[t], f);
    RawLstmState b(h);
    for (std::size_t t = T; t-- > 0;) lstm_step_raw(params.bwd, rows[t], mask[t], b);
    std::vector<double> out(2 * h);
    std::copy(f.h.begin(), f.h.end(), out.begin());
    std::copy(b.h.begin(), b.h.end(), out.begin() + static_cast<long>(h));
    return out;
}

// Inverted dropout against a seeded mask; identity when keep >= 1.
inline Tensor dropout(Tape& tape, const Tensor& x, double keep, Rng& rng) {
    if (keep >= 1.0) return x;
    if (keep <= 0.0) throw ContractError("dropout: keep probability must be positive");
    Tensor mask = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask.at(i) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return tape.mul(x, mask);
}

}  // namespace ansp
