#pragma once

#include <optional>

#include "td7/diffnet.hpp"
#include "td7/nets.hpp"

namespace td7 {

// State-action learned embeddings: a state encoder f producing zs and a
// state-action encoder g producing zsa from (action, zs). f ends with
// AvgL1Norm; g does not (it is trained to match the normalized next-state
// embedding).

enum class EncoderTarget : uint8_t {
    next_zs,         // default: stop-gradient f(s')
    raw_next_state,  // predict s' directly
    polyak_zs,       // f_polyak(s'), weights trailing f at rate 0.01
    zs_plus_reward,  // next_zs plus a scalar reward head on g
    next_zsa,        // g(f(s'), a') with a' from the target policy
    cosine,          // next_zs target under 1 - cosine similarity
};

template <class T>
struct EncoderConfig {
    int state_dim = 0;
    int action_dim = 0;
    int zs_dim = 256;
    int hidden_dim = 256;
    bool norm_zsa = false;    // NormVariant::norm_zsa
    bool reward_head = false; // EncoderTarget::zs_plus_reward
};

template <class T>
struct EncoderPair {
    EncoderConfig<T> cfg;
    Mlp<T> f;
    Mlp<T> g;

    void init(const EncoderConfig<T>& c, Rng& rng) {
        cfg = c;
        f.init({c.state_dim, c.hidden_dim, c.hidden_dim, c.zs_dim},
               {Act::elu, Act::elu, Act::avg_l1_norm}, rng);
        int g_out = c.zs_dim + (c.reward_head ? 1 : 0);
        g.init({c.action_dim + c.zs_dim, c.hidden_dim, c.hidden_dim, g_out},
               {Act::elu, Act::elu, c.norm_zsa ? Act::avg_l1_norm : Act::identity}, rng);
    }

    Mat<T> encode_state(const Mat<T>& s) const { return f.forward(s); }

    // Returns the first zs_dim columns when a reward head is present.
    Mat<T> encode_state_action(const Mat<T>& zs, const Mat<T>& a) const {
        Mat<T> in;
        hconcat(a, zs, in);
        Mat<T> out = g.forward(in);
        if (!cfg.reward_head) return out;
        Mat<T> zsa(out.rows, cfg.zs_dim);
        for (int r = 0; r < out.rows; ++r)
            std::memcpy(zsa.row(r), out.row(r), cfg.zs_dim * sizeof(T));
        return zsa;
    }

    void copy_params_from(const EncoderPair& other) {
        f.copy_params_from(other.f);
        g.copy_params_from(other.g);
    }

    void zero_grad() {
        f.zero_grad();
        g.zero_grad();
    }

    void step(const AdamOpts& o) {
        f.step(o);
        g.step(o);
    }

    template <class F>
    void visit_params(F&& fn) {
        f.visit_params(fn);
        g.visit_params(fn);
    }
};

// Three-generation bookkeeping: current trains, fixed feeds the live value
// function and policy, target_fixed feeds their targets. sync() shifts
// fixed into target_fixed and current into fixed, in that order.
template <class T>
struct EncoderGenerations {
    EncoderPair<T> current;
    EncoderPair<T> fixed;
    EncoderPair<T> target_fixed;
    std::optional<EncoderPair<T>> polyak;  // only for EncoderTarget::polyak_zs
    T polyak_rate = T(0.01);

    void init(const EncoderConfig<T>& c, Rng& rng, bool with_polyak = false) {
        current.init(c, rng);
        fixed = current;
        target_fixed = current;
        if (with_polyak) polyak = current;
    }

    void sync() {
        target_fixed.copy_params_from(fixed);
        fixed.copy_params_from(current);
    }

    void polyak_update() {
        if (!polyak) return;
        polyak->f.polyak_from(current.f, polyak_rate);
        polyak->g.polyak_from(current.g, polyak_rate);
    }
};

// Extra inputs some loss variants need. next_actions is required by
// next_zsa (smoothed target-policy actions for s').
template <class T>
struct EncoderLossAux {
    const Mat<T>* next_actions = nullptr;
    const EncoderPair<T>* polyak = nullptr;
};

// Computes the dynamics-prediction loss on (s, a, s', r), accumulates
// gradients into pair.f and pair.g, and returns the scalar loss. The target
// branch is always treated as a constant (stop-gradient). Call
// pair.zero_grad() first and pair.step() after to apply the update.
template <class T>
T encoder_loss_backward(EncoderPair<T>& pair, const Mat<T>& s, const Mat<T>& a,
                        const Mat<T>& s_next, const std::vector<T>& rewards,
                        EncoderTarget variant = EncoderTarget::next_zs,
                        const EncoderLossAux<T>& aux = {}) {
    const int B = s.rows;
    const int zd = pair.cfg.zs_dim;

    MlpTape<T> f_tape, g_tape;
    const Mat<T>& zs = pair.f.forward(s, f_tape);
    Mat<T> g_in;
    hconcat(a, zs, g_in);
    const Mat<T>& g_out = pair.g.forward(g_in, g_tape);

    // build the prediction target (constant)
    Mat<T> target;
    switch (variant) {
        case EncoderTarget::next_zs:
        case EncoderTarget::cosine:
        case EncoderTarget::zs_plus_reward:
            target = pair.f.forward(s_next);
            break;
        case EncoderTarget::raw_next_state:
            target = s_next;
            break;
        case EncoderTarget::polyak_zs:
            if (!aux.polyak) throw std::invalid_argument("encoder loss: polyak copy required");
            target = aux.polyak->f.forward(s_next);
            break;
        case EncoderTarget::next_zsa: {
            if (!aux.next_actions)
                throw std::invalid_argument("encoder loss: next actions required");
            Mat<T> zs_next = pair.f.forward(s_next);
            target = pair.encode_state_action(zs_next, *aux.next_actions);
            break;
        }
    }
    if (variant == EncoderTarget::raw_next_state && target.cols != zd)
        throw std::invalid_argument("encoder loss: raw-state target needs zs_dim == state_dim");

    double loss = 0;
    Mat<T> d_gout(g_out.rows, g_out.cols);
    if (variant == EncoderTarget::cosine) {
        // 1 - cos(zsa, target) per row, averaged over the batch
        for (int r = 0; r < B; ++r) {
            const T* p = g_out.row(r);
            const T* q = target.row(r);
            double dot = 0, np2 = 0, nq2 = 0;
            for (int c = 0; c < zd; ++c) {
                dot += double(p[c]) * double(q[c]);
                np2 += double(p[c]) * double(p[c]);
                nq2 += double(q[c]) * double(q[c]);
            }
            double np = std::sqrt(std::max(np2, 1e-12));
            double nq = std::sqrt(std::max(nq2, 1e-12));
            double cosv = dot / (np * nq);
            loss += 1.0 - cosv;
            // d/dp (1 - p.q/(|p||q|)) = -(q/(|p||q|) - cos * p/|p|^2)
            T* dp = d_gout.row(r);
            for (int c = 0; c < zd; ++c)
                dp[c] = T((-(double(q[c]) / (np * nq)) + cosv * double(p[c]) / np2) / B);
        }
        loss /= B;
    } else {
        // squared error summed over dims, averaged over the batch
        for (int r = 0; r < B; ++r) {
            const T* p = g_out.row(r);
            const T* q = target.row(r);
            T* dp = d_gout.row(r);
            for (int c = 0; c < zd; ++c) {
                double diff = double(p[c]) - double(q[c]);
                loss += diff * diff;
                dp[c] = T(2.0 * diff / B);
            }
            if (pair.cfg.reward_head) {
                double diff = double(p[zd]) - double(rewards[r]);
                if (variant == EncoderTarget::zs_plus_reward) {
                    loss += diff * diff;
                    dp[zd] = T(2.0 * diff / B);
                } else {
                    dp[zd] = T(0);
                }
            }
        }
        loss /= B;
    }

    Mat<T> d_gin = pair.g.backward(d_gout, g_tape);
    // split off the zs part (columns after action_dim) and flow into f
    Mat<T> d_zs(B, zd);
    for (int r = 0; r < B; ++r)
        std::memcpy(d_zs.row(r), d_gin.row(r) + pair.cfg.action_dim, zd * sizeof(T));
    pair.f.backward(d_zs, f_tape);
    return T(loss);
}

}  // namespace td7
