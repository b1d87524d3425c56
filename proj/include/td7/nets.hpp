#pragma once

#include "td7/diffnet.hpp"

namespace td7 {

// Value and policy networks. In the default configuration both take learned
// embeddings alongside the raw state/action, with a linear+AvgL1Norm input
// stage for the raw part. With sale_inputs=false they collapse to the plain
// two-hidden-layer nets used by TD3.

enum class NormVariant : uint8_t {
    standard,     // AvgL1Norm on zs and on the linear input stage
    no_phi_norm,  // AvgL1Norm on zs only
    none,         // no AvgL1Norm anywhere
    norm_zsa,     // standard plus AvgL1Norm on the g output
};

template <class T>
struct ValueNetConfig {
    int state_dim = 0;
    int action_dim = 0;
    int zs_dim = 256;
    int phi_dim = 256;
    int hidden_dim = 256;
    bool sale_inputs = true;
    bool elu = true;  // false reverts the trunk to ReLU
    bool norm_phi = true;
    bool use_zsa = true;
    bool use_zs = true;
    bool use_sa = true;
};

template <class T>
struct ValueTape {
    Mat<T> sa;        // concatenated raw input
    Mat<T> phi_pre;   // linear stage output before norm
    Mat<T> phi;       // after norm (or same as phi_pre)
    Mat<T> trunk_in;  // [zsa | zs | phi] or [s | a]
    MlpTape<T> trunk;
};

template <class T>
struct ValueInputGrads {
    Mat<T> d_zsa, d_zs, d_s, d_a;
};

template <class T>
struct ValueNet {
    ValueNetConfig<T> cfg;
    Linear<T> l0;
    Mlp<T> trunk;

    void init(const ValueNetConfig<T>& c, Rng& rng) {
        cfg = c;
        Act h = c.elu ? Act::elu : Act::relu;
        if (c.sale_inputs) {
            l0.init(c.state_dim + c.action_dim, c.phi_dim, rng);
            trunk.init({2 * c.zs_dim + c.phi_dim, c.hidden_dim, c.hidden_dim, 1},
                       {h, h, Act::identity}, rng);
        } else {
            trunk.init({c.state_dim + c.action_dim, c.hidden_dim, c.hidden_dim, 1},
                       {h, h, Act::identity}, rng);
        }
    }

    // q: [batch x 1]. Masked components are fed as zeros, which makes the
    // output invariant to them.
    const Mat<T>& forward(const Mat<T>& s, const Mat<T>& a, const Mat<T>& zsa, const Mat<T>& zs,
                          ValueTape<T>& t) const {
        if (!cfg.sale_inputs) {
            hconcat(s, a, t.trunk_in);
            return trunk.forward(t.trunk_in, t.trunk);
        }
        const int B = s.rows;
        if (cfg.use_sa) {
            hconcat(s, a, t.sa);
            l0.forward(t.sa, t.phi_pre);
            if (cfg.norm_phi)
                avg_l1_norm_rows(t.phi_pre, t.phi);
            else
                t.phi = t.phi_pre;
        } else {
            t.phi.resize(B, cfg.phi_dim);
            t.phi.zero();
        }
        t.trunk_in.resize(B, 2 * cfg.zs_dim + cfg.phi_dim);
        t.trunk_in.zero();
        for (int r = 0; r < B; ++r) {
            T* dst = t.trunk_in.row(r);
            if (cfg.use_zsa) std::memcpy(dst, zsa.row(r), cfg.zs_dim * sizeof(T));
            if (cfg.use_zs) std::memcpy(dst + cfg.zs_dim, zs.row(r), cfg.zs_dim * sizeof(T));
            std::memcpy(dst + 2 * cfg.zs_dim, t.phi.row(r), cfg.phi_dim * sizeof(T));
        }
        return trunk.forward(t.trunk_in, t.trunk);
    }

    ValueInputGrads<T> backward(const Mat<T>& dq, const ValueTape<T>& t) {
        ValueInputGrads<T> ig;
        Mat<T> d_in = trunk.backward(dq, t.trunk);
        const int B = d_in.rows;
        if (!cfg.sale_inputs) {
            ig.d_s.resize(B, cfg.state_dim);
            ig.d_a.resize(B, cfg.action_dim);
            for (int r = 0; r < B; ++r) {
                std::memcpy(ig.d_s.row(r), d_in.row(r), cfg.state_dim * sizeof(T));
                std::memcpy(ig.d_a.row(r), d_in.row(r) + cfg.state_dim,
                            cfg.action_dim * sizeof(T));
            }
            return ig;
        }
        ig.d_zsa.resize(B, cfg.zs_dim);
        ig.d_zs.resize(B, cfg.zs_dim);
        Mat<T> d_phi(B, cfg.phi_dim);
        for (int r = 0; r < B; ++r) {
            const T* src = d_in.row(r);
            if (cfg.use_zsa) std::memcpy(ig.d_zsa.row(r), src, cfg.zs_dim * sizeof(T));
            if (cfg.use_zs) std::memcpy(ig.d_zs.row(r), src + cfg.zs_dim, cfg.zs_dim * sizeof(T));
            std::memcpy(d_phi.row(r), src + 2 * cfg.zs_dim, cfg.phi_dim * sizeof(T));
        }
        ig.d_s.resize(B, cfg.state_dim);
        ig.d_a.resize(B, cfg.action_dim);
        if (cfg.use_sa) {
            Mat<T> d_pre;
            if (cfg.norm_phi)
                avg_l1_norm_backward_rows(t.phi_pre, t.phi, d_phi, d_pre);
            else
                d_pre = std::move(d_phi);
            Mat<T> d_sa;
            l0.backward(t.sa, d_pre, d_sa);
            for (int r = 0; r < B; ++r) {
                std::memcpy(ig.d_s.row(r), d_sa.row(r), cfg.state_dim * sizeof(T));
                std::memcpy(ig.d_a.row(r), d_sa.row(r) + cfg.state_dim,
                            cfg.action_dim * sizeof(T));
            }
        }
        return ig;
    }

    void zero_grad() {
        l0.zero_grad();
        trunk.zero_grad();
    }

    void step(const AdamOpts& o) {
        if (cfg.sale_inputs && cfg.use_sa) l0.step(o);
        trunk.step(o);
    }

    void copy_params_from(const ValueNet& other) {
        if (cfg.sale_inputs) l0.copy_params_from(other.l0);
        trunk.copy_params_from(other.trunk);
    }

    void polyak_from(const ValueNet& other, T tau) {
        if (cfg.sale_inputs) l0.polyak_from(other.l0, tau);
        trunk.polyak_from(other.trunk, tau);
    }

    template <class F>
    void visit_params(F&& f) {
        if (cfg.sale_inputs) {
            f(l0.w, l0.gw);
            f(l0.b, l0.gb);
        }
        trunk.visit_params(f);
    }
};

template <class T>
struct PolicyNetConfig {
    int state_dim = 0;
    int action_dim = 0;
    int zs_dim = 256;
    int phi_dim = 256;
    int hidden_dim = 256;
    bool sale_inputs = true;
    bool norm_phi = true;
    bool use_zs = true;
    bool use_s = true;
};

template <class T>
struct PolicyTape {
    Mat<T> s_in;
    Mat<T> phi_pre;
    Mat<T> phi;
    Mat<T> trunk_in;
    MlpTape<T> trunk;
};

template <class T>
struct PolicyNet {
    PolicyNetConfig<T> cfg;
    Linear<T> l0;
    Mlp<T> trunk;

    void init(const PolicyNetConfig<T>& c, Rng& rng) {
        cfg = c;
        if (c.sale_inputs) {
            l0.init(c.state_dim, c.phi_dim, rng);
            trunk.init({c.zs_dim + c.phi_dim, c.hidden_dim, c.hidden_dim, c.action_dim},
                       {Act::relu, Act::relu, Act::tanh}, rng);
        } else {
            trunk.init({c.state_dim, c.hidden_dim, c.hidden_dim, c.action_dim},
                       {Act::relu, Act::relu, Act::tanh}, rng);
        }
    }

    const Mat<T>& forward(const Mat<T>& s, const Mat<T>& zs, PolicyTape<T>& t) const {
        if (!cfg.sale_inputs) return trunk.forward(s, t.trunk);
        const int B = s.rows;
        t.s_in = s;
        if (cfg.use_s) {
            l0.forward(s, t.phi_pre);
            if (cfg.norm_phi)
                avg_l1_norm_rows(t.phi_pre, t.phi);
            else
                t.phi = t.phi_pre;
        } else {
            t.phi.resize(B, cfg.phi_dim);
            t.phi.zero();
        }
        t.trunk_in.resize(B, cfg.zs_dim + cfg.phi_dim);
        t.trunk_in.zero();
        for (int r = 0; r < B; ++r) {
            T* dst = t.trunk_in.row(r);
            if (cfg.use_zs) std::memcpy(dst, zs.row(r), cfg.zs_dim * sizeof(T));
            std::memcpy(dst + cfg.zs_dim, t.phi.row(r), cfg.phi_dim * sizeof(T));
        }
        return trunk.forward(t.trunk_in, t.trunk);
    }

    // Returns dL/d(state); zs is treated as a constant input.
    Mat<T> backward(const Mat<T>& da, const PolicyTape<T>& t) {
        Mat<T> d_in = trunk.backward(da, t.trunk);
        if (!cfg.sale_inputs) return d_in;
        const int B = d_in.rows;
        Mat<T> d_s(B, cfg.state_dim);
        if (cfg.use_s) {
            Mat<T> d_phi(B, cfg.phi_dim);
            for (int r = 0; r < B; ++r)
                std::memcpy(d_phi.row(r), d_in.row(r) + cfg.zs_dim, cfg.phi_dim * sizeof(T));
            Mat<T> d_pre;
            if (cfg.norm_phi)
                avg_l1_norm_backward_rows(t.phi_pre, t.phi, d_phi, d_pre);
            else
                d_pre = std::move(d_phi);
            l0.backward(t.s_in, d_pre, d_s);
        }
        return d_s;
    }

    void zero_grad() {
        l0.zero_grad();
        trunk.zero_grad();
    }

    void step(const AdamOpts& o) {
        if (cfg.sale_inputs && cfg.use_s) l0.step(o);
        trunk.step(o);
    }

    void copy_params_from(const PolicyNet& other) {
        if (cfg.sale_inputs) l0.copy_params_from(other.l0);
        trunk.copy_params_from(other.trunk);
    }

    template <class F>
    void visit_params(F&& f) {
        if (cfg.sale_inputs) {
            f(l0.w, l0.gw);
            f(l0.b, l0.gb);
        }
        trunk.visit_params(f);
    }
};

}  // namespace td7
