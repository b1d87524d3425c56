#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "td7/mat.hpp"
#include "td7/rng.hpp"

namespace td7 {

// Feed-forward network core: linear layers, activations, reverse-mode
// gradients and Adam. Templated on the scalar type; training runs in float,
// gradient-check tests instantiate double.

enum class Act : uint8_t { identity, relu, elu, tanh, avg_l1_norm };

constexpr double kAvgL1Eps = 1e-8;

// ---- elementwise activations ----

template <class T>
inline T act_forward(Act a, T x) {
    switch (a) {
        case Act::identity: return x;
        case Act::relu: return x > T(0) ? x : T(0);
        case Act::elu: return x > T(0) ? x : T(std::expm1(double(x)));
        case Act::tanh: return T(std::tanh(double(x)));
        default: return x;
    }
}

// Derivative in terms of pre-activation x and post-activation y.
template <class T>
inline T act_deriv(Act a, T x, T y) {
    switch (a) {
        case Act::identity: return T(1);
        case Act::relu: return x > T(0) ? T(1) : T(0);
        case Act::elu: return x > T(0) ? T(1) : y + T(1);
        case Act::tanh: return T(1) - y * y;
        default: return T(1);
    }
}

// Divides each row by its mean absolute value (with an epsilon floor), so
// the output row has unit mean-abs whenever the input is not near zero.
template <class T>
void avg_l1_norm_rows(const Mat<T>& x, Mat<T>& y) {
    y.resize(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        T* yr = y.row(r);
        double m = 0;
        for (int c = 0; c < x.cols; ++c) m += std::abs(double(xr[c]));
        m /= x.cols;
        T inv = T(1.0 / std::max(m, kAvgL1Eps));
        for (int c = 0; c < x.cols; ++c) yr[c] = xr[c] * inv;
    }
}

// Backward pass of avg_l1_norm_rows. dx may alias dy.
template <class T>
void avg_l1_norm_backward_rows(const Mat<T>& x, const Mat<T>& y, const Mat<T>& dy, Mat<T>& dx) {
    dx.resize(x.rows, x.cols);
    const int n = x.cols;
    for (int r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        const T* yr = y.row(r);
        const T* gr = dy.row(r);
        T* dr = dx.row(r);
        double m = 0;
        for (int c = 0; c < n; ++c) m += std::abs(double(xr[c]));
        m /= n;
        if (m > kAvgL1Eps) {
            double s = 0;  // (1/n) sum_i g_i y_i
            for (int c = 0; c < n; ++c) s += double(gr[c]) * double(yr[c]);
            s /= n;
            T invm = T(1.0 / m);
            for (int c = 0; c < n; ++c) {
                T sgn = xr[c] > T(0) ? T(1) : (xr[c] < T(0) ? T(-1) : T(0));
                dr[c] = invm * (gr[c] - sgn * T(s));
            }
        } else {
            T inv = T(1.0 / kAvgL1Eps);
            for (int c = 0; c < n; ++c) dr[c] = gr[c] * inv;
        }
    }
}

// ---- Adam ----

struct AdamOpts {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<T> m, v;
    int64_t step = 0;

    void init(size_t n) {
        m.assign(n, T(0));
        v.assign(n, T(0));
        step = 0;
    }
};

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& st, const AdamOpts& o) {
    if (params.size() != grads.size() || st.m.size() != params.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    for (T g : grads)
        if (!std::isfinite(double(g))) throw std::runtime_error("adam_step: non-finite gradient");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(o.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(o.beta2, double(st.step));
    for (size_t i = 0; i < params.size(); ++i) {
        double g = double(grads[i]);
        double m = o.beta1 * double(st.m[i]) + (1.0 - o.beta1) * g;
        double v = o.beta2 * double(st.v[i]) + (1.0 - o.beta2) * g * g;
        st.m[i] = T(m);
        st.v[i] = T(v);
        params[i] -= T(o.lr * (m / bc1) / (std::sqrt(v / bc2) + o.eps));
    }
}

// ---- losses ----

// 0.5 r^2 inside |r| <= k, k(|r| - 0.5 k) outside.
template <class T>
inline T huber(T r, T k) {
    T a = std::abs(r);
    return a <= k ? T(0.5) * r * r : k * (a - T(0.5) * k);
}

template <class T>
inline T huber_grad(T r, T k) {
    return std::abs(r) <= k ? r : (r > T(0) ? k : -k);
}

// ---- linear layer ----

template <class T>
struct Linear {
    int in = 0, out = 0;
    std::vector<T> w;  // [out * in], row per output unit
    std::vector<T> b;  // [out]
    std::vector<T> gw, gb;
    AdamState<T> aw, ab;

    void init(int in_dim, int out_dim, Rng& rng) {
        in = in_dim;
        out = out_dim;
        w.resize(size_t(out) * in);
        b.resize(out);
        double bound = 1.0 / std::sqrt(double(in));
        for (auto& x : w) x = T(rng.uniform(-bound, bound));
        for (auto& x : b) x = T(rng.uniform(-bound, bound));
        gw.assign(w.size(), T(0));
        gb.assign(b.size(), T(0));
        aw.init(w.size());
        ab.init(b.size());
    }

    void forward(const Mat<T>& x, Mat<T>& y) const {
        if (x.cols != in) throw std::invalid_argument("Linear::forward: input width mismatch");
        y.resize(x.rows, out);
        for (int r = 0; r < x.rows; ++r) {
            const T* xr = x.row(r);
            T* yr = y.row(r);
            for (int o = 0; o < out; ++o) {
                const T* wr = w.data() + size_t(o) * in;
                double acc = double(b[o]);
                for (int i = 0; i < in; ++i) acc += double(wr[i]) * double(xr[i]);
                yr[o] = T(acc);
            }
        }
    }

    // Accumulates parameter gradients; writes input gradient to dx.
    void backward(const Mat<T>& x, const Mat<T>& dy, Mat<T>& dx) {
        dx.resize(x.rows, in);
        dx.zero();
        for (int r = 0; r < x.rows; ++r) {
            const T* xr = x.row(r);
            const T* gr = dy.row(r);
            T* dr = dx.row(r);
            for (int o = 0; o < out; ++o) {
                T g = gr[o];
                if (g == T(0)) continue;
                const T* wr = w.data() + size_t(o) * in;
                T* gwr = gw.data() + size_t(o) * in;
                gb[o] += g;
                for (int i = 0; i < in; ++i) {
                    gwr[i] += g * xr[i];
                    dr[i] += g * wr[i];
                }
            }
        }
    }

    void zero_grad() {
        std::fill(gw.begin(), gw.end(), T(0));
        std::fill(gb.begin(), gb.end(), T(0));
    }

    void step(const AdamOpts& o) {
        adam_step<T>(w, gw, aw, o);
        adam_step<T>(b, gb, ab, o);
    }

    void copy_params_from(const Linear& other) {
        w = other.w;
        b = other.b;
    }

    void polyak_from(const Linear& other, T tau) {
        for (size_t i = 0; i < w.size(); ++i) w[i] = (T(1) - tau) * w[i] + tau * other.w[i];
        for (size_t i = 0; i < b.size(); ++i) b[i] = (T(1) - tau) * b[i] + tau * other.b[i];
    }

    size_t param_count() const { return w.size() + b.size(); }
};

// ---- MLP: a stack of linear layers with per-layer activation tags ----

template <class T>
struct MlpTape {
    Mat<T> input;
    std::vector<Mat<T>> pre;   // pre-activation per layer
    std::vector<Mat<T>> post;  // post-activation per layer
};

template <class T>
struct Mlp {
    std::vector<Linear<T>> layers;
    std::vector<Act> acts;

    void init(const std::vector<int>& dims, const std::vector<Act>& activations, Rng& rng) {
        if (dims.size() < 2 || activations.size() != dims.size() - 1)
            throw std::invalid_argument("Mlp::init: bad spec");
        layers.resize(dims.size() - 1);
        acts = activations;
        for (size_t i = 0; i + 1 < dims.size(); ++i) layers[i].init(dims[i], dims[i + 1], rng);
    }

    int in_dim() const { return layers.front().in; }
    int out_dim() const { return layers.back().out; }

    const Mat<T>& forward(const Mat<T>& x, MlpTape<T>& tape) const {
        tape.input = x;
        tape.pre.resize(layers.size());
        tape.post.resize(layers.size());
        const Mat<T>* cur = &tape.input;
        for (size_t i = 0; i < layers.size(); ++i) {
            layers[i].forward(*cur, tape.pre[i]);
            if (acts[i] == Act::avg_l1_norm) {
                avg_l1_norm_rows(tape.pre[i], tape.post[i]);
            } else if (acts[i] == Act::identity) {
                tape.post[i] = tape.pre[i];
            } else {
                auto& z = tape.pre[i];
                auto& y = tape.post[i];
                y.resize(z.rows, z.cols);
                for (size_t k = 0; k < z.d.size(); ++k) y.d[k] = act_forward(acts[i], z.d[k]);
            }
            cur = &tape.post[i];
        }
        return *cur;
    }

    Mat<T> forward(const Mat<T>& x) const {
        MlpTape<T> tape;
        return forward(x, tape);
    }

    // Accumulates parameter gradients from dL/d(output); returns dL/d(input).
    Mat<T> backward(const Mat<T>& dout, const MlpTape<T>& tape) {
        Mat<T> g = dout;
        Mat<T> gin;
        for (int i = int(layers.size()) - 1; i >= 0; --i) {
            if (acts[i] == Act::avg_l1_norm) {
                Mat<T> tmp;
                avg_l1_norm_backward_rows(tape.pre[i], tape.post[i], g, tmp);
                g = std::move(tmp);
            } else if (acts[i] != Act::identity) {
                const auto& z = tape.pre[i];
                const auto& y = tape.post[i];
                for (size_t k = 0; k < g.d.size(); ++k)
                    g.d[k] *= act_deriv(acts[i], z.d[k], y.d[k]);
            }
            const Mat<T>& layer_in = (i == 0) ? tape.input : tape.post[i - 1];
            layers[i].backward(layer_in, g, gin);
            g = std::move(gin);
        }
        return g;
    }

    void zero_grad() {
        for (auto& l : layers) l.zero_grad();
    }

    void step(const AdamOpts& o) {
        for (auto& l : layers) l.step(o);
    }

    void copy_params_from(const Mlp& other) {
        for (size_t i = 0; i < layers.size(); ++i) layers[i].copy_params_from(other.layers[i]);
    }

    void polyak_from(const Mlp& other, T tau) {
        for (size_t i = 0; i < layers.size(); ++i) layers[i].polyak_from(other.layers[i], tau);
    }

    size_t param_count() const {
        size_t n = 0;
        for (auto& l : layers) n += l.param_count();
        return n;
    }

    // Flat views over parameters and gradients, used by tests and snapshots.
    template <class F>
    void visit_params(F&& f) {
        for (auto& l : layers) {
            f(l.w, l.gw);
            f(l.b, l.gb);
        }
    }
};

}  // namespace td7
