#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "td7/nets.hpp"
#include "td7/replay.hpp"
#include "td7/rng.hpp"
#include "td7/sale.hpp"

namespace td7 {

template <class T>
struct AgentConfig {
    int state_dim = 0;
    int action_dim = 0;

    int zs_dim = 256;
    int hidden_dim = 256;
    int phi_dim = 256;
    int batch_size = 256;

    double discount = 0.99;
    double target_policy_noise = 0.2;
    double noise_clip = 0.5;
    double exploration_noise = 0.1;
    int policy_update_frequency = 2;
    int target_update_frequency = 250;
    int64_t initial_random_steps = 25000;
    double bc_weight = 0.0;  // 0 online, 0.1 offline
    double huber_threshold = 1.0;
    AdamOpts adam;

    // component switches (defaults give the full algorithm)
    bool use_sale = true;
    bool use_clipping = true;
    bool use_lap = true;  // off: uniform sampling and MSE critic loss
    bool fixed_embeddings = true;

    // input masks
    bool q_use_zsa = true;
    bool q_use_zs = true;
    bool q_use_sa = true;
    bool pi_use_zs = true;
    bool pi_use_s = true;

    NormVariant norm = NormVariant::standard;
    EncoderTarget encoder_target = EncoderTarget::next_zs;
    double end_to_end_beta = 0.0;  // >0: encoders trained through the value loss

    // reverts toward TD3
    bool single_q_actor = false;
    bool relu_value = false;
    double polyak_tau = 0.0;  // >0: per-step polyak target updates instead of periodic

    ValueNetConfig<T> value_net_config() const {
        ValueNetConfig<T> c;
        c.state_dim = state_dim;
        c.action_dim = action_dim;
        c.zs_dim = zs_dim;
        c.phi_dim = phi_dim;
        c.hidden_dim = hidden_dim;
        c.sale_inputs = use_sale;
        c.elu = !relu_value;
        c.norm_phi = (norm == NormVariant::standard || norm == NormVariant::norm_zsa);
        c.use_zsa = q_use_zsa;
        c.use_zs = q_use_zs;
        c.use_sa = q_use_sa;
        return c;
    }

    PolicyNetConfig<T> policy_net_config() const {
        PolicyNetConfig<T> c;
        c.state_dim = state_dim;
        c.action_dim = action_dim;
        c.zs_dim = zs_dim;
        c.phi_dim = phi_dim;
        c.hidden_dim = hidden_dim;
        c.sale_inputs = use_sale;
        c.norm_phi = (norm == NormVariant::standard || norm == NormVariant::norm_zsa);
        c.use_zs = pi_use_zs;
        c.use_s = pi_use_s;
        return c;
    }

    EncoderConfig<T> encoder_config() const {
        EncoderConfig<T> c;
        c.state_dim = state_dim;
        c.action_dim = action_dim;
        c.zs_dim = zs_dim;
        c.hidden_dim = hidden_dim;
        c.norm_zsa = (norm == NormVariant::norm_zsa);
        c.reward_head = (encoder_target == EncoderTarget::zs_plus_reward);
        return c;
    }
};

struct StepMetrics {
    double encoder_loss = 0;
    double critic_loss = 0;
    double actor_loss = std::numeric_limits<double>::quiet_NaN();  // NaN when skipped
    double mean_target = 0;
    double mean_value_estimate = 0;
    double q_min = 0;
    double q_max = 0;
};

// Running self-checks maintained every train step; used by the test suites.
struct AgentDiagnostics {
    int64_t clip_violations = 0;      // clipped target outside pre-update bounds
    int64_t bound_regressions = 0;    // q_min rose or q_max fell
    int64_t policy_updates = 0;
    int64_t target_syncs = 0;
};

template <class T>
class Agent {
public:
    Agent(const AgentConfig<T>& cfg, uint64_t seed) : cfg_(cfg) {
        Rng init_rng = substream(seed, "init");
        if (cfg.use_sale || cfg.end_to_end_beta > 0) {
            enc_.init(cfg.encoder_config(), init_rng,
                      cfg.encoder_target == EncoderTarget::polyak_zs);
        }
        q1_.init(cfg.value_net_config(), init_rng);
        q2_.init(cfg.value_net_config(), init_rng);
        pi_.init(cfg.policy_net_config(), init_rng);
        q1_t_ = q1_;
        q2_t_ = q2_;
        pi_t_ = pi_;
        explore_rng_ = substream(seed, "explore");
        noise_rng_ = substream(seed, "target_noise");
        replay_rng_ = substream(seed, "replay");
    }

    const AgentConfig<T>& config() const { return cfg_; }
    int64_t train_steps() const { return train_steps_; }
    double q_min() const { return q_min_; }
    double q_max() const { return q_max_; }
    const AgentDiagnostics& diagnostics() const { return diag_; }
    const StepMetrics& last_metrics() const { return last_; }

    const PolicyNet<T>& policy() const { return pi_; }
    const PolicyNet<T>& target_policy() const { return pi_t_; }
    const Mlp<T>& fixed_f() const { return enc_.fixed.f; }  // only meaningful with SALE on
    const EncoderGenerations<T>& encoders() const { return enc_; }
    EncoderGenerations<T>& encoders() { return enc_; }
    const ValueNet<T>& value1() const { return q1_; }
    const ValueNet<T>& value2() const { return q2_; }

    bool uses_encoder() const { return sale_on_(); }

    // Deterministic policy action for a single state, using the given
    // encoder f (checkpoint evaluation passes the checkpoint copy).
    static std::vector<float> act_deterministic(const PolicyNet<T>& pi, const Mlp<T>* f,
                                                std::span<const float> s) {
        Mat<T> sm(1, int(s.size()));
        for (size_t i = 0; i < s.size(); ++i) sm(0, i) = T(s[i]);
        Mat<T> zs;
        if (pi.cfg.sale_inputs && f) zs = f->forward(sm);
        PolicyTape<T> tape;
        const Mat<T>& a = pi.forward(sm, zs, tape);
        std::vector<float> out(a.cols);
        for (int c = 0; c < a.cols; ++c) out[c] = float(a(0, c));
        return out;
    }

    std::vector<float> select_action(std::span<const float> s, bool explore, int64_t env_step) {
        if (explore && env_step < cfg_.initial_random_steps) {
            std::vector<float> a(cfg_.action_dim);
            for (auto& x : a) x = float(explore_rng_.uniform(-1.0, 1.0));
            return a;
        }
        const Mlp<T>* f = sale_on_() ? &acting_encoder_().f : nullptr;
        std::vector<float> a = act_deterministic(pi_, f, s);
        if (explore) {
            for (auto& x : a) {
                x += float(explore_rng_.normal(cfg_.exploration_noise));
                x = std::clamp(x, -1.0f, 1.0f);
            }
        }
        return a;
    }

    // One full training step: sample, encoder update, target computation,
    // clip-bound update, critic update, priority update, delayed actor
    // update, periodic target sync.
    StepMetrics train_step(LapBuffer& buffer) {
        train_steps_ += 1;
        StepMetrics m;
        m.actor_loss = last_.actor_loss;

        SampleBatch batch = buffer.sample(cfg_.batch_size, replay_rng_);
        buffer.gather(batch.indices, bs_, ba_, br_, bs_next_, bnt_);
        const int B = bs_.rows;

        // ---- embeddings feeding the critic (and their source) ----
        Mat<T> zs, zsa;
        MlpTape<T> f_tape, g_tape;  // only used in end-to-end mode
        Mat<T> g_in;
        const bool e2e = cfg_.end_to_end_beta > 0;
        if (sale_on_()) {
            if (e2e) {
                zs = enc_.current.f.forward(bs_, f_tape);
                hconcat(ba_, zs, g_in);
                Mat<T> g_out = enc_.current.g.forward(g_in, g_tape);
                zsa = strip_reward_head_(g_out);
            } else {
                const EncoderPair<T>& src =
                    cfg_.fixed_embeddings ? enc_.fixed : enc_.current;
                zs = src.f.forward(bs_);
                zsa = src.encode_state_action(zs, ba_);
            }
        }

        // ---- decoupled encoder update ----
        if (sale_on_() && !e2e) {
            enc_.current.zero_grad();
            EncoderLossAux<T> aux;
            Mat<T> next_a;
            if (cfg_.encoder_target == EncoderTarget::next_zsa) {
                next_a = smoothed_target_actions_(bs_next_);
                aux.next_actions = &next_a;
            }
            if (cfg_.encoder_target == EncoderTarget::polyak_zs) aux.polyak = &*enc_.polyak;
            m.encoder_loss = double(encoder_loss_backward(enc_.current, bs_, ba_, bs_next_, br_,
                                                          cfg_.encoder_target, aux));
            enc_.current.step(cfg_.adam);
            enc_.polyak_update();
        }

        // ---- target computation with pre-update bounds ----
        const double qmin_pre = q_min_, qmax_pre = q_max_;
        std::vector<T> target(B);
        {
            Mat<T> zs_next, zsa_next;
            Mat<T> a_next = smoothed_target_actions_(bs_next_, &zs_next);
            if (sale_on_()) {
                const EncoderPair<T>& tsrc = target_encoder_();
                zsa_next = tsrc.encode_state_action(zs_next, a_next);
            }
            ValueTape<T> t1, t2;
            const Mat<T>& tq1 = q1_t_.forward(bs_next_, a_next, zsa_next, zs_next, t1);
            const Mat<T>& tq2 = q2_t_.forward(bs_next_, a_next, zsa_next, zs_next, t2);
            double tsum = 0;
            for (int k = 0; k < B; ++k) {
                double q = std::min(double(tq1(k, 0)), double(tq2(k, 0)));
                if (cfg_.use_clipping) {
                    q = std::clamp(q, qmin_pre, qmax_pre);
                    if (q < qmin_pre - 1e-9 || q > qmax_pre + 1e-9) diag_.clip_violations++;
                }
                target[k] = T(double(br_[k]) + double(bnt_[k]) * cfg_.discount * q);
                tsum += double(target[k]);
            }
            m.mean_target = tsum / B;
        }

        // ---- clip-bound update (never shrinks) ----
        for (int k = 0; k < B; ++k) {
            q_min_ = std::min(q_min_, double(target[k]));
            q_max_ = std::max(q_max_, double(target[k]));
        }
        if (q_min_ > qmin_pre || q_max_ < qmax_pre) diag_.bound_regressions++;
        m.q_min = q_min_;
        m.q_max = q_max_;

        // ---- critic update ----
        std::vector<double> abs_td(B);
        {
            q1_.zero_grad();
            q2_.zero_grad();
            ValueTape<T> t1, t2;
            const Mat<T>& qv1 = q1_.forward(bs_, ba_, zsa, zs, t1);
            const Mat<T>& qv2 = q2_.forward(bs_, ba_, zsa, zs, t2);
            Mat<T> d1(B, 1), d2(B, 1);
            double loss = 0, qsum = 0;
            const T k_huber = T(cfg_.huber_threshold);
            for (int k = 0; k < B; ++k) {
                T r1 = qv1(k, 0) - target[k];
                T r2 = qv2(k, 0) - target[k];
                if (cfg_.use_lap) {
                    loss += double(huber(r1, k_huber)) + double(huber(r2, k_huber));
                    d1(k, 0) = huber_grad(r1, k_huber) / T(B);
                    d2(k, 0) = huber_grad(r2, k_huber) / T(B);
                } else {
                    loss += double(r1) * double(r1) + double(r2) * double(r2);
                    d1(k, 0) = T(2) * r1 / T(B);
                    d2(k, 0) = T(2) * r2 / T(B);
                }
                abs_td[k] = std::max(std::abs(double(r1)), std::abs(double(r2)));
                qsum += 0.5 * (double(qv1(k, 0)) + double(qv2(k, 0)));
            }
            m.critic_loss = loss / B;
            m.mean_value_estimate = qsum / B;
            if (!std::isfinite(m.critic_loss))
                throw std::runtime_error("train_step: non-finite critic loss at step " +
                                         std::to_string(train_steps_));
            ValueInputGrads<T> ig1 = q1_.backward(d1, t1);
            ValueInputGrads<T> ig2 = q2_.backward(d2, t2);
            if (e2e) {
                // value-loss gradients flow into the current encoders, plus
                // beta-weighted dynamics-prediction loss
                enc_.current.zero_grad();
                Mat<T> d_zsa(B, cfg_.zs_dim), d_zs_direct(B, cfg_.zs_dim);
                for (int k = 0; k < B; ++k)
                    for (int c = 0; c < cfg_.zs_dim; ++c) {
                        d_zsa(k, c) = ig1.d_zsa(k, c) + ig2.d_zsa(k, c);
                        d_zs_direct(k, c) = ig1.d_zs(k, c) + ig2.d_zs(k, c);
                    }
                Mat<T> d_gout = expand_reward_head_(d_zsa);
                Mat<T> d_gin = enc_.current.g.backward(d_gout, g_tape);
                for (int k = 0; k < B; ++k)
                    for (int c = 0; c < cfg_.zs_dim; ++c)
                        d_zs_direct(k, c) += d_gin(k, cfg_.action_dim + c);
                enc_.current.f.backward(d_zs_direct, f_tape);
                double enc_loss = double(encoder_loss_backward_scaled_(T(cfg_.end_to_end_beta)));
                m.encoder_loss = enc_loss;
                enc_.current.step(cfg_.adam);
            }
            q1_.step(cfg_.adam);
            q2_.step(cfg_.adam);
        }

        // ---- priority update ----
        if (cfg_.use_lap) buffer.update_priorities(batch.indices, abs_td);

        // ---- delayed policy update ----
        if (train_steps_ % cfg_.policy_update_frequency == 0) {
            m.actor_loss = actor_update_(zs);
            diag_.policy_updates++;
        }

        // ---- target network update ----
        if (cfg_.polyak_tau > 0) {
            q1_t_.polyak_from(q1_, T(cfg_.polyak_tau));
            q2_t_.polyak_from(q2_, T(cfg_.polyak_tau));
            pi_t_.trunk.polyak_from(pi_.trunk, T(cfg_.polyak_tau));
            if (pi_.cfg.sale_inputs) pi_t_.l0.polyak_from(pi_.l0, T(cfg_.polyak_tau));
        } else if (train_steps_ % cfg_.target_update_frequency == 0) {
            target_sync();
        }

        last_ = m;
        return m;
    }

    void target_sync() {
        q1_t_.copy_params_from(q1_);
        q2_t_.copy_params_from(q2_);
        pi_t_.copy_params_from(pi_);
        if (sale_on_()) enc_.sync();
        diag_.target_syncs++;
    }

    // Accessors used by snapshots and tests.
    ValueNet<T>& value1() { return q1_; }
    ValueNet<T>& value2() { return q2_; }
    ValueNet<T>& target_value1() { return q1_t_; }
    ValueNet<T>& target_value2() { return q2_t_; }
    PolicyNet<T>& policy() { return pi_; }
    PolicyNet<T>& target_policy() { return pi_t_; }
    int64_t& train_steps_ref() { return train_steps_; }
    void set_bounds(double lo, double hi) {
        q_min_ = lo;
        q_max_ = hi;
    }
    Rng& explore_rng() { return explore_rng_; }
    Rng& noise_rng() { return noise_rng_; }
    Rng& replay_rng() { return replay_rng_; }

private:
    bool sale_on_() const { return cfg_.use_sale; }

    const EncoderPair<T>& acting_encoder_() const {
        return cfg_.fixed_embeddings && cfg_.end_to_end_beta == 0 ? enc_.fixed : enc_.current;
    }

    EncoderPair<T>& acting_encoder_mut_() {
        return cfg_.fixed_embeddings && cfg_.end_to_end_beta == 0 ? enc_.fixed : enc_.current;
    }

    const EncoderPair<T>& target_encoder_() const {
        return cfg_.fixed_embeddings && cfg_.end_to_end_beta == 0 ? enc_.target_fixed
                                                                  : enc_.current;
    }

    Mat<T> strip_reward_head_(const Mat<T>& g_out) const {
        if (!enc_.current.cfg.reward_head) return g_out;
        Mat<T> zsa(g_out.rows, cfg_.zs_dim);
        for (int r = 0; r < g_out.rows; ++r)
            std::memcpy(zsa.row(r), g_out.row(r), cfg_.zs_dim * sizeof(T));
        return zsa;
    }

    Mat<T> expand_reward_head_(const Mat<T>& d_zsa) const {
        if (!enc_.current.cfg.reward_head) return d_zsa;
        Mat<T> d(d_zsa.rows, cfg_.zs_dim + 1);
        for (int r = 0; r < d_zsa.rows; ++r)
            std::memcpy(d.row(r), d_zsa.row(r), cfg_.zs_dim * sizeof(T));
        return d;
    }

    // a' = pi_t(zs', s') + clip(N(0, sigma^2), -c, c), clipped to [-1, 1].
    // Optionally hands back the zs' it computed.
    Mat<T> smoothed_target_actions_(const Mat<T>& s_next, Mat<T>* zs_next_out = nullptr) {
        Mat<T> zs_next;
        if (sale_on_()) zs_next = target_encoder_().f.forward(s_next);
        PolicyTape<T> tape;
        Mat<T> a = pi_t_.forward(s_next, zs_next, tape);
        const T c = T(cfg_.noise_clip);
        for (auto& x : a.d) {
            T eps = std::clamp(T(noise_rng_.normal(cfg_.target_policy_noise)), -c, c);
            x = std::clamp(x + eps, T(-1), T(1));
        }
        if (zs_next_out) *zs_next_out = std::move(zs_next);
        return a;
    }

    // Policy loss: -mean(Qbar) + lambda * |mean(Qbar)|_sg * mean((pi - a)^2).
    double actor_update_(const Mat<T>& zs_fixed) {
        const int B = bs_.rows;
        pi_.zero_grad();

        Mat<T> zs = zs_fixed;  // same source the critic consumed
        PolicyTape<T> pi_tape;
        Mat<T> a_pi = pi_.forward(bs_, zs, pi_tape);

        Mat<T> zsa;
        MlpTape<T> g_tape;
        Mat<T> g_in;
        const EncoderPair<T>* enc = nullptr;
        if (sale_on_()) {
            enc = &acting_encoder_();
            hconcat(a_pi, zs, g_in);
            zsa = strip_reward_head_(enc->g.forward(g_in, g_tape));
        }

        ValueTape<T> t1, t2;
        const Mat<T>& qv1 = q1_.forward(bs_, a_pi, zsa, zs, t1);
        const Mat<T>* qv2 = nullptr;
        if (!cfg_.single_q_actor) qv2 = &q2_.forward(bs_, a_pi, zsa, zs, t2);

        double mean_q = 0;
        for (int k = 0; k < B; ++k)
            mean_q += cfg_.single_q_actor ? double(qv1(k, 0))
                                          : 0.5 * (double(qv1(k, 0)) + double(qv2->operator()(k, 0)));
        mean_q /= B;

        double bc = 0;
        const double lam = cfg_.bc_weight;
        if (lam > 0) {
            for (int k = 0; k < B; ++k)
                for (int c = 0; c < cfg_.action_dim; ++c) {
                    double diff = double(a_pi(k, c)) - double(ba_(k, c));
                    bc += diff * diff;
                }
            bc /= double(B) * cfg_.action_dim;
        }
        const double bc_scale = lam * std::abs(mean_q);  // stop-gradient
        const double loss = -mean_q + bc_scale * bc;

        // dL/dQ_k
        Mat<T> dq(B, 1);
        const T per = cfg_.single_q_actor ? T(-1.0 / B) : T(-0.5 / B);
        for (int k = 0; k < B; ++k) dq(k, 0) = per;

        q1_.zero_grad();
        ValueInputGrads<T> ig1 = q1_.backward(dq, t1);
        Mat<T> d_a = std::move(ig1.d_a);
        Mat<T> d_zsa = std::move(ig1.d_zsa);
        if (!cfg_.single_q_actor) {
            q2_.zero_grad();
            ValueInputGrads<T> ig2 = q2_.backward(dq, t2);
            for (size_t i = 0; i < d_a.d.size(); ++i) d_a.d[i] += ig2.d_a.d[i];
            if (sale_on_())
                for (size_t i = 0; i < d_zsa.d.size(); ++i) d_zsa.d[i] += ig2.d_zsa.d[i];
        }
        if (sale_on_() && cfg_.q_use_zsa) {
            // chain through g into the action input; g is never stepped from
            // here, the stray grads it accumulates are zeroed before use
            Mat<T> d_gin = acting_encoder_mut_().g.backward(expand_reward_head_(d_zsa), g_tape);
            for (int k = 0; k < B; ++k)
                for (int c = 0; c < cfg_.action_dim; ++c) d_a(k, c) += d_gin(k, c);
        }
        if (bc_scale > 0) {
            const T s = T(2.0 * bc_scale / (double(B) * cfg_.action_dim));
            for (int k = 0; k < B; ++k)
                for (int c = 0; c < cfg_.action_dim; ++c)
                    d_a(k, c) += s * (a_pi(k, c) - ba_(k, c));
        }
        pi_.backward(d_a, pi_tape);
        pi_.step(cfg_.adam);
        return loss;
    }

    // End-to-end mode: the dynamics-prediction loss scaled by beta, grads
    // accumulated on top of whatever the value loss already deposited.
    T encoder_loss_backward_scaled_(T beta) {
        EncoderPair<T> scratch = enc_.current;
        scratch.zero_grad();
        T loss = encoder_loss_backward(scratch, bs_, ba_, bs_next_, br_, EncoderTarget::next_zs);
        std::vector<std::vector<T>*> dst_grads, src_grads;
        enc_.current.visit_params([&](std::vector<T>&, std::vector<T>& g) {
            dst_grads.push_back(&g);
        });
        scratch.visit_params([&](std::vector<T>&, std::vector<T>& g) {
            src_grads.push_back(&g);
        });
        for (size_t i = 0; i < dst_grads.size(); ++i)
            for (size_t j = 0; j < dst_grads[i]->size(); ++j)
                (*dst_grads[i])[j] += beta * (*src_grads[i])[j];
        return beta * loss;
    }

    AgentConfig<T> cfg_;
    EncoderGenerations<T> enc_;
    ValueNet<T> q1_, q2_, q1_t_, q2_t_;
    PolicyNet<T> pi_, pi_t_;
    double q_min_ = 0.0, q_max_ = 0.0;
    int64_t train_steps_ = 0;
    AgentDiagnostics diag_;
    StepMetrics last_;
    Rng explore_rng_, noise_rng_, replay_rng_;

    // batch scratch
    Mat<T> bs_, ba_, bs_next_;
    std::vector<T> br_, bnt_;
};

}  // namespace td7
