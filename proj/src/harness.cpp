#include "td7/harness.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "td7/dataset.hpp"

namespace td7 {

namespace {

uint64_t eval_episode_seed(uint64_t root_seed, int64_t env_step, int episode) {
    // distinct deterministic seeds per (run seed, evaluation event, episode)
    SplitMix64 sm(root_seed + fnv1a64("eval") + uint64_t(env_step) * 0x9e3779b97f4a7c15ull +
                  uint64_t(episode));
    return sm.next();
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

struct EvalSource {
    const PolicyNet<float>* pi = nullptr;
    const Mlp<float>* f = nullptr;
};

std::vector<double> run_episodes(Env& env, int n_episodes, uint64_t root_seed, int64_t env_step,
                                 const std::function<std::vector<float>(std::span<const float>)>& act) {
    std::vector<double> returns;
    returns.reserve(n_episodes);
    for (int ep = 0; ep < n_episodes; ++ep) {
        std::vector<float> s = env.reset(eval_episode_seed(root_seed, env_step, ep));
        double total = 0;
        for (;;) {
            StepResult res = env.step(act(s));
            total += res.r;
            s = res.s_next;
            if (res.terminal || res.truncated) break;
        }
        returns.push_back(total);
    }
    return returns;
}

}  // namespace

std::vector<double> evaluate(const PolicyNet<float>& pi, const Mlp<float>* encoder_f, Env& env,
                             int n_episodes, uint64_t root_seed, int64_t env_step) {
    return run_episodes(env, n_episodes, root_seed, env_step,
                        [&](std::span<const float> s) {
                            return Agent<float>::act_deterministic(pi, encoder_f, s);
                        });
}

std::vector<double> evaluate_policy(const Policy& policy, Env& env, int n_episodes,
                                    uint64_t root_seed, int64_t env_step) {
    return run_episodes(env, n_episodes, root_seed, env_step,
                        [&](std::span<const float> s) { return policy(s); });
}

namespace {

class OnlineRun {
public:
    explicit OnlineRun(const RunConfig& cfg)
        : cfg_(cfg),
          env_(make_env(cfg.env)),
          eval_env_(make_env(cfg.env)),
          agent_(cfg.agent_config(env_->spec().state_dim, env_->spec().action_dim), cfg.seed),
          buffer_(env_->spec().state_dim, env_->spec().action_dim, cfg.lap_params()),
          ckpt_(cfg.assess_config()),
          writer_(cfg.out),
          env_rng_(substream(cfg.seed, "env")) {
        buffer_.set_uniform_mode(cfg.no_lap);
        use_checkpoints_ = !cfg.no_checkpoints;
        // the checkpoint starts as a copy of the initial policy
        ckpt_pi_ = agent_.policy();
        if (agent_.uses_encoder()) ckpt_f_ = agent_.fixed_f();
        start_ = std::chrono::steady_clock::now();
    }

    RunResult go() {
        const int64_t warmup = cfg_.initial_random_steps;
        while (steps_ < cfg_.total_env_steps) {
            std::vector<float> s = env_->reset(env_rng_.next_u64());
            const int64_t ep_start = steps_;
            double ep_reward = 0;
            int64_t ep_len = 0;
            bool finished = false;  // true when the env ended the episode
            const bool assessed = use_checkpoints_ && ep_start >= warmup;
            while (steps_ < cfg_.total_env_steps) {
                std::vector<float> a = pick_action_(s, assessed);
                StepResult res = env_->step(a);
                buffer_.insert(s, a, res.r, res.s_next, !res.terminal);
                ++steps_;
                ep_reward += res.r;
                ++ep_len;
                if (!use_checkpoints_ && steps_ > warmup) agent_.train_step(buffer_);
                if (steps_ % cfg_.eval_frequency == 0) emit_metrics_();
                s = std::move(res.s_next);
                if (res.terminal || res.truncated) {
                    finished = true;
                    break;
                }
            }
            if (use_checkpoints_) {
                if (assessed && finished) {
                    ++record_calls_;
                    AssessDecision d = ckpt_.record_episode(ep_reward, ep_len);
                    if (d == AssessDecision::assessment_done) {
                        ckpt_.finalize_assessment([&] { copy_checkpoint_(); });
                        ckpt_.drain_training([&] { agent_.train_step(buffer_); });
                    }
                } else {
                    // warmup spill-over or an episode cut by the step budget
                    int64_t ep_end = steps_;
                    int64_t owed = std::max<int64_t>(0, ep_end - std::max(ep_start, warmup));
                    ckpt_.add_pending_steps(owed);
                    ckpt_.drain_training([&] { agent_.train_step(buffer_); });
                }
                ckpt_.phase_transition_check(steps_);
            }
        }
        RunResult r;
        r.env_steps = steps_;
        r.train_steps = agent_.train_steps();
        r.final_eval_mean = last_eval_mean_;
        r.checkpoint_updates = ckpt_.checkpoint_updates();
        r.checkpoint_record_calls = record_calls_;
        r.agent_diag = agent_.diagnostics();
        r.metric_path = cfg_.out;
        writer_.flush();
        return r;
    }

private:
    std::vector<float> pick_action_(std::span<const float> s, bool assessed) {
        if (steps_ < cfg_.initial_random_steps) return agent_.select_action(s, true, steps_);
        if (assessed && cfg_.assess_deterministic) return agent_.select_action(s, false, steps_);
        return agent_.select_action(s, true, steps_);
    }

    void copy_checkpoint_() {
        ckpt_pi_ = agent_.policy();
        if (agent_.uses_encoder()) ckpt_f_ = agent_.fixed_f();
    }

    void emit_metrics_() {
        const bool use_ckpt_policy = use_checkpoints_ && !cfg_.current_policy_eval;
        const PolicyNet<float>& pi = use_ckpt_policy ? ckpt_pi_ : agent_.policy();
        const Mlp<float>* f = nullptr;
        if (agent_.uses_encoder()) f = use_ckpt_policy ? &ckpt_f_ : &agent_.fixed_f();
        std::vector<double> returns =
            evaluate(pi, f, *eval_env_, cfg_.eval_episodes, cfg_.seed, steps_);
        MetricRecord rec;
        rec.env_step = steps_;
        rec.wall_time = cfg_.wall_clock
                            ? std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                            start_)
                                  .count()
                            : 0.0;
        rec.eval_returns = returns;
        rec.eval_mean_return = mean_of(returns);
        const StepMetrics& m = agent_.last_metrics();
        rec.critic_loss = m.critic_loss;
        rec.encoder_loss = m.encoder_loss;
        rec.actor_loss = m.actor_loss;
        rec.mean_value_estimate = m.mean_value_estimate;
        rec.q_min = agent_.q_min();
        rec.q_max = agent_.q_max();
        rec.checkpoint_perf = ckpt_.checkpoint_perf();
        rec.assessment_episodes_used = ckpt_.last_assessment_episodes();
        writer_.write(rec);
        last_eval_mean_ = rec.eval_mean_return;
    }

    RunConfig cfg_;
    std::unique_ptr<Env> env_, eval_env_;
    Agent<float> agent_;
    LapBuffer buffer_;
    CheckpointController ckpt_;
    MetricWriter writer_;
    Rng env_rng_;
    PolicyNet<float> ckpt_pi_;
    Mlp<float> ckpt_f_;
    bool use_checkpoints_ = true;
    int64_t steps_ = 0;
    int64_t record_calls_ = 0;
    double last_eval_mean_ = 0;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

RunResult run_online(const RunConfig& cfg) {
    if (cfg.mode != "online") throw std::invalid_argument("run_online: config mode mismatch");
    return OnlineRun(cfg).go();
}

RunResult run_offline(const RunConfig& cfg) {
    if (cfg.mode != "offline") throw std::invalid_argument("run_offline: config mode mismatch");
    if (cfg.dataset.empty()) throw std::invalid_argument("offline mode requires a dataset path");

    auto env = make_env(cfg.env);
    DatasetHeader header = peek_dataset_header(cfg.dataset);
    if (header.env != cfg.env || header.state_dim != env->spec().state_dim ||
        header.action_dim != env->spec().action_dim)
        throw std::invalid_argument("dataset/environment mismatch: " + cfg.dataset + " holds '" +
                                    header.env + "' transitions");

    RunConfig adj = cfg;
    adj.buffer_capacity = std::max<int64_t>(adj.buffer_capacity, header.count);
    Agent<float> agent(adj.agent_config(env->spec().state_dim, env->spec().action_dim), cfg.seed);
    LapBuffer buffer(env->spec().state_dim, env->spec().action_dim, adj.lap_params());
    buffer.set_uniform_mode(cfg.no_lap);
    load_dataset_into(cfg.dataset, buffer);

    MetricWriter writer(cfg.out);
    auto start = std::chrono::steady_clock::now();
    double last_eval = 0;
    for (int64_t t = 1; t <= cfg.total_env_steps; ++t) {
        agent.train_step(buffer);
        if (t % cfg.eval_frequency == 0) {
            const Mlp<float>* f = agent.uses_encoder() ? &agent.fixed_f() : nullptr;
            std::vector<double> returns =
                evaluate(agent.policy(), f, *env, cfg.eval_episodes, cfg.seed, t);
            MetricRecord rec;
            rec.env_step = t;
            rec.wall_time =
                cfg.wall_clock
                    ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count()
                    : 0.0;
            rec.eval_returns = returns;
            rec.eval_mean_return = mean_of(returns);
            const StepMetrics& m = agent.last_metrics();
            rec.critic_loss = m.critic_loss;
            rec.encoder_loss = m.encoder_loss;
            rec.actor_loss = m.actor_loss;
            rec.mean_value_estimate = m.mean_value_estimate;
            rec.q_min = agent.q_min();
            rec.q_max = agent.q_max();
            rec.checkpoint_perf = -std::numeric_limits<double>::infinity();
            rec.assessment_episodes_used = 0;
            writer.write(rec);
            last_eval = rec.eval_mean_return;
        }
    }
    writer.flush();
    RunResult r;
    r.env_steps = 0;
    r.train_steps = agent.train_steps();
    r.final_eval_mean = last_eval;
    r.checkpoint_record_calls = 0;
    r.agent_diag = agent.diagnostics();
    r.metric_path = cfg.out;
    return r;
}

RunResult run(const RunConfig& cfg) {
    return cfg.mode == "offline" ? run_offline(cfg) : run_online(cfg);
}

std::vector<std::pair<std::string, std::string>> ablation_overrides(const std::string& tag,
                                                                    const EnvSpec& spec) {
    using KV = std::pair<std::string, std::string>;
    std::vector<KV> o;
    if (tag == "td7") return o;
    if (tag == "no_sale") return {{"ablate.no_sale", "true"}};
    if (tag == "no_lap") return {{"ablate.no_lap", "true"}};
    if (tag == "no_checkpoints") return {{"ablate.no_checkpoints", "true"}};
    if (tag == "no_clipping") return {{"ablate.no_clipping", "true"}};
    if (tag == "no_fixed") return {{"ablate.no_fixed_embeddings", "true"}};
    if (tag == "current_policy") return {{"ablate.current_policy_eval", "true"}};
    if (tag == "no_implementation")
        return {{"ablate.single_q_actor", "true"}, {"ablate.relu_value", "true"}};
    if (tag == "td3")
        return {{"ablate.no_sale", "true"},       {"ablate.no_lap", "true"},
                {"ablate.no_checkpoints", "true"}, {"ablate.no_clipping", "true"},
                {"ablate.single_q_actor", "true"}, {"ablate.relu_value", "true"},
                {"ablate.polyak_tau", "0.005"}};
    if (tag == "enc_raw_next_state")
        return {{"ablate.encoder_target", "raw_next_state"},
                {"agent.zs_dim", std::to_string(spec.state_dim)}};
    if (tag == "enc_polyak") return {{"ablate.encoder_target", "polyak_zs"}};
    if (tag == "enc_reward") return {{"ablate.encoder_target", "zs_plus_reward"}};
    if (tag == "enc_next_zsa") return {{"ablate.encoder_target", "next_zsa"}};
    if (tag == "enc_cosine") return {{"ablate.encoder_target", "cosine"}};
    if (tag == "q_no_zsa") return {{"ablate.q_use_zsa", "false"}};
    if (tag == "q_no_zs") return {{"ablate.q_use_zs", "false"}};
    if (tag == "q_no_sa") return {{"ablate.q_use_sa", "false"}};
    if (tag == "q_zsa_only") return {{"ablate.q_use_zs", "false"}, {"ablate.q_use_sa", "false"}};
    if (tag == "q_sa_only") return {{"ablate.q_use_zsa", "false"}, {"ablate.q_use_zs", "false"}};
    if (tag == "pi_s_only") return {{"ablate.pi_use_zs", "false"}};
    if (tag == "pi_zs_only") return {{"ablate.pi_use_s", "false"}};
    if (tag == "norm_no_phi") return {{"ablate.norm", "no_phi_norm"}};
    if (tag == "norm_none") return {{"ablate.norm", "none"}};
    if (tag == "norm_zsa") return {{"ablate.norm", "norm_zsa"}};
    if (tag == "end_to_end_0.1") return {{"ablate.end_to_end_beta", "0.1"}};
    if (tag == "end_to_end_1") return {{"ablate.end_to_end_beta", "1"}};
    if (tag == "end_to_end_10") return {{"ablate.end_to_end_beta", "10"}};
    if (tag == "ckpt_mean_fixed")
        return {{"assess.criterion", "mean"}, {"assess.early_termination", "false"}};
    if (tag == "ckpt_mean_variable") return {{"assess.criterion", "mean"}};
    if (tag == "ckpt_fixed") return {{"assess.early_termination", "false"}};
    if (tag == "ckpt_immediate") return {{"assess.early_timesteps", "0"}};
    if (tag == "ckpt_max10") return {{"assess.late_episodes", "10"}};
    if (tag == "ckpt_max50") return {{"assess.late_episodes", "50"}};
    throw std::invalid_argument("unknown ablation tag: " + tag);
}

std::vector<std::string> ablation_grid(const std::string& grid_name) {
    if (grid_name == "main")
        return {"td7", "no_sale", "no_checkpoints", "no_lap", "no_clipping"};
    if (grid_name == "targets")
        return {"td7", "enc_raw_next_state", "enc_polyak", "enc_reward", "enc_next_zsa"};
    if (grid_name == "inputs")
        return {"td7",       "q_no_zsa",  "q_no_zs",    "q_no_sa", "q_zsa_only",
                "q_sa_only", "pi_s_only", "pi_zs_only", "no_fixed"};
    if (grid_name == "normalization")
        return {"td7", "norm_no_phi", "norm_none", "norm_zsa", "enc_cosine"};
    if (grid_name == "end_to_end")
        return {"td7", "end_to_end_0.1", "end_to_end_1", "end_to_end_10"};
    if (grid_name == "checkpoints")
        return {"td7",        "ckpt_mean_fixed", "ckpt_mean_variable",
                "ckpt_fixed", "ckpt_immediate",  "ckpt_max10",
                "ckpt_max50", "current_policy"};
    if (grid_name == "implementation") return {"td7", "no_implementation", "td3"};
    throw std::invalid_argument("unknown ablation grid: " + grid_name);
}

}  // namespace td7
