#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "td7/agent.hpp"
#include "td7/checkpoint.hpp"
#include "td7/replay.hpp"

namespace td7 {

// Full description of one training run. Defaults reproduce the standard
// algorithm configuration; the "desk" profile shrinks everything so a run
// finishes in minutes on one core.
struct RunConfig {
    std::string env = "pointmass2d";
    uint64_t seed = 0;
    std::string mode = "online";  // online | offline
    int64_t total_env_steps = 5000000;
    int64_t eval_frequency = 5000;
    int eval_episodes = 10;
    std::string out = "metrics.jsonl";
    std::string dataset;  // offline mode input
    bool wall_clock = false;  // off keeps metric files bit-reproducible

    // agent
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
    double bc_weight_offline = 0.1;
    double huber_threshold = 1.0;
    double learning_rate = 3e-4;

    // replay
    double lap_alpha = 0.4;
    double lap_min_priority = 1.0;
    int64_t buffer_capacity = 1000000;

    // checkpoints
    std::string assess_criterion = "min";  // min | mean
    int early_episodes = 1;
    int late_episodes = 20;
    int64_t early_timesteps = 750000;
    double reset_weight = 0.9;
    bool early_termination = true;
    bool assess_deterministic = true;  // assessment episodes without noise

    // ablation switches
    bool no_sale = false;
    bool no_lap = false;
    bool no_checkpoints = false;
    bool no_clipping = false;
    bool no_fixed_embeddings = false;
    bool current_policy_eval = false;
    bool single_q_actor = false;
    bool relu_value = false;
    double polyak_tau = 0.0;
    double end_to_end_beta = 0.0;
    std::string encoder_target = "next_zs";
    std::string norm = "standard";
    bool q_use_zsa = true;
    bool q_use_zs = true;
    bool q_use_sa = true;
    bool pi_use_zs = true;
    bool pi_use_s = true;

    AgentConfig<float> agent_config(int state_dim, int action_dim) const;
    LapParams lap_params() const;
    AssessConfig assess_config() const;
};

// Named bundles of overrides. "paper" is the no-op full-scale profile,
// "desk" the minutes-scale one used by the test suites.
void apply_profile(RunConfig& cfg, const std::string& name);

// One "key = value" per line, '#' comments. Later lines win. A "profile"
// line expands in place. Unknown keys raise std::invalid_argument.
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);
void load_config_file(RunConfig& cfg, const std::string& path);

std::vector<std::string> config_keys();

EncoderTarget parse_encoder_target(const std::string& s);
NormVariant parse_norm_variant(const std::string& s);

}  // namespace td7
