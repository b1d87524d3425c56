#pragma once

#include <string>
#include <utility>
#include <vector>

#include "td7/agent.hpp"
#include "td7/config.hpp"
#include "td7/envsuite.hpp"
#include "td7/metrics.hpp"

namespace td7 {

struct RunResult {
    int64_t env_steps = 0;
    int64_t train_steps = 0;
    double final_eval_mean = 0;
    int64_t checkpoint_updates = 0;
    int64_t checkpoint_record_calls = 0;  // stays 0 in offline mode
    AgentDiagnostics agent_diag;
    std::string metric_path;
};

// n deterministic episodes with derived seeds; side-effect free. The policy
// and encoder are taken by const reference and never mutated.
std::vector<double> evaluate(const PolicyNet<float>& pi, const Mlp<float>* encoder_f, Env& env,
                             int n_episodes, uint64_t root_seed, int64_t env_step);

// Undiscounted returns of a scripted policy under the evaluation protocol.
std::vector<double> evaluate_policy(const Policy& policy, Env& env, int n_episodes,
                                    uint64_t root_seed, int64_t env_step);

RunResult run_online(const RunConfig& cfg);
RunResult run_offline(const RunConfig& cfg);
RunResult run(const RunConfig& cfg);  // dispatches on cfg.mode

// Named ablation variants: tag -> config overrides (key/value pairs).
std::vector<std::pair<std::string, std::string>> ablation_overrides(const std::string& tag,
                                                                    const EnvSpec& spec);
std::vector<std::string> ablation_grid(const std::string& grid_name);

}  // namespace td7
