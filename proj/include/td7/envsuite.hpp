#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace td7 {

struct EnvSpec {
    std::string name;
    int state_dim = 0;
    int action_dim = 0;
    int max_episode_steps = 0;
    float reward_lo = 0;
    float reward_hi = 0;
};

struct StepResult {
    std::vector<float> s_next;
    float r = 0;
    bool terminal = false;   // true environment termination
    bool truncated = false;  // time-limit cutoff; not terminal for bootstrapping
};

// Deterministic desk-scale continuous-control environments. Actions are in
// [-1, 1]^action_dim; out-of-range components are clamped and counted.
class Env {
public:
    virtual ~Env() = default;

    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<float> reset(uint64_t seed) = 0;
    virtual StepResult step(std::span<const float> action) = 0;

    // Test hook: start an episode from an explicit state.
    virtual std::vector<float> reset_to(std::span<const float> state) = 0;

    int64_t clamp_warnings() const { return clamp_warnings_; }

protected:
    int64_t clamp_warnings_ = 0;
};

std::unique_ptr<Env> make_env(const std::string& name);

// Hand-written reference controllers, used as return yardsticks in tests.
using Policy = std::function<std::vector<float>(std::span<const float> state)>;
Policy scripted_controller(const std::string& env_name);

}  // namespace td7
