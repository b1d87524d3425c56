#include "td7/envsuite.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "td7/rng.hpp"

namespace td7 {

namespace {

constexpr double kPi = 3.14159265358979323846;

float wrap_angle(float th) {
    double x = std::fmod(double(th) + kPi, 2.0 * kPi);
    if (x < 0) x += 2.0 * kPi;
    return float(x - kPi);
}

class EnvBase : public Env {
public:
    const EnvSpec& spec() const override { return spec_; }

    StepResult step(std::span<const float> action) override {
        if (done_) throw std::logic_error(spec_.name + ": step() after episode end");
        if (int(action.size()) != spec_.action_dim)
            throw std::invalid_argument(spec_.name + ": action dimension mismatch");
        std::vector<float> a(action.begin(), action.end());
        for (auto& x : a) {
            if (x < -1.0f || x > 1.0f) {
                x = std::clamp(x, -1.0f, 1.0f);
                ++clamp_warnings_;
            }
        }
        StepResult res = do_step(a);
        ++steps_;
        if (!res.terminal && steps_ >= spec_.max_episode_steps) res.truncated = true;
        done_ = res.terminal || res.truncated;
        return res;
    }

protected:
    virtual StepResult do_step(const std::vector<float>& a) = 0;

    void begin_episode() {
        steps_ = 0;
        done_ = false;
    }

    EnvSpec spec_;
    int steps_ = 0;
    bool done_ = false;
};

// Point mass on a bounded 2-D plane. State (x, y, vx, vy); the action is an
// acceleration scaled by 0.1. Reward is the negative distance to the origin,
// plus a +10 bonus on reaching it.
class PointMass2D : public EnvBase {
public:
    PointMass2D() {
        spec_ = {"pointmass2d", 4, 2, 200, -float(2 * std::sqrt(2.0)) , 10.0f};
    }

    std::vector<float> reset(uint64_t seed) override {
        Rng rng(seed);
        s_ = {float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), 0.0f, 0.0f};
        begin_episode();
        return s_;
    }

    std::vector<float> reset_to(std::span<const float> state) override {
        s_.assign(state.begin(), state.end());
        begin_episode();
        return s_;
    }

protected:
    StepResult do_step(const std::vector<float>& a) override {
        for (int i = 0; i < 2; ++i) {
            s_[2 + i] = std::clamp(s_[2 + i] + 0.1f * a[i], -0.5f, 0.5f);
            s_[i] = std::clamp(s_[i] + s_[2 + i], -2.0f, 2.0f);
        }
        float dist = std::sqrt(s_[0] * s_[0] + s_[1] * s_[1]);
        StepResult res;
        res.terminal = dist < 0.05f;
        res.r = -dist + (res.terminal ? 10.0f : 0.0f);
        res.s_next = s_;
        return res;
    }

private:
    std::vector<float> s_;
};

// Torque-limited pendulum swing-up. State (cos th, sin th, thdot); torque is
// 2 * action. Never terminates; episodes end by time limit only.
class PendulumSwingup : public EnvBase {
public:
    PendulumSwingup() {
        // cost <= pi^2 + 0.1 * 8^2 + 0.001 * 2^2
        spec_ = {"pendulum", 3, 1, 200, -16.2736045f, 0.0f};
    }

    std::vector<float> reset(uint64_t seed) override {
        Rng rng(seed);
        th_ = float(rng.uniform(-kPi, kPi));
        thdot_ = float(rng.uniform(-1, 1));
        begin_episode();
        return obs();
    }

    std::vector<float> reset_to(std::span<const float> state) override {
        th_ = std::atan2(state[1], state[0]);
        thdot_ = state[2];
        begin_episode();
        return obs();
    }

protected:
    StepResult do_step(const std::vector<float>& a) override {
        const double g = 10.0, m = 1.0, l = 1.0, dt = 0.05;
        double u = 2.0 * a[0];
        double th = th_, thdot = thdot_;
        double cost = double(wrap_angle(float(th))) * double(wrap_angle(float(th))) +
                      0.1 * thdot * thdot + 0.001 * u * u;
        double acc = -(3.0 * g / (2.0 * l)) * std::sin(th + kPi) + 3.0 * u / (m * l * l);
        thdot = std::clamp(thdot + acc * dt, -8.0, 8.0);
        th = th + thdot * dt;
        th_ = float(th);
        thdot_ = float(thdot);
        StepResult res;
        res.r = float(-cost);
        res.s_next = obs();
        return res;
    }

private:
    std::vector<float> obs() const {
        return {std::cos(th_), std::sin(th_), thdot_};
    }

    float th_ = 0, thdot_ = 0;
};

// One-dimensional walk toward x = 0.5; the simplest smoke-test task.
class LineWalk : public EnvBase {
public:
    LineWalk() { spec_ = {"linewalk", 1, 1, 50, -1.5f, 0.0f}; }

    std::vector<float> reset(uint64_t seed) override {
        Rng rng(seed);
        x_ = float(rng.uniform(-1, 1));
        begin_episode();
        return {x_};
    }

    std::vector<float> reset_to(std::span<const float> state) override {
        x_ = state[0];
        begin_episode();
        return {x_};
    }

protected:
    StepResult do_step(const std::vector<float>& a) override {
        x_ = std::clamp(x_ + 0.1f * a[0], -1.0f, 1.0f);
        StepResult res;
        res.terminal = std::abs(x_ - 0.5f) < 0.01f;
        res.r = -std::abs(x_ - 0.5f);
        res.s_next = {x_};
        return res;
    }

private:
    float x_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "pointmass2d") return std::make_unique<PointMass2D>();
    if (name == "pendulum") return std::make_unique<PendulumSwingup>();
    if (name == "linewalk") return std::make_unique<LineWalk>();
    throw std::invalid_argument("unknown environment: " + name);
}

Policy scripted_controller(const std::string& env_name) {
    if (env_name == "linewalk") {
        return [](std::span<const float> s) -> std::vector<float> {
            return {s[0] < 0.5f ? 1.0f : -1.0f};
        };
    }
    if (env_name == "pointmass2d") {
        // proportional control on position with velocity damping
        return [](std::span<const float> s) -> std::vector<float> {
            std::vector<float> a(2);
            for (int i = 0; i < 2; ++i)
                a[i] = std::clamp(-(s[i] + 2.0f * s[2 + i]), -1.0f, 1.0f);
            return a;
        };
    }
    if (env_name == "pendulum") {
        // energy-shaping swing-up with a PD catch near the top
        return [](std::span<const float> s) -> std::vector<float> {
            float th = std::atan2(s[1], s[0]);
            float thdot = s[2];
            double u;
            if (std::abs(wrap_angle(th)) < 0.6) {
                u = -8.0 * wrap_angle(th) - 2.0 * thdot;
            } else {
                // E* = m g l / 2 at upright; I = m l^2 / 3
                double energy = 0.5 * (1.0 / 3.0) * thdot * thdot + 10.0 * 0.5 * std::cos(th);
                double target = 10.0 * 0.5;
                u = 1.5 * thdot * (target - energy);
                if (u == 0.0) u = 1.0;  // kick out of the rest-at-bottom equilibrium
            }
            return {float(std::clamp(u / 2.0, -1.0, 1.0))};
        };
    }
    throw std::invalid_argument("no scripted controller for: " + env_name);
}

}  // namespace td7
