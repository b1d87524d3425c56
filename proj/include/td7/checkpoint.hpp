#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>

namespace td7 {

// Policy-checkpoint controller. Training is withheld while the current
// policy runs assessment episodes; after the assessment the policy is
// checkpointed if it beat the previous best, and the withheld train steps
// run as one batch. Pure bookkeeping: the harness supplies the actual
// parameter copies and train calls through callables.

struct AssessConfig {
    enum class Criterion { min, mean };
    Criterion criterion = Criterion::min;
    int early_episodes = 1;
    int late_episodes = 20;
    int64_t early_timesteps = 750000;
    double reset_weight = 0.9;
    bool early_termination = true;  // forced off for the fixed-length variant
};

enum class AssessDecision { keep_going, assessment_done };

class CheckpointController {
public:
    explicit CheckpointController(const AssessConfig& cfg = {}) : cfg_(cfg) {
        if (cfg.early_episodes < 1 || cfg.late_episodes < 1)
            throw std::invalid_argument("AssessConfig: episode budgets must be >= 1");
        if (cfg.reset_weight <= 0 || cfg.reset_weight > 1)
            throw std::invalid_argument("AssessConfig: reset weight out of range");
        reset_running_();
    }

    double checkpoint_perf() const { return checkpoint_perf_; }
    double running_perf() const { return running_; }
    int episodes_this_phase() const { return episodes_; }
    int64_t timesteps_since_training() const { return pending_train_; }
    bool late_phase() const { return late_phase_; }
    int episode_budget() const { return late_phase_ ? cfg_.late_episodes : cfg_.early_episodes; }
    int64_t checkpoint_updates() const { return checkpoint_updates_; }
    int last_assessment_episodes() const { return last_assessment_episodes_; }

    // Train steps owed for env steps outside any assessment (e.g. warmup
    // spill-over).
    void add_pending_steps(int64_t n) { pending_train_ += n; }

    AssessDecision record_episode(double episode_reward, int64_t episode_len) {
        if (assessment_closed_)
            throw std::logic_error("record_episode called outside an assessment");
        pending_train_ += episode_len;
        episodes_ += 1;
        if (cfg_.criterion == AssessConfig::Criterion::min) {
            running_ = std::min(running_, episode_reward);
        } else {
            mean_sum_ += episode_reward;
            running_ = mean_sum_ / episodes_;
        }
        bool done = episodes_ >= episode_budget();
        if (!done && cfg_.early_termination) {
            // min: at-or-below ends the assessment; mean: strictly below
            if (cfg_.criterion == AssessConfig::Criterion::min)
                done = running_ <= checkpoint_perf_;
            else
                done = running_ < checkpoint_perf_;
        }
        if (done) assessment_closed_ = true;
        return done ? AssessDecision::assessment_done : AssessDecision::keep_going;
    }

    // Checkpoints only when the full episode budget completed and the
    // running criterion is at least the checkpoint's. copy_checkpoint() is
    // invoked exactly when the checkpoint is replaced.
    template <class CopyFn>
    bool finalize_assessment(CopyFn&& copy_checkpoint) {
        bool updated = episodes_ >= episode_budget() && running_ >= checkpoint_perf_;
        if (updated) {
            copy_checkpoint();
            checkpoint_perf_ = running_;
            checkpoint_updates_ += 1;
        }
        last_assessment_episodes_ = episodes_;
        reset_running_();
        return updated;
    }

    // One-time early-to-late transition: larger episode budget, checkpoint
    // performance discounted by the reset weight.
    void phase_transition_check(int64_t total_env_steps) {
        if (!late_phase_ && total_env_steps >= cfg_.early_timesteps) {
            late_phase_ = true;
            checkpoint_perf_ *= cfg_.reset_weight;
        }
    }

    // Runs the withheld training batch: exactly timesteps_since_training
    // calls, then the counter resets.
    template <class TrainFn>
    void drain_training(TrainFn&& train_step) {
        const int64_t n = pending_train_;
        for (int64_t i = 0; i < n; ++i) train_step();
        trained_total_ += n;
        pending_train_ = 0;
    }

    int64_t trained_total() const { return trained_total_; }

private:
    void reset_running_() {
        running_ = cfg_.criterion == AssessConfig::Criterion::min
                       ? std::numeric_limits<double>::infinity()
                       : 0.0;
        mean_sum_ = 0.0;
        episodes_ = 0;
        assessment_closed_ = false;
    }

    AssessConfig cfg_;
    double checkpoint_perf_ = -std::numeric_limits<double>::infinity();
    double running_ = 0;
    double mean_sum_ = 0;
    int episodes_ = 0;
    bool assessment_closed_ = false;
    bool late_phase_ = false;
    int64_t pending_train_ = 0;
    int64_t trained_total_ = 0;
    int64_t checkpoint_updates_ = 0;
    int last_assessment_episodes_ = 0;
};

}  // namespace td7
