#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "td7/mat.hpp"
#include "td7/rng.hpp"

namespace td7 {

// Binary-indexed tree over leaf priorities with subtree sums (for sampling)
// and subtree maxima (for max-priority insertion). Sums are kept in double
// so tree descent agrees with a linear cumulative scan.
class SumTree {
public:
    explicit SumTree(int capacity = 0) { reset(capacity); }

    void reset(int capacity) {
        cap_ = 1;
        while (cap_ < capacity) cap_ <<= 1;
        sum_.assign(size_t(2) * cap_, 0.0);
        max_.assign(size_t(2) * cap_, 0.0);
        n_leaves_ = capacity;
    }

    void set(int idx, double p) {
        if (idx < 0 || idx >= n_leaves_) throw std::out_of_range("SumTree::set");
        if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("SumTree::set: bad priority");
        size_t i = size_t(cap_) + idx;
        sum_[i] = p;
        max_[i] = p;
        for (i >>= 1; i >= 1; i >>= 1) {
            sum_[i] = sum_[2 * i] + sum_[2 * i + 1];
            max_[i] = std::max(max_[2 * i], max_[2 * i + 1]);
        }
    }

    double get(int idx) const { return sum_[size_t(cap_) + idx]; }
    double total() const { return sum_[1]; }
    double max_priority() const { return max_[1]; }

    // Index of the leaf whose cumulative-sum interval contains u * total().
    int sample(double u01) const {
        double v = u01 * total();
        size_t i = 1;
        while (i < size_t(cap_)) {
            size_t left = 2 * i;
            if (v < sum_[left]) {
                i = left;
            } else {
                v -= sum_[left];
                i = left + 1;
            }
        }
        int idx = int(i - cap_);
        return idx < n_leaves_ ? idx : n_leaves_ - 1;
    }

    int leaf_count() const { return n_leaves_; }

private:
    int cap_ = 1;
    int n_leaves_ = 0;
    std::vector<double> sum_;
    std::vector<double> max_;
};

struct LapParams {
    double alpha = 0.4;
    double min_priority = 1.0;
    int capacity = 1000000;
};

struct SampleBatch {
    std::vector<int> indices;
    std::vector<double> probabilities;
};

// Ring buffer of transitions with proportional prioritized sampling.
// Priorities are stored post-transform, i.e. max(|delta|^alpha, min_priority),
// so leaves are directly proportional to the sampling law.
class LapBuffer {
public:
    LapBuffer(int state_dim, int action_dim, const LapParams& p = {})
        : sd_(state_dim), ad_(action_dim), params_(p), tree_(p.capacity) {
        states_.resize(size_t(p.capacity) * sd_);
        actions_.resize(size_t(p.capacity) * ad_);
        rewards_.resize(p.capacity);
        next_states_.resize(size_t(p.capacity) * sd_);
        not_terminal_.resize(p.capacity);
    }

    int size() const { return size_; }
    int capacity() const { return params_.capacity; }
    int state_dim() const { return sd_; }
    int action_dim() const { return ad_; }
    const LapParams& params() const { return params_; }

    void set_uniform_mode(bool enabled) { uniform_ = enabled; }
    bool uniform_mode() const { return uniform_; }

    void insert(std::span<const float> s, std::span<const float> a, float r,
                std::span<const float> s_next, bool not_terminal) {
        if (int(s.size()) != sd_ || int(s_next.size()) != sd_ || int(a.size()) != ad_)
            throw std::invalid_argument("LapBuffer::insert: dimension mismatch");
        int slot = head_;
        std::copy(s.begin(), s.end(), states_.begin() + size_t(slot) * sd_);
        std::copy(a.begin(), a.end(), actions_.begin() + size_t(slot) * ad_);
        rewards_[slot] = r;
        std::copy(s_next.begin(), s_next.end(), next_states_.begin() + size_t(slot) * sd_);
        not_terminal_[slot] = not_terminal ? 1 : 0;

        double p = size_ == 0 ? params_.min_priority : tree_.max_priority();
        tree_.set(slot, std::max(p, params_.min_priority));

        head_ = (head_ + 1) % params_.capacity;
        if (size_ < params_.capacity) ++size_;
    }

    // Draws batch_size indices with replacement, proportional to stored
    // priorities (uniform when uniform mode is on). One uniform per draw.
    SampleBatch sample(int batch_size, Rng& rng) const {
        if (size_ == 0) throw std::logic_error("LapBuffer::sample: empty buffer");
        if (batch_size <= 0) throw std::invalid_argument("LapBuffer::sample: bad batch size");
        SampleBatch out;
        out.indices.resize(batch_size);
        out.probabilities.resize(batch_size);
        for (int k = 0; k < batch_size; ++k) {
            double u = rng.uniform01();
            int idx;
            if (uniform_) {
                idx = int(u * size_);
                if (idx >= size_) idx = size_ - 1;
                out.probabilities[k] = 1.0 / size_;
            } else {
                idx = tree_.sample(u);
                if (idx >= size_) idx = size_ - 1;  // unreachable for well-formed trees
                out.probabilities[k] = tree_.get(idx) / tree_.total();
            }
            out.indices[k] = idx;
        }
        return out;
    }

    void update_priorities(std::span<const int> indices, std::span<const double> abs_td) {
        if (indices.size() != abs_td.size())
            throw std::invalid_argument("LapBuffer::update_priorities: size mismatch");
        for (size_t k = 0; k < indices.size(); ++k) {
            if (abs_td[k] < 0.0 || !std::isfinite(abs_td[k]))
                throw std::invalid_argument("LapBuffer::update_priorities: bad |td| value");
            if (indices[k] < 0 || indices[k] >= size_)
                throw std::out_of_range("LapBuffer::update_priorities: bad index");
            double p = std::max(std::pow(abs_td[k], params_.alpha), params_.min_priority);
            tree_.set(indices[k], p);
        }
    }

    double priority(int idx) const { return tree_.get(idx); }
    const SumTree& tree() const { return tree_; }

    // Gathers a sampled batch into matrices of the requested scalar type.
    template <class T>
    void gather(std::span<const int> idx, Mat<T>& s, Mat<T>& a, std::vector<T>& r, Mat<T>& s_next,
                std::vector<T>& not_terminal) const {
        const int B = int(idx.size());
        s.resize(B, sd_);
        a.resize(B, ad_);
        s_next.resize(B, sd_);
        r.resize(B);
        not_terminal.resize(B);
        for (int k = 0; k < B; ++k) {
            int i = idx[k];
            for (int c = 0; c < sd_; ++c) {
                s(k, c) = T(states_[size_t(i) * sd_ + c]);
                s_next(k, c) = T(next_states_[size_t(i) * sd_ + c]);
            }
            for (int c = 0; c < ad_; ++c) a(k, c) = T(actions_[size_t(i) * ad_ + c]);
            r[k] = T(rewards_[i]);
            not_terminal[k] = T(not_terminal_[i]);
        }
    }

    // Raw access for tests and dataset export.
    std::span<const float> state_at(int i) const { return {states_.data() + size_t(i) * sd_, size_t(sd_)}; }
    std::span<const float> action_at(int i) const { return {actions_.data() + size_t(i) * ad_, size_t(ad_)}; }
    float reward_at(int i) const { return rewards_[i]; }
    std::span<const float> next_state_at(int i) const { return {next_states_.data() + size_t(i) * sd_, size_t(sd_)}; }
    bool not_terminal_at(int i) const { return not_terminal_[i] != 0; }

private:
    int sd_, ad_;
    LapParams params_;
    SumTree tree_;
    bool uniform_ = false;
    int head_ = 0;
    int size_ = 0;
    std::vector<float> states_, actions_, next_states_;
    std::vector<float> rewards_;
    std::vector<uint8_t> not_terminal_;
};

}  // namespace td7
