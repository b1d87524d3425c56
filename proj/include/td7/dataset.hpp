#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "td7/envsuite.hpp"
#include "td7/replay.hpp"

namespace td7 {

// On-disk transition datasets: one UTF-8 JSON header line, then packed
// little-endian records of
//   state (f32 x state_dim), action (f32 x action_dim), reward (f32),
//   next_state (f32 x state_dim), not_terminal (u8).
struct DatasetHeader {
    std::string env;
    int state_dim = 0;
    int action_dim = 0;
    std::string policy;  // generator tag
    int64_t count = 0;
};

struct DatasetRecord {
    std::vector<float> s, a, s_next;
    float r = 0;
    uint8_t not_terminal = 1;
};

void write_dataset(const std::string& path, const DatasetHeader& header,
                   const std::vector<DatasetRecord>& records);

// Reads the header and streams every record into `sink`.
DatasetHeader read_dataset(const std::string& path,
                           const std::function<void(const DatasetRecord&)>& sink);

DatasetHeader peek_dataset_header(const std::string& path);

// Rolls episodes with `policy` plus clipped Gaussian action noise and records
// every transition under the terminal-vs-timeout rule. Deterministic in seed.
DatasetHeader generate_dataset(Env& env, const Policy& policy, const std::string& policy_tag,
                               float noise_std, int64_t n_transitions, uint64_t seed,
                               const std::string& path);

// Loads a dataset into a replay buffer (priorities start at the floor).
DatasetHeader load_dataset_into(const std::string& path, LapBuffer& buffer);

}  // namespace td7
