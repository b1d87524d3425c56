#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace td7 {

// One record per evaluation event, written as a JSON line with a fixed field
// order so identical runs produce byte-identical files.
struct MetricRecord {
    int64_t env_step = 0;
    double wall_time = 0;
    double eval_mean_return = 0;
    std::vector<double> eval_returns;
    double critic_loss = 0;
    double encoder_loss = 0;
    double actor_loss = 0;
    double mean_value_estimate = 0;
    double q_min = 0;
    double q_max = 0;
    double checkpoint_perf = 0;  // -inf serializes as null
    int assessment_episodes_used = 0;
};

std::string to_json_line(const MetricRecord& r);
std::vector<MetricRecord> read_metric_file(const std::string& path);

class MetricWriter {
public:
    explicit MetricWriter(const std::string& path);
    ~MetricWriter();
    void write(const MetricRecord& r);
    void flush();

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace td7
