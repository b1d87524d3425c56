#include "td7/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace td7 {

namespace {

void append_number(std::string& out, double v) {
    if (std::isinf(v) || std::isnan(v)) {
        out += "null";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out += buf;
}

}  // namespace

std::string to_json_line(const MetricRecord& r) {
    std::string s = "{\"env_step\":" + std::to_string(r.env_step);
    s += ",\"wall_time\":";
    append_number(s, r.wall_time);
    s += ",\"eval_mean_return\":";
    append_number(s, r.eval_mean_return);
    s += ",\"eval_returns\":[";
    for (size_t i = 0; i < r.eval_returns.size(); ++i) {
        if (i) s += ',';
        append_number(s, r.eval_returns[i]);
    }
    s += "],\"critic_loss\":";
    append_number(s, r.critic_loss);
    s += ",\"encoder_loss\":";
    append_number(s, r.encoder_loss);
    s += ",\"actor_loss\":";
    append_number(s, r.actor_loss);
    s += ",\"mean_value_estimate\":";
    append_number(s, r.mean_value_estimate);
    s += ",\"q_min\":";
    append_number(s, r.q_min);
    s += ",\"q_max\":";
    append_number(s, r.q_max);
    s += ",\"checkpoint_perf\":";
    append_number(s, r.checkpoint_perf);
    s += ",\"assessment_episodes_used\":" + std::to_string(r.assessment_episodes_used);
    s += "}";
    return s;
}

std::vector<MetricRecord> read_metric_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metric file: " + path);
    std::vector<MetricRecord> out;
    std::string line;
    auto num = [](const nlohmann::json& j) {
        return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        MetricRecord r;
        r.env_step = j.at("env_step").get<int64_t>();
        r.wall_time = num(j.at("wall_time"));
        r.eval_mean_return = num(j.at("eval_mean_return"));
        for (const auto& v : j.at("eval_returns")) r.eval_returns.push_back(num(v));
        r.critic_loss = num(j.at("critic_loss"));
        r.encoder_loss = num(j.at("encoder_loss"));
        r.actor_loss = num(j.at("actor_loss"));
        r.mean_value_estimate = num(j.at("mean_value_estimate"));
        r.q_min = num(j.at("q_min"));
        r.q_max = num(j.at("q_max"));
        r.checkpoint_perf = num(j.at("checkpoint_perf"));
        r.assessment_episodes_used = j.at("assessment_episodes_used").get<int>();
        out.push_back(std::move(r));
    }
    return out;
}

struct MetricWriter::Impl {
    std::ofstream out;
};

MetricWriter::MetricWriter(const std::string& path) : impl_(new Impl) {
    impl_->out.open(path);
    if (!impl_->out) {
        delete impl_;
        throw std::runtime_error("cannot open metric file for writing: " + path);
    }
}

MetricWriter::~MetricWriter() { delete impl_; }

void MetricWriter::write(const MetricRecord& r) { impl_->out << to_json_line(r) << '\n'; }

void MetricWriter::flush() { impl_->out.flush(); }

}  // namespace td7
