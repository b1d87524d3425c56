#include "td7/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "td7/rng.hpp"

namespace td7 {

namespace {

void write_f32(std::ostream& out, const float* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n * sizeof(float)));
}

std::string header_json(const DatasetHeader& h) {
    nlohmann::json j;
    j["env"] = h.env;
    j["state_dim"] = h.state_dim;
    j["action_dim"] = h.action_dim;
    j["policy"] = h.policy;
    j["count"] = h.count;
    return j.dump();
}

DatasetHeader parse_header(const std::string& line) {
    auto j = nlohmann::json::parse(line);
    DatasetHeader h;
    h.env = j.at("env").get<std::string>();
    h.state_dim = j.at("state_dim").get<int>();
    h.action_dim = j.at("action_dim").get<int>();
    h.policy = j.at("policy").get<std::string>();
    h.count = j.at("count").get<int64_t>();
    return h;
}

}  // namespace

void write_dataset(const std::string& path, const DatasetHeader& header,
                   const std::vector<DatasetRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open dataset for writing: " + path);
    DatasetHeader h = header;
    h.count = int64_t(records.size());
    out << header_json(h) << '\n';
    for (const auto& rec : records) {
        write_f32(out, rec.s.data(), rec.s.size());
        write_f32(out, rec.a.data(), rec.a.size());
        write_f32(out, &rec.r, 1);
        write_f32(out, rec.s_next.data(), rec.s_next.size());
        out.put(char(rec.not_terminal));
    }
    if (!out) throw std::runtime_error("write failure on dataset: " + path);
}

DatasetHeader read_dataset(const std::string& path,
                           const std::function<void(const DatasetRecord&)>& sink) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing dataset header: " + path);
    DatasetHeader h = parse_header(line);
    DatasetRecord rec;
    rec.s.resize(h.state_dim);
    rec.a.resize(h.action_dim);
    rec.s_next.resize(h.state_dim);
    for (int64_t i = 0; i < h.count; ++i) {
        in.read(reinterpret_cast<char*>(rec.s.data()), h.state_dim * sizeof(float));
        in.read(reinterpret_cast<char*>(rec.a.data()), h.action_dim * sizeof(float));
        in.read(reinterpret_cast<char*>(&rec.r), sizeof(float));
        in.read(reinterpret_cast<char*>(rec.s_next.data()), h.state_dim * sizeof(float));
        int c = in.get();
        if (!in || c == EOF) throw std::runtime_error("truncated dataset: " + path);
        rec.not_terminal = uint8_t(c);
        if (sink) sink(rec);
    }
    return h;
}

DatasetHeader peek_dataset_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("missing dataset header: " + path);
    return parse_header(line);
}

DatasetHeader generate_dataset(Env& env, const Policy& policy, const std::string& policy_tag,
                               float noise_std, int64_t n_transitions, uint64_t seed,
                               const std::string& path) {
    if (n_transitions <= 0) throw std::invalid_argument("generate_dataset: n_transitions <= 0");
    Rng noise = substream(seed, "dataset_noise");
    Rng reset_seeds = substream(seed, "dataset_reset");

    std::vector<DatasetRecord> records;
    records.reserve(size_t(n_transitions));
    std::vector<float> s;
    bool need_reset = true;
    while (int64_t(records.size()) < n_transitions) {
        if (need_reset) {
            s = env.reset(reset_seeds.next_u64());
            need_reset = false;
        }
        std::vector<float> a = policy(s);
        if (noise_std > 0) {
            for (auto& x : a) x = std::clamp(x + float(noise.normal(noise_std)), -1.0f, 1.0f);
        }
        StepResult res = env.step(a);
        DatasetRecord rec;
        rec.s = s;
        rec.a = a;
        rec.r = res.r;
        rec.s_next = res.s_next;
        rec.not_terminal = res.terminal ? 0 : 1;  // timeouts stay non-terminal
        records.push_back(std::move(rec));
        s = res.s_next;
        if (res.terminal || res.truncated) need_reset = true;
    }

    DatasetHeader h;
    h.env = env.spec().name;
    h.state_dim = env.spec().state_dim;
    h.action_dim = env.spec().action_dim;
    h.policy = policy_tag;
    h.count = n_transitions;
    write_dataset(path, h, records);
    return h;
}

DatasetHeader load_dataset_into(const std::string& path, LapBuffer& buffer) {
    return read_dataset(path, [&](const DatasetRecord& rec) {
        buffer.insert(rec.s, rec.a, rec.r, rec.s_next, rec.not_terminal != 0);
    });
}

}  // namespace td7
