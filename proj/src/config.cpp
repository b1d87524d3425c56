#include "td7/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace td7 {

EncoderTarget parse_encoder_target(const std::string& s) {
    if (s == "next_zs") return EncoderTarget::next_zs;
    if (s == "raw_next_state") return EncoderTarget::raw_next_state;
    if (s == "polyak_zs") return EncoderTarget::polyak_zs;
    if (s == "zs_plus_reward") return EncoderTarget::zs_plus_reward;
    if (s == "next_zsa") return EncoderTarget::next_zsa;
    if (s == "cosine") return EncoderTarget::cosine;
    throw std::invalid_argument("unknown encoder target: " + s);
}

NormVariant parse_norm_variant(const std::string& s) {
    if (s == "standard") return NormVariant::standard;
    if (s == "no_phi_norm") return NormVariant::no_phi_norm;
    if (s == "none") return NormVariant::none;
    if (s == "norm_zsa") return NormVariant::norm_zsa;
    throw std::invalid_argument("unknown normalization variant: " + s);
}

AgentConfig<float> RunConfig::agent_config(int state_dim, int action_dim) const {
    AgentConfig<float> a;
    a.state_dim = state_dim;
    a.action_dim = action_dim;
    a.zs_dim = zs_dim;
    a.hidden_dim = hidden_dim;
    a.phi_dim = phi_dim;
    a.batch_size = batch_size;
    a.discount = discount;
    a.target_policy_noise = target_policy_noise;
    a.noise_clip = noise_clip;
    a.exploration_noise = exploration_noise;
    a.policy_update_frequency = policy_update_frequency;
    a.target_update_frequency = target_update_frequency;
    a.initial_random_steps = initial_random_steps;
    a.bc_weight = (mode == "offline") ? bc_weight_offline : 0.0;
    a.huber_threshold = huber_threshold;
    a.adam.lr = learning_rate;
    a.use_sale = !no_sale;
    a.use_clipping = !no_clipping;
    a.use_lap = !no_lap;
    a.fixed_embeddings = !no_fixed_embeddings;
    a.q_use_zsa = q_use_zsa;
    a.q_use_zs = q_use_zs;
    a.q_use_sa = q_use_sa;
    a.pi_use_zs = pi_use_zs;
    a.pi_use_s = pi_use_s;
    a.norm = parse_norm_variant(norm);
    a.encoder_target = parse_encoder_target(encoder_target);
    a.end_to_end_beta = end_to_end_beta;
    a.single_q_actor = single_q_actor;
    a.relu_value = relu_value;
    a.polyak_tau = polyak_tau;
    return a;
}

LapParams RunConfig::lap_params() const {
    LapParams p;
    p.alpha = lap_alpha;
    p.min_priority = lap_min_priority;
    p.capacity = int(buffer_capacity);
    return p;
}

AssessConfig RunConfig::assess_config() const {
    AssessConfig c;
    if (assess_criterion == "min")
        c.criterion = AssessConfig::Criterion::min;
    else if (assess_criterion == "mean")
        c.criterion = AssessConfig::Criterion::mean;
    else
        throw std::invalid_argument("unknown assessment criterion: " + assess_criterion);
    c.early_episodes = early_episodes;
    c.late_episodes = late_episodes;
    c.early_timesteps = early_timesteps;
    c.reset_weight = reset_weight;
    c.early_termination = early_termination;
    return c;
}

void apply_profile(RunConfig& cfg, const std::string& name) {
    if (name == "paper") return;  // struct defaults are the full-scale values
    if (name == "desk") {
        cfg.total_env_steps = 50000;
        cfg.buffer_capacity = 50000;
        cfg.initial_random_steps = 1000;
        cfg.early_timesteps = 10000;
        cfg.eval_frequency = 2500;
        cfg.zs_dim = 8;
        cfg.hidden_dim = 32;
        cfg.phi_dim = 32;
        cfg.batch_size = 32;
        return;
    }
    throw std::invalid_argument("unknown profile: " + name);
}

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("not a boolean: " + v);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& registry() {
    static const std::map<std::string, Setter> reg = [] {
        std::map<std::string, Setter> r;
        auto str = [](std::string RunConfig::* f) {
            return [f](RunConfig& c, const std::string& v) { c.*f = v; };
        };
        auto i64 = [](int64_t RunConfig::* f) {
            return [f](RunConfig& c, const std::string& v) { c.*f = std::stoll(v); };
        };
        auto i32 = [](int RunConfig::* f) {
            return [f](RunConfig& c, const std::string& v) { c.*f = std::stoi(v); };
        };
        auto u64 = [](uint64_t RunConfig::* f) {
            return [f](RunConfig& c, const std::string& v) { c.*f = std::stoull(v); };
        };
        auto f64 = [](double RunConfig::* f) {
            return [f](RunConfig& c, const std::string& v) { c.*f = std::stod(v); };
        };
        auto bl = [](bool RunConfig::* f) {
            return [f](RunConfig& c, const std::string& v) { c.*f = parse_bool(v); };
        };
        r["profile"] = [](RunConfig& c, const std::string& v) { apply_profile(c, v); };
        r["env"] = str(&RunConfig::env);
        r["seed"] = u64(&RunConfig::seed);
        r["mode"] = [](RunConfig& c, const std::string& v) {
            if (v != "online" && v != "offline") throw std::invalid_argument("mode: " + v);
            c.mode = v;
        };
        r["total_env_steps"] = i64(&RunConfig::total_env_steps);
        r["eval_frequency"] = i64(&RunConfig::eval_frequency);
        r["eval_episodes"] = i32(&RunConfig::eval_episodes);
        r["out"] = str(&RunConfig::out);
        r["dataset"] = str(&RunConfig::dataset);
        r["wall_clock"] = bl(&RunConfig::wall_clock);

        r["agent.zs_dim"] = i32(&RunConfig::zs_dim);
        r["agent.hidden_dim"] = i32(&RunConfig::hidden_dim);
        r["agent.phi_dim"] = i32(&RunConfig::phi_dim);
        r["agent.batch_size"] = i32(&RunConfig::batch_size);
        r["agent.discount"] = f64(&RunConfig::discount);
        r["agent.target_policy_noise"] = f64(&RunConfig::target_policy_noise);
        r["agent.noise_clip"] = f64(&RunConfig::noise_clip);
        r["agent.exploration_noise"] = f64(&RunConfig::exploration_noise);
        r["agent.policy_update_frequency"] = i32(&RunConfig::policy_update_frequency);
        r["agent.target_update_frequency"] = i32(&RunConfig::target_update_frequency);
        r["agent.initial_random_steps"] = i64(&RunConfig::initial_random_steps);
        r["agent.bc_weight_offline"] = f64(&RunConfig::bc_weight_offline);
        r["agent.huber_threshold"] = f64(&RunConfig::huber_threshold);
        r["agent.learning_rate"] = f64(&RunConfig::learning_rate);

        r["lap.alpha"] = f64(&RunConfig::lap_alpha);
        r["lap.min_priority"] = f64(&RunConfig::lap_min_priority);
        r["lap.capacity"] = i64(&RunConfig::buffer_capacity);

        r["assess.criterion"] = str(&RunConfig::assess_criterion);
        r["assess.early_episodes"] = i32(&RunConfig::early_episodes);
        r["assess.late_episodes"] = i32(&RunConfig::late_episodes);
        r["assess.early_timesteps"] = i64(&RunConfig::early_timesteps);
        r["assess.reset_weight"] = f64(&RunConfig::reset_weight);
        r["assess.early_termination"] = bl(&RunConfig::early_termination);
        r["assess.deterministic"] = bl(&RunConfig::assess_deterministic);

        r["ablate.no_sale"] = bl(&RunConfig::no_sale);
        r["ablate.no_lap"] = bl(&RunConfig::no_lap);
        r["ablate.no_checkpoints"] = bl(&RunConfig::no_checkpoints);
        r["ablate.no_clipping"] = bl(&RunConfig::no_clipping);
        r["ablate.no_fixed_embeddings"] = bl(&RunConfig::no_fixed_embeddings);
        r["ablate.current_policy_eval"] = bl(&RunConfig::current_policy_eval);
        r["ablate.single_q_actor"] = bl(&RunConfig::single_q_actor);
        r["ablate.relu_value"] = bl(&RunConfig::relu_value);
        r["ablate.polyak_tau"] = f64(&RunConfig::polyak_tau);
        r["ablate.end_to_end_beta"] = f64(&RunConfig::end_to_end_beta);
        r["ablate.encoder_target"] = str(&RunConfig::encoder_target);
        r["ablate.norm"] = str(&RunConfig::norm);
        r["ablate.q_use_zsa"] = bl(&RunConfig::q_use_zsa);
        r["ablate.q_use_zs"] = bl(&RunConfig::q_use_zs);
        r["ablate.q_use_sa"] = bl(&RunConfig::q_use_sa);
        r["ablate.pi_use_zs"] = bl(&RunConfig::pi_use_zs);
        r["ablate.pi_use_s"] = bl(&RunConfig::pi_use_s);
        return r;
    }();
    return reg;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto it = registry().find(key);
    if (it == registry().end()) throw std::invalid_argument("unknown config key: " + key);
    try {
        it->second(cfg, value);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value for " + key + ": " + value);
    }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : registry()) keys.push_back(k);
    return keys;
}

}  // namespace td7
