// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/train_config.hpp"

#include "fp8lab/corpus.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fp8lab {

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

template <class T>
T parse_num(const std::string& v) {
    std::istringstream ss(v);
    T out;
    ss >> out;
    if (ss.fail() || !ss.eof()) {
        throw std::invalid_argument("expected a number, got '" + v + "'");
    }
    return out;
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"arch", [](TrainConfig& c, const std::string& v) { c.arch = v; }},
        {"layers", [](TrainConfig& c, const std::string& v) { c.layers = parse_num<int>(v); }},
        {"hidden", [](TrainConfig& c, const std::string& v) { c.hidden = parse_num<int>(v); }},
        {"ffn_hidden",
         [](TrainConfig& c, const std::string& v) { c.ffn_hidden = parse_num<int>(v); }},
        {"heads", [](TrainConfig& c, const std::string& v) { c.heads = parse_num<int>(v); }},
        {"qk_groups",
         [](TrainConfig& c, const std::string& v) { c.qk_groups = parse_num<int>(v); }},
        {"context", [](TrainConfig& c, const std::string& v) { c.context = parse_num<int>(v); }},
        {"batch", [](TrainConfig& c, const std::string& v) { c.batch = parse_num<int>(v); }},
        {"total_steps",
         [](TrainConfig& c, const std::string& v) { c.total_steps = parse_num<std::int64_t>(v); }},
        {"warmup_steps",
         [](TrainConfig& c, const std::string& v) { c.warmup_steps = parse_num<std::int64_t>(v); }},
        {"cooldown_steps",
         [](TrainConfig& c, const std::string& v) {
             c.cooldown_steps = parse_num<std::int64_t>(v);
         }},
        {"peak_lr", [](TrainConfig& c, const std::string& v) { c.peak_lr = parse_num<double>(v); }},
        {"min_lr", [](TrainConfig& c, const std::string& v) { c.min_lr = parse_num<double>(v); }},
        {"weight_decay",
         [](TrainConfig& c, const std::string& v) { c.weight_decay = parse_num<double>(v); }},
        {"beta1", [](TrainConfig& c, const std::string& v) { c.beta1 = parse_num<double>(v); }},
        {"beta2", [](TrainConfig& c, const std::string& v) { c.beta2 = parse_num<double>(v); }},
        {"adam_eps",
         [](TrainConfig& c, const std::string& v) { c.adam_eps = parse_num<double>(v); }},
        {"grad_clip",
         [](TrainConfig& c, const std::string& v) { c.grad_clip = parse_num<double>(v); }},
        {"seed",
         [](TrainConfig& c, const std::string& v) { c.seed = parse_num<std::uint64_t>(v); }},
        {"precision", [](TrainConfig& c, const std::string& v) { c.precision = v; }},
        {"corpus", [](TrainConfig& c, const std::string& v) { c.corpus = v; }},
        {"probe_stride",
         [](TrainConfig& c, const std::string& v) { c.probe_stride = parse_num<std::int64_t>(v); }},
        {"checkpoint_interval",
         [](TrainConfig& c, const std::string& v) {
             c.checkpoint_interval = parse_num<std::int64_t>(v);
         }},
        {"softmax_scale",
         [](TrainConfig& c, const std::string& v) { c.softmax_scale = parse_num<double>(v); }},
        {"init_std",
         [](TrainConfig& c, const std::string& v) { c.init_std = parse_num<double>(v); }},
        {"rope_base",
         [](TrainConfig& c, const std::string& v) { c.rope_base = parse_num<double>(v); }},
        {"rms_eps", [](TrainConfig& c, const std::string& v) { c.rms_eps = parse_num<double>(v); }},
        {"qk_gamma_sq",
         [](TrainConfig& c, const std::string& v) { c.qk_gamma_sq = parse_num<double>(v); }},
        {"scaling_history_len",
         [](TrainConfig& c, const std::string& v) {
             c.scaling_history_len = parse_num<int>(v);
         }},
        {"scaling_margin",
         [](TrainConfig& c, const std::string& v) { c.scaling_margin = parse_num<int>(v); }},
        {"tied_embeddings",
         [](TrainConfig& c, const std::string& v) { c.tied_embeddings = parse_bool(v); }},
        {"wd_cooldown",
         [](TrainConfig& c, const std::string& v) { c.wd_cooldown = parse_bool(v); }},
        {"threads", [](TrainConfig& c, const std::string& v) { c.threads = parse_num<int>(v); }},
        {"halt_factor",
         [](TrainConfig& c, const std::string& v) { c.halt_factor = parse_num<double>(v); }},
        {"halt_window",
         [](TrainConfig& c, const std::string& v) { c.halt_window = parse_num<int>(v); }},
        {"smooth_window",
         [](TrainConfig& c, const std::string& v) { c.smooth_window = parse_num<int>(v); }},
    };
    return table;
}

}  // namespace

void apply_override(TrainConfig& config, const std::string& key, const std::string& value) {
    auto it = setters().find(key);
    if (it == setters().end()) {
        throw std::invalid_argument("unknown config key: " + key);
    }
    try {
        it->second(config, value);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
}

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_override(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.layers = layers;
    m.hidden = hidden;
    m.ffn_hidden = ffn_hidden;
    m.heads = heads;
    m.qk_groups = qk_groups;
    m.vocab = byte_vocab_size;
    m.context = context;
    m.tied_embeddings = tied_embeddings;
    m.init_std = init_std;
    m.softmax_scale = softmax_scale;
    m.rope_base = rope_base;
    m.rms_eps = rms_eps;
    m.qk_gamma_sq = qk_gamma_sq;
    return m;
}

ScheduleConfig TrainConfig::schedule() const {
    return ScheduleConfig{total_steps, warmup_steps, cooldown_steps, peak_lr, min_lr};
}

PrecisionPolicy TrainConfig::policy() const { return PrecisionPolicy::by_name(precision); }

void TrainConfig::validate() const {
    if (warmup_steps + cooldown_steps > total_steps) {
        throw std::invalid_argument("config: warmup_steps + cooldown_steps exceed total_steps");
    }
    if (min_lr > peak_lr) {
        throw std::invalid_argument("config: min_lr exceeds peak_lr");
    }
    if (total_steps <= 0 || batch <= 0 || context <= 1) {
        throw std::invalid_argument("config: total_steps, batch and context must be positive");
    }
    if (threads < 1) {
        throw std::invalid_argument("config: threads must be >= 1");
    }
    if (probe_stride < 0 || checkpoint_interval < 0) {
        throw std::invalid_argument("config: strides must be non-negative");
    }
    if (halt_window < 1 || halt_factor <= 1.0) {
        throw std::invalid_argument("config: invalid divergence halt settings");
    }
    if (smooth_window < 1) {
        throw std::invalid_argument("config: smooth_window must be >= 1");
    }
    if (scaling_history_len < 1 || scaling_margin < 0) {
        throw std::invalid_argument("config: invalid delayed-scaling settings");
    }
    PrecisionPolicy::by_name(precision);               // rejects unknown methods
    const auto& spec = architecture_by_name(arch);     // rejects unknown architectures
    model_config().validate(spec);
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["arch"] = arch;
    j["layers"] = layers;
    j["hidden"] = hidden;
    j["ffn_hidden"] = ffn_hidden;
    j["heads"] = heads;
    j["qk_groups"] = qk_groups;
    j["context"] = context;
    j["batch"] = batch;
    j["total_steps"] = total_steps;
    j["warmup_steps"] = warmup_steps;
    j["cooldown_steps"] = cooldown_steps;
    j["peak_lr"] = peak_lr;
    j["min_lr"] = min_lr;
    j["weight_decay"] = weight_decay;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["grad_clip"] = grad_clip;
    j["seed"] = seed;
    j["precision"] = precision;
    j["corpus"] = corpus;
    j["probe_stride"] = probe_stride;
    j["checkpoint_interval"] = checkpoint_interval;
    j["softmax_scale"] = softmax_scale;
    j["init_std"] = init_std;
    j["rope_base"] = rope_base;
    j["rms_eps"] = rms_eps;
    j["qk_gamma_sq"] = qk_gamma_sq;
    j["scaling_history_len"] = scaling_history_len;
    j["scaling_margin"] = scaling_margin;
    j["tied_embeddings"] = tied_embeddings;
    j["wd_cooldown"] = wd_cooldown;
    j["threads"] = threads;
    j["halt_factor"] = halt_factor;
    j["halt_window"] = halt_window;
    j["smooth_window"] = smooth_window;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig c;
    j.at("arch").get_to(c.arch);
    j.at("layers").get_to(c.layers);
    j.at("hidden").get_to(c.hidden);
    j.at("ffn_hidden").get_to(c.ffn_hidden);
    j.at("heads").get_to(c.heads);
    j.at("qk_groups").get_to(c.qk_groups);
    j.at("context").get_to(c.context);
    j.at("batch").get_to(c.batch);
    j.at("total_steps").get_to(c.total_steps);
    j.at("warmup_steps").get_to(c.warmup_steps);
    j.at("cooldown_steps").get_to(c.cooldown_steps);
    j.at("peak_lr").get_to(c.peak_lr);
    j.at("min_lr").get_to(c.min_lr);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("adam_eps").get_to(c.adam_eps);
    j.at("grad_clip").get_to(c.grad_clip);
    j.at("seed").get_to(c.seed);
    j.at("precision").get_to(c.precision);
    j.at("corpus").get_to(c.corpus);
    j.at("probe_stride").get_to(c.probe_stride);
    j.at("checkpoint_interval").get_to(c.checkpoint_interval);
    j.at("softmax_scale").get_to(c.softmax_scale);
    j.at("init_std").get_to(c.init_std);
    j.at("rope_base").get_to(c.rope_base);
    j.at("rms_eps").get_to(c.rms_eps);
    j.at("qk_gamma_sq").get_to(c.qk_gamma_sq);
    j.at("scaling_history_len").get_to(c.scaling_history_len);
    j.at("scaling_margin").get_to(c.scaling_margin);
    j.at("tied_embeddings").get_to(c.tied_embeddings);
    j.at("wd_cooldown").get_to(c.wd_cooldown);
    j.at("threads").get_to(c.threads);
    j.at("halt_factor").get_to(c.halt_factor);
    j.at("halt_window").get_to(c.halt_window);
    j.at("smooth_window").get_to(c.smooth_window);
    return c;
}

}  // namespace fp8lab
