// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/commands.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "fp8lab/checkpoint.hpp"
#include "fp8lab/corpus.hpp"
#include "fp8lab/metrics.hpp"

namespace fs = std::filesystem;

namespace fp8lab {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

std::string sha256_hex_of_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open for hashing: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

void write_manifest(const std::string& run_dir, const RunManifest& m) {
    nlohmann::json j;
    j["run_id"] = m.run_id;
    j["config_path"] = m.config_path;
    j["config_sha256"] = m.config_sha256;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["status"] = m.status;
    j["final_step"] = m.final_step;
    j["precision"] = m.precision;
    j["resume_from"] = m.resume_from;
    nlohmann::json ov = nlohmann::json::array();
    for (const auto& [k, v] : m.overrides) {
        ov.push_back({{"key", k}, {"value", v}});
    }
    j["overrides"] = std::move(ov);
    std::ofstream out(run_dir + "/manifest.json", std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write manifest in " + run_dir);
    }
    out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& run_dir) {
    std::ifstream in(run_dir + "/manifest.json");
    if (!in) {
        throw std::runtime_error("no manifest in " + run_dir);
    }
    nlohmann::json j = nlohmann::json::parse(in);
    RunManifest m;
    j.at("run_id").get_to(m.run_id);
    j.at("config_path").get_to(m.config_path);
    j.at("config_sha256").get_to(m.config_sha256);
    j.at("started_at").get_to(m.started_at);
    j.at("finished_at").get_to(m.finished_at);
    j.at("status").get_to(m.status);
    j.at("final_step").get_to(m.final_step);
    j.at("precision").get_to(m.precision);
    j.at("resume_from").get_to(m.resume_from);
    for (const auto& o : j.at("overrides")) {
        m.overrides.emplace_back(o.at("key").get<std::string>(), o.at("value").get<std::string>());
    }
    return m;
}

namespace {

TrainConfig load_config_with_overrides(const std::string& config_path, const Overrides& overrides) {
    TrainConfig cfg = parse_config_file(config_path);
    for (const auto& [key, value] : overrides) {
        apply_override(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

}  // namespace

TrainCommandResult cmd_train(const TrainCommand& cmd) {
    TrainConfig cfg;
    std::string config_hash;
    if (!cmd.resume_checkpoint.empty()) {
        cfg = read_checkpoint_config(cmd.resume_checkpoint);
        config_hash = sha256_hex(cfg.to_json());
    } else {
        cfg = load_config_with_overrides(cmd.config_path, cmd.overrides);
        config_hash = sha256_hex_of_file(cmd.config_path);
    }

    fs::create_directories(cmd.run_dir);
    if (fs::exists(cmd.run_dir + "/manifest.json")) {
        throw std::invalid_argument("run directory already holds a manifest: " + cmd.run_dir);
    }

    RunManifest manifest;
    manifest.run_id = fs::path(cmd.run_dir).filename().string();
    manifest.config_path = cmd.config_path;
    manifest.config_sha256 = config_hash;
    manifest.started_at = iso8601_utc_now();
    manifest.status = "running";
    manifest.precision = cfg.precision;
    manifest.resume_from = cmd.resume_checkpoint;
    manifest.overrides = cmd.overrides;
    write_manifest(cmd.run_dir, manifest);

    TrainCommandResult out;
    out.run_dir = cmd.run_dir;
    try {
        out.result = train(cfg, cmd.run_dir, cmd.resume_checkpoint);
    } catch (const std::exception& e) {
        manifest.finished_at = iso8601_utc_now();
        manifest.status = "error";
        write_manifest(cmd.run_dir, manifest);
        out.exit_code = exit_internal;
        out.result.message = e.what();
        return out;
    }
    manifest.finished_at = iso8601_utc_now();
    manifest.status = to_string(out.result.status);
    manifest.final_step = out.result.final_step;
    write_manifest(cmd.run_dir, manifest);
    out.exit_code =
        out.result.status == RunStatus::completed
            ? exit_completed
            : (out.result.status == RunStatus::diverged ? exit_diverged : exit_internal);
    return out;
}

namespace {

double mean_qkv_kurtosis(const std::vector<StepMetrics>& metrics) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (const auto& m : metrics) {
        for (const auto& r : m.kurtosis) {
            if (r.probe == ProbeKind::qkv && r.layer == KurtosisRecord::mean_layer && r.defined) {
                sum += r.value;
                ++n;
            }
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

std::vector<std::pair<double, double>> qkv_series(const std::vector<StepMetrics>& metrics) {
    std::vector<std::pair<double, double>> series;
    for (const auto& m : metrics) {
        for (const auto& r : m.kurtosis) {
            if (r.probe == ProbeKind::qkv && r.layer == KurtosisRecord::mean_layer && r.defined) {
                series.emplace_back(static_cast<double>(m.tokens), r.value);
            }
        }
    }
    return series;
}

std::string verdict_of(const std::vector<StepMetrics>& metrics, const DivergenceConfig& monitor) {
    try {
        return to_string(divergence_score(qkv_series(metrics), monitor).status);
    } catch (const std::invalid_argument&) {
        return "insufficient-data";
    }
}

CompareRow make_row(const std::string& method, const TrainCommandResult& r,
                    const DivergenceConfig& monitor) {
    CompareRow row;
    row.method = method;
    row.status = to_string(r.result.status);
    row.final_loss = r.result.final_loss;
    row.smoothed_loss = r.result.smoothed_loss;
    row.run_dir = r.run_dir;
    const auto metrics = read_metrics(r.run_dir + "/metrics.jsonl");
    row.mean_qkv_kurtosis = mean_qkv_kurtosis(metrics);
    row.divergence_verdict = verdict_of(metrics, monitor);
    return row;
}

}  // namespace

std::string kurtosis_verdict(const std::string& metrics_path, const DivergenceConfig& monitor) {
    return verdict_of(read_metrics(metrics_path), monitor);
}

CompareReport cmd_compare(const std::string& config_path, const Overrides& overrides,
                          const std::string& out_root, bool parallel,
                          const DivergenceConfig& monitor) {
    // Validate once up front so both runs see the same rejected keys.
    (void)load_config_with_overrides(config_path, overrides);
    fs::create_directories(out_root);

    auto run_one = [&](const std::string& method) {
        TrainCommand cmd;
        cmd.config_path = config_path;
        cmd.overrides = overrides;
        cmd.overrides.emplace_back("precision", method);
        cmd.run_dir = out_root + "/" + method;
        return cmd_train(cmd);
    };

    TrainCommandResult bf16_result, fp8dpa_result;
    if (parallel) {
        std::thread t_bf16([&] { bf16_result = run_one("bf16"); });
        std::thread t_fp8([&] { fp8dpa_result = run_one("fp8dpa"); });
        t_bf16.join();
        t_fp8.join();
    } else {
        bf16_result = run_one("bf16");
        fp8dpa_result = run_one("fp8dpa");
    }

    CompareReport report;
    report.bf16 = make_row("bf16", bf16_result, monitor);
    report.fp8dpa = make_row("fp8dpa", fp8dpa_result, monitor);
    report.loss_gap_abs = std::fabs(report.bf16.smoothed_loss - report.fp8dpa.smoothed_loss);
    report.loss_gap_rel =
        report.bf16.smoothed_loss != 0.0 ? report.loss_gap_abs / report.bf16.smoothed_loss : 0.0;

    nlohmann::json j;
    for (const CompareRow* row : {&report.bf16, &report.fp8dpa}) {
        j[row->method] = {{"status", row->status},
                          {"final_loss", row->final_loss},
                          {"smoothed_loss", row->smoothed_loss},
                          {"mean_qkv_kurtosis", row->mean_qkv_kurtosis},
                          {"divergence_verdict", row->divergence_verdict},
                          {"run_dir", row->run_dir}};
    }
    j["loss_gap_abs"] = report.loss_gap_abs;
    j["loss_gap_rel"] = report.loss_gap_rel;
    std::ofstream out(out_root + "/compare.json", std::ios::trunc);
    out << j.dump(2) << '\n';
    return report;
}

std::string CompareReport::to_text() const {
    std::ostringstream out;
    out << "method   status     final_loss  smoothed  mean_qkv_kurt  verdict\n";
    for (const CompareRow* row : {&bf16, &fp8dpa}) {
        out << std::left << std::setw(9) << row->method << std::setw(11) << row->status
            << std::setw(12) << std::fixed << std::setprecision(4) << row->final_loss
            << std::setw(10) << row->smoothed_loss << std::setw(15) << row->mean_qkv_kurtosis
            << row->divergence_verdict << '\n';
    }
    out << "loss gap: " << std::setprecision(6) << loss_gap_abs << " (" << loss_gap_rel * 100.0
        << "% of bf16)\n";
    return out.str();
}

void cmd_diagnose(const std::string& checkpoint_path, const std::string& corpus_path,
                  const std::string& csv_path) {
    TrainConfig cfg = read_checkpoint_config(checkpoint_path);
    cfg.corpus = corpus_path;
    const ByteCorpus corpus = ByteCorpus::load(corpus_path, cfg.context);
    const ArchitectureSpec& spec = architecture_by_name(cfg.arch);
    auto ctx = std::make_shared<GemmContext<float>>(cfg.policy(), cfg.scaling_history_len,
                                                    cfg.scaling_margin);
    Model<float> model(spec, cfg.model_config(), ctx, cfg.seed);
    AdamW optimizer(cfg.beta1, cfg.beta2, cfg.adam_eps);
    BatchIterator iterator(corpus, cfg.context, cfg.batch, cfg.seed);
    load_checkpoint(checkpoint_path, model, optimizer, iterator);

    // A deterministic probe batch independent of the training cursor.
    BatchIterator probe_iter(corpus, cfg.context, cfg.batch, cfg.seed);
    const Batch batch = probe_iter.next();
    ProbeSink<float> sink;
    (void)model.forward(batch.inputs, cfg.batch, cfg.context, &sink);

    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + csv_path);
    }
    out << "probe,layer,kurtosis,skipped_positions\n";
    for (const auto& r : sink.layer_records()) {
        out << to_string(r.probe) << ',' << r.layer << ',';
        if (r.defined) {
            out << std::setprecision(17) << r.value;
        } else {
            out << "nan";
        }
        out << ',' << r.skipped_positions << '\n';
    }
}

void cmd_export(const std::string& run_dir, const std::vector<std::string>& series) {
    const auto metrics = read_metrics(run_dir + "/metrics.jsonl");
    for (const auto& name : series) {
        std::vector<std::pair<std::int64_t, double>> rows;
        if (name == "loss" || name == "grad_norm" || name == "lr") {
            for (const auto& m : metrics) {
                const double v = name == "loss" ? m.loss
                                 : name == "lr" ? m.lr
                                                : m.grad_norm_preclip;
                rows.emplace_back(m.tokens, v);
            }
        } else if (name.rfind("kurt_", 0) == 0) {
            std::string rest = name.substr(5);
            int layer = KurtosisRecord::mean_layer;
            const auto lpos = rest.rfind("_L");
            if (lpos != std::string::npos) {
                layer = std::stoi(rest.substr(lpos + 2));
                rest = rest.substr(0, lpos);
            }
            const ProbeKind probe = probe_by_name(rest);  // throws on unknown probe
            for (const auto& m : metrics) {
                for (const auto& r : m.kurtosis) {
                    if (r.probe == probe && r.layer == layer && r.defined) {
                        rows.emplace_back(m.tokens, r.value);
                    }
                }
            }
        } else {
            throw std::invalid_argument("unknown series: " + name);
        }
        std::ofstream out(run_dir + "/export_" + name + ".csv", std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write export for " + name);
        }
        out << "tokens," << name << '\n';
        for (const auto& [tokens, value] : rows) {
            out << tokens << ',' << std::setprecision(17) << value << '\n';
        }
    }
}

std::string list_architectures_text() {
    std::ostringstream out;
    out << "name                input-scale  final     pre       post        qk              "
           "activation\n";
    for (const auto& a : all_architectures()) {
        std::string qk = to_string(a.n_qk);
        if (a.n_qk == QkRegKind::tanh_alpha && !a.qk_gains_trainable) {
            qk += " (frozen)";
        }
        out << std::left << std::setw(20) << a.name << std::setw(13)
            << (a.scaled_input ? "1/sigma0" : "1") << std::setw(10) << to_string(a.n_final)
            << std::setw(10) << to_string(a.n_pre) << std::setw(12) << to_string(a.n_post)
            << std::setw(16) << qk << to_string(a.activation) << '\n';
    }
    return out.str();
}

}  // namespace fp8lab
