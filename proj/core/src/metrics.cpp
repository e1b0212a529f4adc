// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/metrics.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fp8lab {

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) {
        throw std::runtime_error("metrics: cannot open " + path);
    }
}

std::string metrics_line(const StepMetrics& m) {
    nlohmann::json j;
    j["step"] = m.step;
    j["tokens"] = m.tokens;
    j["lr"] = m.lr;
    j["loss"] = m.loss;
    j["grad_norm_preclip"] = m.grad_norm_preclip;
    j["cast"] = {{"overflow", m.cast_overflow}, {"underflow", m.cast_underflow}};
    if (!m.kurtosis.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : m.kurtosis) {
            nlohmann::json rec;
            rec["probe"] = to_string(r.probe);
            if (r.layer == KurtosisRecord::mean_layer) {
                rec["layer"] = "mean";
            } else {
                rec["layer"] = r.layer;
            }
            if (r.defined) {
                rec["value"] = r.value;
            } else {
                rec["value"] = nullptr;
            }
            rec["skipped"] = r.skipped_positions;
            arr.push_back(std::move(rec));
        }
        j["kurtosis"] = std::move(arr);
    }
    return j.dump();
}

void MetricsWriter::write(const StepMetrics& m) { out_ << metrics_line(m) << '\n'; }

void MetricsWriter::flush() { out_.flush(); }

std::vector<StepMetrics> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("metrics: cannot open " + path);
    }
    std::vector<StepMetrics> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        StepMetrics m;
        j.at("step").get_to(m.step);
        j.at("tokens").get_to(m.tokens);
        j.at("lr").get_to(m.lr);
        j.at("loss").get_to(m.loss);
        j.at("grad_norm_preclip").get_to(m.grad_norm_preclip);
        m.cast_overflow = j.at("cast").at("overflow").get<std::uint64_t>();
        m.cast_underflow = j.at("cast").at("underflow").get<std::uint64_t>();
        if (j.contains("kurtosis")) {
            for (const auto& rec : j.at("kurtosis")) {
                KurtosisRecord r;
                r.step = m.step;
                r.tokens = m.tokens;
                r.probe = probe_by_name(rec.at("probe").get<std::string>());
                const auto& layer = rec.at("layer");
                r.layer = layer.is_string() ? KurtosisRecord::mean_layer : layer.get<int>();
                if (rec.at("value").is_null()) {
                    r.defined = false;
                } else {
                    r.defined = true;
                    r.value = rec.at("value").get<double>();
                }
                r.skipped_positions = rec.at("skipped").get<std::int64_t>();
                m.kurtosis.push_back(r);
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace fp8lab
