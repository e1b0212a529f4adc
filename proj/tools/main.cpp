// SPDX-License-Identifier: Apache-2.0
//
// fp8lab command line: train / compare / diagnose / export / list-archs.
// Exit codes: 0 completed, 1 usage or config error, 2 run diverged,
// 3 internal error.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include "fp8lab/commands.hpp"

namespace {

fp8lab::Overrides parse_overrides(const std::vector<std::string>& raw) {
    fp8lab::Overrides out;
    for (const auto& kv : raw) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("override must look like key=value, got '" + kv + "'");
        }
        out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return out;
}

std::string default_run_dir(const std::string& root) {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    return root + "/run-" + std::to_string(ms);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale FP8 training laboratory"};
    app.require_subcommand(1);

    std::string config_path, run_dir, out_root = "runs", resume, checkpoint, corpus, csv;
    std::vector<std::string> raw_overrides, series;
    bool sequential = false;

    auto* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("--config", config_path, "Config file (key = value lines)");
    train->add_option("--set", raw_overrides, "Override a config key, key=value (repeatable)");
    train->add_option("--out", run_dir, "Run directory (default: runs/run-<epoch-ms>)");
    train->add_option("--resume", resume, "Resume from a checkpoint file");

    auto* compare = app.add_subcommand(
        "compare", "Seed-matched BF16 vs FP8DPA comparison of one config");
    compare->add_option("--config", config_path, "Config file")->required();
    compare->add_option("--set", raw_overrides, "Override a config key (repeatable)");
    compare->add_option("--out", out_root, "Output root for the two run directories");
    compare->add_flag("--sequential", sequential, "Run the two trainings one after the other");

    auto* diagnose = app.add_subcommand("diagnose", "Per-layer kurtosis table of a checkpoint");
    diagnose->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    diagnose->add_option("--corpus", corpus, "Corpus file for the probe batch")->required();
    diagnose->add_option("--csv", csv, "Output CSV path (default: <checkpoint>.kurtosis.csv)");

    auto* exp = app.add_subcommand("export", "Export metric series from a run directory as CSV");
    exp->add_option("--run", run_dir, "Run directory")->required();
    exp->add_option("--series", series,
                    "Series names: loss, grad_norm, lr, kurt_<probe>[_L<layer>]")
        ->required();

    app.add_subcommand("list-archs", "Print the architecture table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            if (config_path.empty() && resume.empty()) {
                std::cerr << "train: either --config or --resume is required\n";
                return fp8lab::exit_usage;
            }
            fp8lab::TrainCommand cmd;
            cmd.config_path = config_path;
            cmd.overrides = parse_overrides(raw_overrides);
            cmd.run_dir = run_dir.empty() ? default_run_dir(out_root) : run_dir;
            cmd.resume_checkpoint = resume;
            const auto res = fp8lab::cmd_train(cmd);
            std::cout << "run " << res.run_dir << " " << fp8lab::to_string(res.result.status)
                      << " at step " << res.result.final_step << ", loss " << res.result.final_loss
                      << "\n";
            if (!res.result.message.empty()) {
                std::cerr << res.result.message << "\n";
            }
            return res.exit_code;
        }
        if (compare->parsed()) {
            const auto report = fp8lab::cmd_compare(config_path, parse_overrides(raw_overrides),
                                                    out_root, !sequential);
            std::cout << report.to_text();
            const bool both_ok =
                report.bf16.status == "completed" && report.fp8dpa.status == "completed";
            return both_ok ? fp8lab::exit_completed : fp8lab::exit_diverged;
        }
        if (diagnose->parsed()) {
            const std::string out_csv = csv.empty() ? checkpoint + ".kurtosis.csv" : csv;
            fp8lab::cmd_diagnose(checkpoint, corpus, out_csv);
            std::cout << out_csv << "\n";
            return fp8lab::exit_completed;
        }
        if (exp->parsed()) {
            fp8lab::cmd_export(run_dir, series);
            return fp8lab::exit_completed;
        }
        std::cout << fp8lab::list_architectures_text();
        return fp8lab::exit_completed;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fp8lab::exit_usage;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fp8lab::exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return fp8lab::exit_internal;
    }
}
