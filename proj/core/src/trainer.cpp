// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/trainer.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>

#include "fp8lab/checkpoint.hpp"
#include "fp8lab/corpus.hpp"
#include "fp8lab/metrics.hpp"
#include "fp8lab/schedule.hpp"

namespace fp8lab {

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::diverged: return "diverged";
        case RunStatus::error: return "error";
    }
    return "?";
}

TrainResult train(const TrainConfig& requested_config, const std::string& run_dir,
                  const std::string& resume_checkpoint) {
    TrainConfig config = requested_config;
    if (!resume_checkpoint.empty()) {
        config = read_checkpoint_config(resume_checkpoint);
    }
    config.validate();
    if (config.corpus.empty()) {
        throw std::invalid_argument("config: corpus path is required for training");
    }

    std::filesystem::create_directories(run_dir);
    set_gemm_threads(config.threads);

    const ByteCorpus corpus = ByteCorpus::load(config.corpus, config.context);
    const ArchitectureSpec& spec = architecture_by_name(config.arch);
    auto ctx = std::make_shared<GemmContext<float>>(config.policy(), config.scaling_history_len,
                                                    config.scaling_margin);
    Model<float> model(spec, config.model_config(), ctx, config.seed);
    AdamW optimizer(config.beta1, config.beta2, config.adam_eps);
    BatchIterator iterator(corpus, config.context, config.batch, config.seed);

    TrainerState state;
    if (!resume_checkpoint.empty()) {
        state = load_checkpoint(resume_checkpoint, model, optimizer, iterator);
    }

    MetricsWriter metrics(run_dir + "/metrics.jsonl");
    const ScheduleConfig schedule = config.schedule();
    const std::int64_t tokens_per_step =
        static_cast<std::int64_t>(config.batch) * config.context;

    TrainResult result;
    result.final_step = state.step;
    result.tokens = state.tokens;

    std::deque<double> recent_losses;  // for the smoothed final loss
    auto push_recent = [&](double l) {
        recent_losses.push_back(l);
        while (recent_losses.size() > static_cast<std::size_t>(config.smooth_window)) {
            recent_losses.pop_front();
        }
    };

    auto save_ckpt = [&](std::int64_t step) {
        save_checkpoint(run_dir + "/ckpt_step_" + std::to_string(step) + ".bin", config, model,
                        optimizer, iterator, state);
    };

    for (std::int64_t step = state.step + 1; step <= config.total_steps; ++step) {
        ctx->begin_step();
        const Batch batch = iterator.next();

        const bool probing = config.probe_stride > 0 && step % config.probe_stride == 0;
        ProbeSink<float> sink;
        Tensor<float> logits =
            model.forward(batch.inputs, config.batch, config.context, probing ? &sink : nullptr);
        Tensor<float> loss = cross_entropy(
            reshape(logits, {config.batch * config.context, byte_vocab_size}), batch.targets);
        const double loss_val = static_cast<double>(loss.item());

        state.step = step;
        state.tokens += tokens_per_step;
        result.final_step = step;
        result.tokens = state.tokens;
        result.final_loss = loss_val;

        // Divergence halt: non-finite loss, or loss far above its trailing minimum.
        bool diverged = !std::isfinite(loss_val);
        if (!diverged && state.trailing_losses.size() >= 8) {
            const double trailing_min =
                *std::min_element(state.trailing_losses.begin(), state.trailing_losses.end());
            diverged = loss_val > config.halt_factor * trailing_min;
        }

        StepMetrics m;
        m.step = step;
        m.tokens = state.tokens;
        m.loss = loss_val;
        m.lr = lr_at_step(step, schedule);
        if (probing) {
            m.kurtosis = sink.finalize(step, state.tokens);
        }

        if (diverged) {
            m.cast_overflow = ctx->cast_stats().total_overflow();
            m.cast_underflow = ctx->cast_stats().total_underflow();
            metrics.write(m);
            metrics.flush();
            push_recent(loss_val);
            result.status = RunStatus::diverged;
            result.smoothed_loss =
                std::accumulate(recent_losses.begin(), recent_losses.end(), 0.0) /
                static_cast<double>(recent_losses.size());
            result.message = "loss diverged at step " + std::to_string(step);
            save_ckpt(step);
            return result;
        }

        model.zero_grads();
        backward(loss);
        m.grad_norm_preclip = clip_gradients(model.params(), config.grad_clip);

        const double lr = m.lr;
        double wd = config.weight_decay;
        if (config.wd_cooldown && config.peak_lr > 0.0) {
            const std::int64_t cooldown_start = config.total_steps - config.cooldown_steps;
            if (step > cooldown_start) {
                wd = config.weight_decay * (lr / config.peak_lr);
            }
        }
        optimizer.step(model.params(), lr, wd);

        m.cast_overflow = ctx->cast_stats().total_overflow();
        m.cast_underflow = ctx->cast_stats().total_underflow();
        metrics.write(m);

        state.trailing_losses.push_back(loss_val);
        while (state.trailing_losses.size() > static_cast<std::size_t>(config.halt_window)) {
            state.trailing_losses.pop_front();
        }
        push_recent(loss_val);

        if (config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0 &&
            step < config.total_steps) {
            save_ckpt(step);
        }
    }

    metrics.flush();
    save_checkpoint(run_dir + "/ckpt_final.bin", config, model, optimizer, iterator, state);
    result.status = RunStatus::completed;
    result.smoothed_loss = recent_losses.empty()
                               ? result.final_loss
                               : std::accumulate(recent_losses.begin(), recent_losses.end(), 0.0) /
                                     static_cast<double>(recent_losses.size());
    return result;
}

}  // namespace fp8lab
