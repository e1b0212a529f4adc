// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fp8lab {

namespace {

template <class T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw std::runtime_error("checkpoint: truncated file");
    }
    return v;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
    const auto n = get<std::uint64_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) {
        throw std::runtime_error("checkpoint: truncated string");
    }
    return s;
}

template <class Vec>
void put_floats(std::ofstream& out, const Vec& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

template <class Vec>
void get_floats_into(std::ifstream& in, Vec& v) {
    const auto n = get<std::uint64_t>(in);
    if (n != v.size()) {
        throw std::runtime_error("checkpoint: buffer size mismatch");
    }
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) {
        throw std::runtime_error("checkpoint: truncated buffer");
    }
}

void put_history(std::ofstream& out, const ScalingHistory& h) {
    put<std::uint8_t>(out, h.format().exponent_bits == 4 ? 0 : 1);
    put<std::int32_t>(out, h.capacity());
    put<std::int32_t>(out, h.margin());
    put<std::uint64_t>(out, h.size());
    for (double e : h.entries()) {
        put<double>(out, e);
    }
}

void get_history_into(std::ifstream& in, ScalingHistory& h) {
    const auto fmt = get<std::uint8_t>(in);
    const auto cap = get<std::int32_t>(in);
    const auto margin = get<std::int32_t>(in);
    const bool is_e4m3 = h.format().exponent_bits == 4;
    if ((fmt == 0) != is_e4m3 || cap != h.capacity() || margin != h.margin()) {
        throw std::runtime_error("checkpoint: scaling-history layout mismatch");
    }
    const auto n = get<std::uint64_t>(in);
    std::deque<double> entries;
    for (std::uint64_t i = 0; i < n; ++i) {
        entries.push_back(get<double>(in));
    }
    h.assign(std::move(entries));
}

void open_and_check_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, checkpoint_magic, 8) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const auto version = get<std::uint32_t>(in);
    if (version != checkpoint_version) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainConfig& config,
                     const Model<float>& model, const AdamW& optimizer,
                     const BatchIterator& iterator, const TrainerState& state) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open " + path);
    }
    out.write(checkpoint_magic, 8);
    put<std::uint32_t>(out, checkpoint_version);
    put_string(out, config.to_json());
    put<std::int64_t>(out, state.step);
    put<std::int64_t>(out, state.tokens);

    const auto& params = model.params();
    put<std::uint64_t>(out, params.size());
    for (const auto& p : params) {
        put_string(out, p.name);
        put_floats(out, p.tensor.data());
    }

    put<std::int64_t>(out, optimizer.step_count());
    put<std::uint64_t>(out, optimizer.first_moments().size());
    for (std::size_t i = 0; i < optimizer.first_moments().size(); ++i) {
        put_floats(out, optimizer.first_moments()[i]);
        put_floats(out, optimizer.second_moments()[i]);
    }

    const auto& roles = model.gemm_ctx_ptr()->roles();
    put<std::uint64_t>(out, roles.size());
    for (const auto& [name, rs] : roles) {
        put_string(out, name);
        put_history(out, rs.lhs_fwd);
        put_history(out, rs.rhs_fwd);
        put_history(out, rs.lhs_bwd);
        put_history(out, rs.rhs_bwd);
        put_history(out, rs.grad_out);
    }

    put<std::uint64_t>(out, iterator.epoch());
    put<std::uint64_t>(out, iterator.cursor());

    put<std::uint64_t>(out, state.trailing_losses.size());
    for (double l : state.trailing_losses) {
        put<double>(out, l);
    }
    if (!out) {
        throw std::runtime_error("checkpoint: write failed for " + path);
    }
}

TrainConfig read_checkpoint_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open " + path);
    }
    open_and_check_header(in, path);
    return TrainConfig::from_json(get_string(in));
}

TrainerState load_checkpoint(const std::string& path, Model<float>& model, AdamW& optimizer,
                             BatchIterator& iterator) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open " + path);
    }
    open_and_check_header(in, path);
    (void)get_string(in);  // config snapshot, already consumed by the caller

    TrainerState state;
    state.step = get<std::int64_t>(in);
    state.tokens = get<std::int64_t>(in);

    auto& params = model.params();
    const auto n_params = get<std::uint64_t>(in);
    if (n_params != params.size()) {
        throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    for (auto& p : params) {
        const std::string name = get_string(in);
        if (name != p.name) {
            throw std::runtime_error("checkpoint: parameter order mismatch at " + name);
        }
        get_floats_into(in, p.tensor.data());
    }

    optimizer.set_step_count(get<std::int64_t>(in));
    const auto n_moments = get<std::uint64_t>(in);
    auto& m = optimizer.first_moments();
    auto& v = optimizer.second_moments();
    m.resize(n_moments);
    v.resize(n_moments);
    for (std::size_t i = 0; i < n_moments; ++i) {
        if (i < params.size() && params[i].trainable) {
            m[i].resize(params[i].tensor.numel());
            v[i].resize(params[i].tensor.numel());
        }
        get_floats_into(in, m[i]);
        get_floats_into(in, v[i]);
    }

    auto& ctx = model.gemm_ctx();
    const auto n_roles = get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n_roles; ++i) {
        const std::string name = get_string(in);
        auto& rs = ctx.role_state(name);
        get_history_into(in, rs.lhs_fwd);
        get_history_into(in, rs.rhs_fwd);
        get_history_into(in, rs.lhs_bwd);
        get_history_into(in, rs.rhs_bwd);
        get_history_into(in, rs.grad_out);
    }

    const auto epoch = get<std::uint64_t>(in);
    const auto cursor = get<std::uint64_t>(in);
    iterator.restore(epoch, cursor);

    const auto n_losses = get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n_losses; ++i) {
        state.trailing_losses.push_back(get<double>(in));
    }
    return state;
}

}  // namespace fp8lab
