// SPDX-License-Identifier: Apache-2.0
//
// Deterministic test fixtures: a word-like synthetic corpus generator and a
// scratch directory helper.

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace fp8lab::testing {

// Pseudo-text with word/sentence structure, deterministic for a seed.
inline std::string synthetic_text(std::size_t min_bytes, std::uint64_t seed) {
    static const char* const words[] = {
        "gradient", "tensor",  "scale",   "history", "outlier", "kernel", "residual",
        "attention", "softmax", "entropy", "block",   "layer",   "token",  "stream",
        "margin",    "window",  "cooldown", "steady",  "warmup",  "probe",  "metric",
        "stable",    "matrix",  "product", "quantize", "format",  "range",  "value"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> word(0, std::size(words) - 1);
    std::uniform_int_distribution<int> sentence_len(4, 12);
    std::string text;
    text.reserve(min_bytes + 128);
    while (text.size() < min_bytes) {
        const int n = sentence_len(rng);
        for (int i = 0; i < n; ++i) {
            std::string w = words[word(rng)];
            if (i == 0) {
                w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            }
            text += w;
            text += i + 1 == n ? ". " : " ";
        }
        if ((text.size() & 0x3FF) < 32) {
            text += '\n';
        }
    }
    return text;
}

inline std::string write_corpus(const std::filesystem::path& path, std::size_t min_bytes,
                                std::uint64_t seed) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << synthetic_text(min_bytes, seed);
    return path.string();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "fp8lab_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fp8lab::testing
