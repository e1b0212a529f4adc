// SPDX-License-Identifier: Apache-2.0

#include "fp8lab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

namespace fp8lab {

ByteCorpus ByteCorpus::load(const std::string& path, int context) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("corpus: cannot open " + path);
    }
    ByteCorpus c;
    in.seekg(0, std::ios::end);
    const auto len = in.tellg();
    in.seekg(0, std::ios::beg);
    c.bytes_.resize(static_cast<std::size_t>(len));
    if (len > 0) {
        in.read(reinterpret_cast<char*>(c.bytes_.data()), len);
    }
    if (!in) {
        throw std::runtime_error("corpus: failed reading " + path);
    }
    if (c.bytes_.size() < static_cast<std::size_t>(context) + 1) {
        throw std::runtime_error("corpus: file shorter than one context window: " + path);
    }
    return c;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
}  // namespace

BatchIterator::BatchIterator(const ByteCorpus& corpus, int context, int batch, std::uint64_t seed)
    : corpus_(&corpus), context_(context), batch_(batch), seed_(seed) {
    if (corpus.window_count(context) < batch) {
        throw std::runtime_error("corpus: not enough windows for one batch");
    }
    reshuffle();
}

void BatchIterator::reshuffle() {
    const std::int64_t n = corpus_->window_count(context_);
    order_.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(splitmix64(seed_ ^ splitmix64(epoch_)));
    std::shuffle(order_.begin(), order_.end(), rng);
}

Batch BatchIterator::next() {
    if (cursor_ + static_cast<std::uint64_t>(batch_) > order_.size()) {
        ++epoch_;
        cursor_ = 0;
        reshuffle();
    }
    Batch b;
    b.inputs.resize(static_cast<std::size_t>(batch_) * context_);
    b.targets.resize(static_cast<std::size_t>(batch_) * context_);
    const auto& bytes = corpus_->bytes();
    for (int r = 0; r < batch_; ++r) {
        const std::int64_t w = order_[static_cast<std::size_t>(cursor_ + r)];
        const std::size_t start = static_cast<std::size_t>(w) * context_;
        for (int t = 0; t < context_; ++t) {
            b.inputs[static_cast<std::size_t>(r) * context_ + t] = bytes[start + t];
            b.targets[static_cast<std::size_t>(r) * context_ + t] = bytes[start + t + 1];
        }
    }
    cursor_ += static_cast<std::uint64_t>(batch_);
    return b;
}

void BatchIterator::restore(std::uint64_t epoch, std::uint64_t cursor) {
    epoch_ = epoch;
    cursor_ = cursor;
    reshuffle();
}

}  // namespace fp8lab
