// SPDX-License-Identifier: Apache-2.0
//
// Byte-level corpus and deterministic batch packing. The byte stream is cut
// into windows of context+1 bytes (input plus next-byte targets); window
// order is a per-epoch permutation derived from (seed, epoch), so iterator
// state is fully captured by the pair (epoch, cursor).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fp8lab {

// 256 byte values plus one reserved special id (unused by the packer).
inline constexpr int byte_vocab_size = 257;

class ByteCorpus {
public:
    // Throws std::runtime_error if the file is unreadable or shorter than
    // one context window (context+1 bytes).
    static ByteCorpus load(const std::string& path, int context);

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::size_t size_bytes() const { return bytes_.size(); }
    std::int64_t window_count(int context) const {
        return static_cast<std::int64_t>((bytes_.size() - 1) / static_cast<std::size_t>(context));
    }

private:
    std::vector<std::uint8_t> bytes_;
};

struct Batch {
    std::vector<std::int32_t> inputs;   // batch * context
    std::vector<std::int32_t> targets;  // batch * context, shifted by one byte
};

class BatchIterator {
public:
    BatchIterator(const ByteCorpus& corpus, int context, int batch, std::uint64_t seed);

    Batch next();

    std::uint64_t epoch() const { return epoch_; }
    std::uint64_t cursor() const { return cursor_; }  // windows consumed this epoch
    void restore(std::uint64_t epoch, std::uint64_t cursor);

private:
    void reshuffle();

    const ByteCorpus* corpus_;
    int context_;
    int batch_;
    std::uint64_t seed_;
    std::uint64_t epoch_ = 0;
    std::uint64_t cursor_ = 0;
    std::vector<std::int64_t> order_;  // window permutation of the current epoch
};

}  // namespace fp8lab
