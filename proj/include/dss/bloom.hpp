#pragma once

#include <cstdint>
#include <vector>

#include "dss/simnet.hpp"
#include "dss/strcore.hpp"

namespace dss {

// Elias-Fano coding of a strictly ascending sequence of values below a
// universe. Encoded size is at most x*(log2(u/x) + 2) + kEfHeaderBits bits.
struct EliasFanoBlock {
    std::uint64_t count = 0;
    std::uint64_t universe = 0;
    std::uint8_t low_width = 0;
    std::vector<std::uint8_t> bits;

    std::uint64_t payload_bits = 0;
    std::uint64_t bit_size() const;

    std::vector<std::uint8_t> serialize() const;
    static EliasFanoBlock deserialize(std::span<const std::uint8_t> buf);
};

inline constexpr std::uint64_t kEfHeaderBits = 136; // count + universe + width

EliasFanoBlock ef_encode(const std::vector<std::uint64_t>& values, std::uint64_t universe);
std::vector<std::uint64_t> ef_decode(const EliasFanoBlock& block);

// Distributed single-shot Bloom filter batch: positions in [0, m) live on
// owner PE floor(pos * p / m), reached over a k-dimensional grid with one
// coordinate fixed per hop. Forwarded position lists are deduplicated per
// hop; answers travel the reverse route as one bit per forwarded position,
// OR-ed with each junction's own fan-in knowledge, so a duplicate never
// goes unnoticed.
struct DsbfConfig {
    std::uint64_t m = 1;              // filter size (positions)
    std::vector<std::uint32_t> dims;  // grid factors, product = p
};

// One insert-and-query round: flags[pe][i] tells whether item i of PE pe
// possibly collides with any other item of the batch.
std::vector<std::vector<bool>> dsbf_round(Machine& m, const DsbfConfig& cfg,
                                          const std::vector<std::vector<std::uint64_t>>& items);

// Measured false-positive rate: n globally distinct keys are hashed to
// [0, m_size) and run through one filter round; the returned fraction was
// flagged duplicate despite being unique.
double fp_rate_estimate(std::uint32_t p, const std::vector<std::uint32_t>& dims, std::uint64_t n,
                        std::uint64_t m_size, std::uint64_t seed);

// Seedable mixing hash over bytes and its reduction to [0, m).
std::uint64_t hash_bytes(Bytes data, std::uint64_t seed);
std::uint64_t hash_u64(std::uint64_t x, std::uint64_t seed);
std::uint64_t reduce_to_range(std::uint64_t h, std::uint64_t m);

} // namespace dss
