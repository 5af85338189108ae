#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dss/strcore.hpp"

namespace dss {

// Parameters of the synthetic generator with a configurable D/N ratio.
struct DnSpec {
    std::uint64_t n = 0;        // string count
    std::uint32_t len = 1;      // uniform string length, sentinel excluded
    double dn_ratio = 0.5;      // target D/N in [0, 1]
    std::uint32_t sigma = 255;  // alphabet size, characters 1..sigma
    std::uint64_t seed = 0;
};

// Generates n unique strings of length `len` whose measured D/N approaches
// dn_ratio. Strings are a unique block of ceil(dn_ratio * len) characters
// (drawn from a dense integer range, so sorted neighbors share almost the
// whole block) followed by a constant filler. Deterministic in the seed.
// Throws if n unique strings of the requested length cannot exist.
StringArena generate_dn(const DnSpec& spec);

enum class CorpusFormat { binary, text };

// Binary layout: magic "DSS1", u64-LE count, then per string a u32-LE length
// and the raw body bytes. Text: newline-delimited bodies.
void write_corpus(const StringArena& arena, const std::filesystem::path& path,
                  CorpusFormat format = CorpusFormat::binary);
StringArena read_corpus(const std::filesystem::path& path,
                        CorpusFormat format = CorpusFormat::binary);

// Ground truth for end-to-end tests: generic comparison sort, stable by
// original index, LCP array by pairwise recomputation.
SortedRun oracle_sort(const StringArena& arena, std::vector<std::uint64_t>* perm = nullptr);

// Measured D/N of an (unsorted) corpus, via oracle_sort and the
// distinguishing-prefix definition. Returns 0 for an empty corpus.
double measure_dn_ratio(const StringArena& arena);

} // namespace dss
