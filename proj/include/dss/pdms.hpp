#pragma once

#include <cstdint>
#include <vector>

#include "dss/bloom.hpp"
#include "dss/msort.hpp"
#include "dss/simnet.hpp"
#include "dss/strcore.hpp"

namespace dss {

// A reduced hash position paired with the item's unique global index.
struct DedupPair {
    std::uint64_t hash = 0;
    std::uint64_t index = 0;
};

// Distributed duplicate detection by sorting: the pairs are ordered with an
// atomic hypercube quicksort while every exchange records the ids it moved;
// a neighbor scan plus two boundary messages marks equal-hash runs, and the
// flags retrace the recorded route as one bit per pair.
std::vector<std::vector<bool>> dedup_by_sorting(Machine& m,
                                                const std::vector<std::vector<DedupPair>>& pairs);

struct PdConfig {
    std::vector<std::uint32_t> bloom_dims; // grid for the filter rounds
    std::uint64_t hash_seed = 0;
    // Active count below which rounds switch to dedup_by_sorting;
    // 0 selects k^2 * p^(1+1/k) * ceil(log2 p).
    std::uint64_t switch_threshold = 0;
    std::uint32_t init_len = 0;  // 0 derives the power-of-two default
    double filter_scale = 2.718281828459045; // m = ceil(scale * active)
};

struct DoublingStats {
    std::uint32_t rounds = 0;
    std::uint32_t switch_round = 0; // first sorting-based round, 0 if none
    std::vector<std::uint64_t> active_per_round;
    std::uint64_t approx_total = 0; // sum of all final approximations
};

// Iteratively tests geometrically growing prefixes for global uniqueness.
// Returns, per PE, the approximated distinguishing prefix length of every
// string, aligned with the run order. Guarantees d~(s) >= d(s): a false
// positive only lengthens the tested prefix. Exact duplicate strings
// finalize at full length; with error_on_duplicates they raise instead
// (named by a colliding pair) after an exact confirmation.
std::vector<std::vector<std::uint32_t>> approximate_dist_prefixes(
    Machine& m, const std::vector<IndexedRun>& runs, const PdConfig& cfg,
    DoublingStats* stats = nullptr, bool error_on_duplicates = false);

struct PdmsResult {
    std::vector<IndexedRun> runs;   // sorted truncated-prefix runs
    std::vector<std::uint64_t> permutation; // rank -> original global index
    DoublingStats doubling;
    MsReport ms_report;
};

// Prefix-doubling merge sort: approximates distinguishing prefixes, then
// runs the multi-level merge sort on the truncated strings with the global
// index as tie-break. The returned permutation equals a stable full-string
// sort's permutation.
PdmsResult pdms_sort(Machine& m, std::vector<PeStrings> input, const MsConfig& ms_cfg,
                     const PdConfig& pd_cfg);

} // namespace dss
