#pragma once

#include <cstdint>
#include <vector>

#include "dss/partition.hpp"
#include "dss/rquick.hpp"
#include "dss/simnet.hpp"
#include "dss/strcore.hpp"

namespace dss {

enum class AssignmentMode { grid, bounded };

struct MsConfig {
    std::vector<std::uint32_t> schedule; // split factors r_1..r_k, product = p
    SamplingMode sampling = SamplingMode::string_based;
    std::uint32_t sampling_factor = 0; // v; 0 selects the default 2*k*r_t
    AssignmentMode assignment = AssignmentMode::grid;
    bool lcp_compression = false;

    std::uint32_t levels() const { return static_cast<std::uint32_t>(schedule.size()); }
};

// Observed per-level maxima next to the parameters the sampling bounds are
// stated in.
struct LevelStats {
    std::uint32_t split = 0;           // r_t
    std::uint32_t sampling_factor = 0; // v used on this level
    std::uint64_t max_bucket_strings = 0;
    std::uint64_t max_bucket_chars = 0;
    std::uint64_t max_pe_strings = 0; // after the level's merge
    std::uint64_t max_pe_chars = 0;
};

struct MsReport {
    std::uint64_t total_strings = 0;
    std::uint64_t total_chars = 0;
    std::uint32_t max_length = 0;
    std::vector<LevelStats> levels;
};

// Multi-level merge sort: local sort, then per level distributed
// partitioning, string assignment/exchange, and LCP-aware merging. The
// output concatenated over PE order is the (bytes, id)-sorted input.
// Ledger phases: ms.init_sort, ms.partition.t, ms.assign.t, ms.exchange.t,
// ms.merge.t.
std::vector<IndexedRun> ms_sort(Machine& m, std::vector<PeStrings> input, const MsConfig& cfg,
                                MsReport* report = nullptr);

// Same pipeline entered with already sorted runs (used by the prefix
// doubling driver, which sorts locally before approximating prefixes).
std::vector<IndexedRun> ms_sort_runs(Machine& m, std::vector<IndexedRun> runs,
                                     const MsConfig& cfg, MsReport* report = nullptr);

} // namespace dss
