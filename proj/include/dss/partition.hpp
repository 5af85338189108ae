#pragma once

#include <cstdint>
#include <vector>

#include "dss/rquick.hpp"
#include "dss/simnet.hpp"
#include "dss/strcore.hpp"

namespace dss {

enum class SamplingMode { string_based, character_based };

// Regular sampling from locally sorted runs. The group draws exactly
// p'(v+1) samples in total: PE i draws ceil(units_i / w) - 1 evenly spaced
// samples with w = units' / (p'(v+1)), and the first PEs top up the
// remaining deficit. Samples carry (origin PE, origin sequence) ids for the
// splitter sort tie-break.
//
// String mode counts strings. Character mode counts characters; sampled
// positions shift back to the start of their string, repeated picks of one
// string collapse into a single sample carrying the string's local index as
// a disambiguation suffix.
std::vector<PeStrings> draw_samples_string(Machine& m, const std::vector<Group>& groups,
                                           const std::vector<const IndexedRun*>& runs,
                                           std::uint32_t v);
std::vector<PeStrings> draw_samples_character(Machine& m, const std::vector<Group>& groups,
                                              const std::vector<const IndexedRun*>& runs,
                                              std::uint32_t v);

// r-1 sorted splitter strings, identical on every PE of the group.
using SplitterSet = std::vector<std::vector<std::uint8_t>>;

// Sorts the samples with RQuick+ inside each group, picks every
// (|V|/r)-th sample by rank, and allgathers the choice. An empty group
// yields r-1 empty splitters; 0 < |V| < r is an error.
std::vector<SplitterSet> compute_splitters(Machine& m, const std::vector<Group>& groups,
                                           std::vector<PeStrings> samples, std::uint32_t r);

// Bucket boundaries: r+1 ascending cut points with bucket j spanning
// [bounds[j], bounds[j+1]) and holding { s | f_j < s <= f_{j+1} }.
std::vector<std::size_t> make_buckets(const SortedRun& run, const SplitterSet& splitters);

// One message of an exchange plan: strings [begin, end) of the sender's run
// travel to dst.
struct PlanEntry {
    std::uint32_t dst = 0;
    std::uint32_t bucket = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};
using MessagePlan = std::vector<PlanEntry>;

struct AssignmentResult {
    std::vector<MessagePlan> plans;                       // per PE
    std::vector<std::vector<std::uint64_t>> bucket_units; // per PE: global units per bucket
};

// Small/large balancing assignment: small buckets (<= units_j / (2 r p''))
// go round-robin to PE floor(t/r) of their group; large buckets are merged
// against residual receiver capacities, splitting each bucket over at most
// 3 receivers. With char_units the realized splits snap to string
// boundaries, so a receiver may overshoot its share by under max string
// length characters. Per PE the plan stays within 3r sends and receives.
AssignmentResult bounded_assignment(Machine& m, const std::vector<Group>& groups, std::uint32_t r,
                                    const std::vector<const IndexedRun*>& runs,
                                    const std::vector<std::vector<std::size_t>>& bounds,
                                    bool char_units);

// Row-wise assignment on the p'' x r grid: local rank i sends bucket j to
// PE j*p'' + (i mod p''); exactly r messages per PE.
std::vector<MessagePlan> grid_assignment(const std::vector<Group>& groups, std::uint32_t r,
                                         const std::vector<std::vector<std::size_t>>& bounds);

} // namespace dss
