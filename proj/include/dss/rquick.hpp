#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dss/simnet.hpp"
#include "dss/strcore.hpp"

namespace dss {

// Per-PE input of the distributed sorters: strings with unique 64-bit ids.
// The (bytes, id) pair is the total order being sorted.
struct PeStrings {
    StringArena arena;
    std::vector<std::uint64_t> ids;
};

// A string with its id, used for pivots and medians.
struct Pivot {
    std::vector<std::uint8_t> chars;
    std::uint64_t id = 0;
};

// Median-of-medians pivot selection: every group member contributes its
// local median (or abstains), the gathered medians are ordered by
// (bytes, id) and the middle one wins; all group members agree.
std::vector<std::optional<Pivot>> pivot_select(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::optional<Pivot>>& local_medians);

// The random permutation step: every string moves to a uniformly drawn PE
// of its group's 2^floor(log2 size) cube; PEs outside the cube fold their
// data in first.
std::vector<PeStrings> rquick_shuffle(Machine& m, const std::vector<Group>& groups,
                                      std::vector<PeStrings> input);

// String hypercube quicksort within each group: fold-in to the largest
// power-of-two sub-cube, random shuffle, local sort, one partition round per
// cube dimension, then an even redistribution over the whole group. With
// `plus` the local phases are LCP-aware (multikey quicksort and loser-tree
// merging); without it they are plain comparison sorting and merging. Both
// flavors produce identical output for identical seeds.
std::vector<IndexedRun> rquick_sort(Machine& m, const std::vector<Group>& groups,
                                    std::vector<PeStrings> input, bool plus);

inline std::vector<IndexedRun> rquick_sort(Machine& m, std::vector<PeStrings> input, bool plus) {
    return rquick_sort(m, {Group{0, m.p()}}, std::move(input), plus);
}

} // namespace dss
