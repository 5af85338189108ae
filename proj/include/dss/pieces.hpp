#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dss/strcore.hpp"

namespace dss {

// Wire format for a contiguous slice of an IndexedRun, as exchanged between
// PEs: ids always travel with the strings, LCP values optionally, and the
// character payload is either raw 0-terminated bodies or an LCP-compressed
// suffix stream relative to the slice.
struct PieceLayout {
    bool with_lcp = true;
    bool compressed = false;
};

std::vector<std::uint8_t> encode_piece(const IndexedRun& run, std::size_t begin, std::size_t end,
                                       PieceLayout layout);

// Decoded slice; lcp is recomputed pairwise when it did not travel.
IndexedRun decode_piece(std::span<const std::uint8_t> bytes);

// Copies [begin, end) of a run; the first LCP entry of the slice becomes 0.
IndexedRun slice_run(const IndexedRun& run, std::size_t begin, std::size_t end);

} // namespace dss
