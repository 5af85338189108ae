#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dss {

using Bytes = std::span<const std::uint8_t>;

// Contiguous character storage for a set of strings. Bodies consist of
// alphabet characters 1..255; each body is followed by a 0 sentinel in the
// backing array. Bodies are never empty and never contain a 0 byte.
class StringArena {
public:
    StringArena() = default;

    void reserve(std::size_t strings, std::size_t chars);
    // Appends a copy of `s` (body only, no sentinel). Throws on empty body
    // or embedded 0 byte.
    void push_back(Bytes s);
    void push_back(std::string_view s);

    std::size_t size() const { return offsets_.size(); }
    bool empty() const { return offsets_.empty(); }
    // Total characters N, sentinels excluded.
    std::uint64_t char_count() const { return chars_.size() - offsets_.size(); }

    Bytes operator[](std::size_t i) const {
        return Bytes{chars_.data() + offsets_[i], length(i)};
    }
    // 0-terminated body pointer.
    const std::uint8_t* c_str(std::size_t i) const { return chars_.data() + offsets_[i]; }
    std::uint32_t length(std::size_t i) const {
        std::uint64_t end = (i + 1 < offsets_.size()) ? offsets_[i + 1] : chars_.size();
        return static_cast<std::uint32_t>(end - offsets_[i] - 1);
    }
    std::uint32_t max_length() const;

    bool operator==(const StringArena& other) const {
        return chars_ == other.chars_ && offsets_ == other.offsets_;
    }

private:
    std::vector<std::uint8_t> chars_;
    std::vector<std::uint64_t> offsets_;
};

// Number of leading equal characters of two strings.
std::uint32_t lcp(Bytes a, Bytes b);

// Lexicographic byte comparison; a shorter string precedes its extensions.
int compare(Bytes a, Bytes b);
inline bool less(Bytes a, Bytes b) { return compare(a, b) < 0; }
inline bool leq(Bytes a, Bytes b) { return compare(a, b) <= 0; }

// A lexicographically non-descending string sequence with its LCP array
// (lcp[0] == 0, lcp[i] == lcp(s_{i-1}, s_i)).
struct SortedRun {
    StringArena arena;
    std::vector<std::uint32_t> lcp;

    std::size_t size() const { return arena.size(); }
};

// A sorted run whose strings carry 64-bit identifiers. Comparisons in the
// distributed sorters are on (bytes, id), so ids double as the stable
// tie-break and as the permutation payload.
struct IndexedRun {
    SortedRun run;
    std::vector<std::uint64_t> ids;

    std::size_t size() const { return run.size(); }
};

// Checks the LCP array against pairwise recomputation and sortedness.
bool validate_run(const SortedRun& run);

// Multikey quicksort with LCP emission; ties resolved by original index so
// the result is a stable permutation. The witness (original index of every
// output position) is written to `perm` when given.
SortedRun local_sort(const StringArena& input, std::vector<std::uint32_t>* perm = nullptr);
// Same, but ties resolve by the supplied ids, which travel with the strings.
IndexedRun local_sort_indexed(const StringArena& input, std::vector<std::uint64_t> ids);

// r-way LCP loser-tree merge. Ties break by input-run index, so equal
// strings appear in run order.
SortedRun losertree_merge(std::span<const SortedRun> runs);
// Indexed flavor; ties break by string id.
IndexedRun losertree_merge_indexed(std::span<const IndexedRun> runs);

// Sorted run encoded with every shared neighbor prefix removed once.
struct CompressedRun {
    std::vector<std::uint32_t> lcp_len;
    std::vector<std::uint8_t> suffixes; // one 0-terminated suffix per string

    std::size_t size() const { return lcp_len.size(); }
    // Character payload, sentinels excluded; equals N - sum(lcp).
    std::uint64_t payload_chars() const { return suffixes.size() - lcp_len.size(); }
};

CompressedRun lcp_compress(const SortedRun& run);
// Throws if any lcp_len exceeds the reconstructed predecessor's length.
SortedRun lcp_decompress(const CompressedRun& c);

// Distinguishing prefix lengths of a globally sorted run:
// d(s_i) = min(|s_i|, 1 + max(lcp[i], lcp[i+1])), missing neighbors count 0.
struct DistPrefixes {
    std::vector<std::uint32_t> d;
    std::uint64_t total = 0;  // D
    std::uint32_t longest = 0; // max d(s)
};

DistPrefixes distinguishing_prefixes(const SortedRun& run);

} // namespace dss
