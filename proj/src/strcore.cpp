#include "dss/strcore.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <stdexcept>

namespace dss {

void StringArena::reserve(std::size_t strings, std::size_t chars) {
    offsets_.reserve(strings);
    chars_.reserve(chars + strings);
}

void StringArena::push_back(Bytes s) {
    if (s.empty())
        throw std::invalid_argument("StringArena: empty string");
    if (s.size() > 0xffffffffull - 1)
        throw std::invalid_argument("StringArena: string exceeds 32-bit length");
    for (std::uint8_t c : s)
        if (c == 0)
            throw std::invalid_argument("StringArena: embedded 0 byte");
    offsets_.push_back(chars_.size());
    chars_.insert(chars_.end(), s.begin(), s.end());
    chars_.push_back(0);
}

void StringArena::push_back(std::string_view s) {
    push_back(Bytes{reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::uint32_t StringArena::max_length() const {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < size(); ++i)
        m = std::max(m, length(i));
    return m;
}

std::uint32_t lcp(Bytes a, Bytes b) {
    std::size_t n = std::min(a.size(), b.size());
    std::size_t i = 0;
    while (i < n && a[i] == b[i])
        ++i;
    return static_cast<std::uint32_t>(i);
}

int compare(Bytes a, Bytes b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] != b[i])
            return a[i] < b[i] ? -1 : 1;
    }
    if (a.size() == b.size())
        return 0;
    return a.size() < b.size() ? -1 : 1;
}

bool validate_run(const SortedRun& run) {
    if (run.lcp.size() != run.arena.size())
        return false;
    if (!run.lcp.empty() && run.lcp[0] != 0)
        return false;
    for (std::size_t i = 1; i < run.arena.size(); ++i) {
        Bytes prev = run.arena[i - 1];
        Bytes cur = run.arena[i];
        if (less(cur, prev))
            return false;
        if (run.lcp[i] != lcp(prev, cur))
            return false;
    }
    return true;
}

namespace {

struct MkItem {
    const std::uint8_t* s;
    std::uint64_t key;
};

// Compare suffixes from `depth`; sentinel 0 orders string ends first. Equal
// strings resolve by key.
bool mk_less(const MkItem& a, const MkItem& b, std::size_t depth) {
    const std::uint8_t* x = a.s + depth;
    const std::uint8_t* y = b.s + depth;
    while (*x == *y && *x != 0) {
        ++x;
        ++y;
    }
    if (*x != *y)
        return *x < *y;
    return a.key < b.key;
}

std::uint32_t suffix_lcp(const MkItem& a, const MkItem& b, std::size_t depth) {
    const std::uint8_t* x = a.s + depth;
    const std::uint8_t* y = b.s + depth;
    while (*x == *y && *x != 0) {
        ++x;
        ++y;
    }
    return static_cast<std::uint32_t>(depth + (x - (a.s + depth)));
}

void insertion_sort(MkItem* a, std::size_t n, std::uint32_t* lcps, std::size_t depth) {
    for (std::size_t i = 1; i < n; ++i) {
        MkItem item = a[i];
        std::size_t j = i;
        while (j > 0 && mk_less(item, a[j - 1], depth)) {
            a[j] = a[j - 1];
            --j;
        }
        a[j] = item;
    }
    for (std::size_t i = 1; i < n; ++i)
        lcps[i] = suffix_lcp(a[i - 1], a[i], depth);
}

std::uint8_t median3(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    if (a > b)
        std::swap(a, b);
    if (b > c)
        std::swap(b, c);
    return std::max(a, b);
}

constexpr std::size_t kInsertionThreshold = 32;

// Ternary quicksort on the character at `depth`. Partition boundaries emit
// the LCP value `depth` directly; the all-equal partition descends one
// character in a loop.
void mkqs(MkItem* a, std::size_t n, std::uint32_t* lcps, std::size_t depth) {
    for (;;) {
        if (n < kInsertionThreshold) {
            insertion_sort(a, n, lcps, depth);
            return;
        }
        std::uint8_t pivot = median3(a[0].s[depth], a[n / 2].s[depth], a[n - 1].s[depth]);
        // Dutch-flag partition into <, ==, > of the depth character.
        std::size_t lo = 0, mid = 0, hi = n;
        while (mid < hi) {
            std::uint8_t c = a[mid].s[depth];
            if (c < pivot)
                std::swap(a[lo++], a[mid++]);
            else if (c > pivot)
                std::swap(a[mid], a[--hi]);
            else
                ++mid;
        }
        std::size_t lt = lo, eq = mid - lo;
        if (lt > 0) {
            mkqs(a, lt, lcps, depth);
            lcps[lt] = static_cast<std::uint32_t>(depth);
        }
        if (mid < n) {
            lcps[mid] = static_cast<std::uint32_t>(depth);
            mkqs(a + mid, n - mid, lcps + mid, depth);
        }
        if (pivot == 0) {
            // All strings in the equal partition end here: identical bodies.
            std::sort(a + lt, a + mid, [](const MkItem& x, const MkItem& y) {
                return x.key < y.key;
            });
            for (std::size_t i = 1; i < eq; ++i)
                lcps[lt + i] = static_cast<std::uint32_t>(depth);
            return;
        }
        a += lt;
        lcps += lt;
        n = eq;
        ++depth;
    }
}

SortedRun sort_items(const StringArena& input, std::vector<MkItem>& items) {
    std::vector<std::uint32_t> lcps(items.size(), 0);
    if (!items.empty())
        mkqs(items.data(), items.size(), lcps.data(), 0);

    SortedRun out;
    out.arena.reserve(input.size(), input.char_count());
    for (const MkItem& item : items) {
        std::size_t len = 0;
        while (item.s[len] != 0)
            ++len;
        out.arena.push_back(Bytes{item.s, len});
    }
    out.lcp = std::move(lcps);
    return out;
}

} // namespace

SortedRun local_sort(const StringArena& input, std::vector<std::uint32_t>* perm) {
    std::vector<MkItem> items(input.size());
    for (std::size_t i = 0; i < input.size(); ++i)
        items[i] = MkItem{input.c_str(i), i};
    SortedRun out = sort_items(input, items);
    if (perm) {
        perm->resize(items.size());
        for (std::size_t i = 0; i < items.size(); ++i)
            (*perm)[i] = static_cast<std::uint32_t>(items[i].key);
    }
    return out;
}

IndexedRun local_sort_indexed(const StringArena& input, std::vector<std::uint64_t> ids) {
    if (ids.size() != input.size())
        throw std::invalid_argument("local_sort_indexed: id count mismatch");
    std::vector<MkItem> items(input.size());
    for (std::size_t i = 0; i < input.size(); ++i)
        items[i] = MkItem{input.c_str(i), ids[i]};
    IndexedRun out;
    out.run = sort_items(input, items);
    out.ids.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        out.ids[i] = items[i].key;
    return out;
}

namespace {

// LCP loser tree. Every stream's current head carries its LCP against the
// string extracted last; stored losers carry their LCP against the winner
// that defeated them. Both references coincide along the replay path, so a
// comparison either decides on LCP values alone or extends a shared prefix.
class LoserTree {
public:
    struct Stream {
        const SortedRun* run = nullptr;
        const std::vector<std::uint64_t>* ids = nullptr;
        std::size_t pos = 0;
    };

    LoserTree(std::vector<Stream> streams, bool tie_by_id)
        : streams_(std::move(streams)), tie_by_id_(tie_by_id) {
        k_ = streams_.size();
        width_ = std::max<std::size_t>(1, std::bit_ceil(k_));
        loser_.assign(width_, -1);
        curlcp_.assign(k_, 0);
        root_ = build(1);
    }

    bool done() const { return root_ < 0 || exhausted(root_); }

    // Extracts the minimum; appends to out. Returns the stream it came from.
    void pop(StringArena& arena, std::vector<std::uint32_t>& lcps,
             std::vector<std::uint64_t>* ids_out) {
        int w = root_;
        const Stream& st = streams_[w];
        Bytes s = st.run->arena[st.pos];
        arena.push_back(s);
        lcps.push_back(curlcp_[w]);
        if (ids_out)
            ids_out->push_back(st.ids ? (*st.ids)[st.pos] : 0);
        advance(w);
        root_ = replay(w);
    }

private:
    bool exhausted(int s) const {
        return s >= static_cast<int>(k_) || streams_[s].pos >= streams_[s].run->size();
    }

    void advance(int s) {
        Stream& st = streams_[s];
        ++st.pos;
        curlcp_[s] = exhausted(s) ? 0 : st.run->lcp[st.pos];
    }

    std::uint64_t tie_key(int s) const {
        const Stream& st = streams_[s];
        return tie_by_id_ ? (*st.ids)[st.pos] : static_cast<std::uint64_t>(s);
    }

    // Returns the winning stream; updates the loser's lcp to its lcp with
    // the winner.
    int duel(int a, int b) {
        if (exhausted(b))
            return exhausted(a) ? std::min(a, b) : a;
        if (exhausted(a))
            return b;
        std::uint32_t ha = curlcp_[a], hb = curlcp_[b];
        if (ha != hb)
            return ha > hb ? a : b;
        const std::uint8_t* x = streams_[a].run->arena.c_str(streams_[a].pos) + ha;
        const std::uint8_t* y = streams_[b].run->arena.c_str(streams_[b].pos) + ha;
        std::uint32_t h = ha;
        while (*x == *y && *x != 0) {
            ++x;
            ++y;
            ++h;
        }
        int winner;
        if (*x != *y)
            winner = *x < *y ? a : b;
        else
            winner = tie_key(a) < tie_key(b) ? a : b;
        curlcp_[winner == a ? b : a] = h;
        return winner;
    }

    int build(std::size_t node) {
        if (node >= width_) {
            std::size_t leaf = node - width_;
            return leaf < k_ ? static_cast<int>(leaf) : static_cast<int>(k_);
        }
        int a = build(2 * node);
        int b = build(2 * node + 1);
        int w = duel(a, b);
        loser_[node] = (w == a) ? b : a;
        return w;
    }

    int replay(int x) {
        for (std::size_t v = (width_ + x) / 2; v >= 1; v /= 2) {
            int w = duel(x, loser_[v]);
            if (w != x) {
                loser_[v] = x;
                x = w;
            }
        }
        return x;
    }

    std::vector<Stream> streams_;
    bool tie_by_id_;
    std::size_t k_ = 0, width_ = 0;
    std::vector<int> loser_;
    std::vector<std::uint32_t> curlcp_;
    int root_ = -1;
};

} // namespace

SortedRun losertree_merge(std::span<const SortedRun> runs) {
    std::vector<LoserTree::Stream> streams(runs.size());
    std::size_t total = 0, chars = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        streams[i].run = &runs[i];
        total += runs[i].size();
        chars += runs[i].arena.char_count();
    }
    SortedRun out;
    out.arena.reserve(total, chars);
    out.lcp.reserve(total);
    if (total == 0)
        return out;
    LoserTree tree(std::move(streams), false);
    while (!tree.done())
        tree.pop(out.arena, out.lcp, nullptr);
    return out;
}

IndexedRun losertree_merge_indexed(std::span<const IndexedRun> runs) {
    std::vector<LoserTree::Stream> streams(runs.size());
    std::size_t total = 0, chars = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        streams[i].run = &runs[i].run;
        streams[i].ids = &runs[i].ids;
        total += runs[i].size();
        chars += runs[i].run.arena.char_count();
    }
    IndexedRun out;
    out.run.arena.reserve(total, chars);
    out.run.lcp.reserve(total);
    out.ids.reserve(total);
    if (total == 0)
        return out;
    LoserTree tree(std::move(streams), true);
    while (!tree.done())
        tree.pop(out.run.arena, out.run.lcp, &out.ids);
    return out;
}

CompressedRun lcp_compress(const SortedRun& run) {
    CompressedRun c;
    c.lcp_len = run.lcp;
    c.suffixes.reserve(run.arena.char_count() + run.size());
    for (std::size_t i = 0; i < run.size(); ++i) {
        Bytes s = run.arena[i];
        std::uint32_t skip = (i == 0) ? 0 : run.lcp[i];
        c.suffixes.insert(c.suffixes.end(), s.begin() + skip, s.end());
        c.suffixes.push_back(0);
    }
    return c;
}

SortedRun lcp_decompress(const CompressedRun& c) {
    SortedRun out;
    out.lcp = c.lcp_len;
    if (!c.lcp_len.empty() && c.lcp_len[0] != 0)
        throw std::invalid_argument("lcp_decompress: lcp_len[0] must be 0");
    std::vector<std::uint8_t> prev;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < c.lcp_len.size(); ++i) {
        std::size_t begin = cursor;
        while (cursor < c.suffixes.size() && c.suffixes[cursor] != 0)
            ++cursor;
        if (cursor >= c.suffixes.size())
            throw std::invalid_argument("lcp_decompress: truncated suffix data");
        std::uint32_t keep = c.lcp_len[i];
        if (keep > prev.size())
            throw std::invalid_argument("lcp_decompress: lcp_len exceeds predecessor");
        prev.resize(keep);
        prev.insert(prev.end(), c.suffixes.begin() + begin, c.suffixes.begin() + cursor);
        ++cursor; // sentinel
        out.arena.push_back(Bytes{prev.data(), prev.size()});
    }
    if (cursor != c.suffixes.size())
        throw std::invalid_argument("lcp_decompress: trailing suffix data");
    return out;
}

DistPrefixes distinguishing_prefixes(const SortedRun& run) {
    DistPrefixes out;
    std::size_t n = run.size();
    out.d.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t left = (i > 0) ? run.lcp[i] : 0;
        std::uint32_t right = (i + 1 < n) ? run.lcp[i + 1] : 0;
        std::uint32_t d = std::min(run.arena.length(i), 1 + std::max(left, right));
        out.d[i] = d;
        out.total += d;
        out.longest = std::max(out.longest, d);
    }
    return out;
}

} // namespace dss
