#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "dss/strcore.hpp"

namespace testutil {

// Reference sort: generic comparison sort, stable by original index, LCP by
// pairwise recomputation. Kept independent of the library sort paths.
inline dss::SortedRun reference_sort(const dss::StringArena& in,
                                     std::vector<std::uint32_t>* perm = nullptr) {
    std::vector<std::uint32_t> idx(in.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return dss::compare(in[a], in[b]) < 0;
    });
    dss::SortedRun out;
    out.lcp.resize(in.size(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.arena.push_back(in[idx[i]]);
        if (i > 0)
            out.lcp[i] = dss::lcp(in[idx[i - 1]], in[idx[i]]);
    }
    if (perm)
        *perm = idx;
    return out;
}

inline dss::StringArena random_arena(std::mt19937_64& rng, std::size_t n,
                                     std::size_t min_len = 1, std::size_t max_len = 12,
                                     std::uint8_t sigma = 4) {
    dss::StringArena a;
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    std::uniform_int_distribution<int> char_dist(1, sigma);
    std::vector<std::uint8_t> buf;
    for (std::size_t i = 0; i < n; ++i) {
        buf.resize(len_dist(rng));
        for (auto& c : buf)
            c = static_cast<std::uint8_t>(char_dist(rng));
        a.push_back(dss::Bytes{buf.data(), buf.size()});
    }
    return a;
}

inline dss::StringArena arena_of(std::initializer_list<const char*> strings) {
    dss::StringArena a;
    for (const char* s : strings)
        a.push_back(std::string_view{s});
    return a;
}

inline std::vector<std::string> to_strings(const dss::StringArena& a) {
    std::vector<std::string> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        dss::Bytes b = a[i];
        out.emplace_back(reinterpret_cast<const char*>(b.data()), b.size());
    }
    return out;
}

// Multiset equality of string bodies.
inline bool same_multiset(const dss::StringArena& a, const dss::StringArena& b) {
    auto sa = to_strings(a);
    auto sb = to_strings(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return sa == sb;
}

} // namespace testutil
