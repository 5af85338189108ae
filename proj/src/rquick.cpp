#include "dss/rquick.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "dss/pieces.hpp"

namespace dss {

namespace {

bool pair_leq(Bytes s, std::uint64_t id, const Pivot& pv) {
    int c = compare(s, Bytes{pv.chars.data(), pv.chars.size()});
    if (c != 0)
        return c < 0;
    return id <= pv.id;
}

// First index whose (bytes, id) exceeds the pivot.
std::size_t split_point(const IndexedRun& run, const Pivot& pv) {
    std::size_t lo = 0, hi = run.size();
    while (lo < hi) {
        std::size_t mid = lo + (hi - lo) / 2;
        if (pair_leq(run.run.arena[mid], run.ids[mid], pv))
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

IndexedRun sort_local(PeStrings&& in, bool plus) {
    if (plus)
        return local_sort_indexed(in.arena, std::move(in.ids));
    // Plain flavor: generic comparison sort.
    std::vector<std::uint32_t> idx(in.arena.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        int c = compare(in.arena[a], in.arena[b]);
        if (c != 0)
            return c < 0;
        return in.ids[a] < in.ids[b];
    });
    IndexedRun out;
    out.run.lcp.assign(idx.size(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.run.arena.push_back(in.arena[idx[i]]);
        out.ids.push_back(in.ids[idx[i]]);
        if (i > 0)
            out.run.lcp[i] = lcp(out.run.arena[i - 1], out.run.arena[i]);
    }
    return out;
}

IndexedRun merge_two(IndexedRun&& a, IndexedRun&& b, bool plus) {
    if (a.size() == 0)
        return std::move(b);
    if (b.size() == 0)
        return std::move(a);
    if (plus) {
        IndexedRun runs[2] = {std::move(a), std::move(b)};
        return losertree_merge_indexed(std::span<const IndexedRun>{runs, 2});
    }
    // Plain two-pointer merge on (bytes, id).
    IndexedRun out;
    std::size_t i = 0, j = 0;
    auto take = [&](IndexedRun& src, std::size_t& pos) {
        out.run.arena.push_back(src.run.arena[pos]);
        out.ids.push_back(src.ids[pos]);
        ++pos;
    };
    while (i < a.size() || j < b.size()) {
        bool from_a;
        if (i == a.size())
            from_a = false;
        else if (j == b.size())
            from_a = true;
        else {
            int c = compare(a.run.arena[i], b.run.arena[j]);
            from_a = c != 0 ? c < 0 : a.ids[i] < b.ids[j];
        }
        take(from_a ? a : b, from_a ? i : j);
    }
    out.run.lcp.assign(out.size(), 0);
    for (std::size_t t = 1; t < out.size(); ++t)
        out.run.lcp[t] = lcp(out.run.arena[t - 1], out.run.arena[t]);
    return out;
}

std::vector<std::uint8_t> encode_pivot(const std::optional<Pivot>& pv) {
    std::vector<std::uint8_t> buf;
    if (!pv)
        return buf;
    wire::put_u64(buf, pv->id);
    wire::put_bytes(buf, Bytes{pv->chars.data(), pv->chars.size()});
    return buf;
}

std::optional<Pivot> decode_pivot(const std::vector<std::uint8_t>& buf) {
    if (buf.empty())
        return std::nullopt;
    wire::Reader r{buf};
    Pivot pv;
    pv.id = r.u64();
    auto rest = r.bytes(buf.size() - 8);
    pv.chars.assign(rest.begin(), rest.end());
    return pv;
}

} // namespace

std::vector<std::optional<Pivot>> pivot_select(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::optional<Pivot>>& local_medians) {
    std::vector<std::vector<std::uint8_t>> payloads(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            payloads[g.pe(rank)] = encode_pivot(local_medians[g.pe(rank)]);
    auto gathered = allgather_bytes(m, groups, payloads);

    std::vector<std::optional<Pivot>> out(m.p());
    for (const Group& g : groups) {
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::vector<Pivot> medians;
            for (const auto& buf : gathered[g.pe(rank)])
                if (auto pv = decode_pivot(buf))
                    medians.push_back(std::move(*pv));
            if (medians.empty())
                continue;
            std::sort(medians.begin(), medians.end(), [](const Pivot& a, const Pivot& b) {
                int c = compare(Bytes{a.chars.data(), a.chars.size()},
                                Bytes{b.chars.data(), b.chars.size()});
                return c != 0 ? c < 0 : a.id < b.id;
            });
            out[g.pe(rank)] = medians[(medians.size() - 1) / 2];
        }
    }
    return out;
}

std::vector<PeStrings> rquick_shuffle(Machine& m, const std::vector<Group>& groups,
                                      std::vector<PeStrings> input) {
    std::uint32_t width = groups.front().size;
    std::uint32_t dim = width <= 1 ? 0 : std::bit_width(width) - 1; // floor(log2)
    std::uint32_t cube = 1u << dim;

    // Fold PEs outside the 2^dim cube into it.
    if (cube < width) {
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = cube; rank < g.size; ++rank) {
                PeStrings& src = input[g.pe(rank)];
                IndexedRun as_run; // unsorted carrier, raw bodies only
                as_run.run.arena = std::move(src.arena);
                as_run.run.lcp.assign(as_run.run.arena.size(), 0);
                as_run.ids = std::move(src.ids);
                Envelope env;
                env.dst = g.pe(rank - cube);
                env.payload = encode_piece(as_run, 0, as_run.size(), {.with_lcp = false});
                outboxes[g.pe(rank)].push_back(std::move(env));
                src = PeStrings{};
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                IndexedRun in = decode_piece(env.payload);
                for (std::size_t i = 0; i < in.size(); ++i) {
                    input[pe].arena.push_back(in.run.arena[i]);
                    input[pe].ids.push_back(in.ids[i]);
                }
            }
        }
    }

    // Random permutation among the cube PEs.
    {
        std::vector<std::vector<Envelope>> outboxes(m.p());
        std::vector<PeStrings> kept(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = 0; rank < cube; ++rank) {
                std::uint32_t pe = g.pe(rank);
                auto rng = m.pe_rng(pe);
                PeStrings& src = input[pe];
                // Group strings by random target rank.
                std::vector<std::vector<std::uint32_t>> per_target(cube);
                for (std::size_t i = 0; i < src.arena.size(); ++i)
                    per_target[rng() % cube].push_back(static_cast<std::uint32_t>(i));
                for (std::uint32_t target = 0; target < cube; ++target) {
                    if (per_target[target].empty())
                        continue;
                    if (target == rank) {
                        for (std::uint32_t i : per_target[target]) {
                            kept[pe].arena.push_back(src.arena[i]);
                            kept[pe].ids.push_back(src.ids[i]);
                        }
                        continue;
                    }
                    IndexedRun bundle;
                    bundle.run.lcp.assign(per_target[target].size(), 0);
                    for (std::uint32_t i : per_target[target]) {
                        bundle.run.arena.push_back(src.arena[i]);
                        bundle.ids.push_back(src.ids[i]);
                    }
                    Envelope env;
                    env.dst = g.pe(target);
                    env.payload = encode_piece(bundle, 0, bundle.size(), {.with_lcp = false});
                    outboxes[pe].push_back(std::move(env));
                }
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        input = std::move(kept);
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                IndexedRun in = decode_piece(env.payload);
                for (std::size_t i = 0; i < in.size(); ++i) {
                    input[pe].arena.push_back(in.run.arena[i]);
                    input[pe].ids.push_back(in.ids[i]);
                }
            }
        }
    }
    return input;
}

std::vector<IndexedRun> rquick_sort(Machine& m, const std::vector<Group>& groups,
                                    std::vector<PeStrings> input, bool plus) {
    std::uint32_t width = groups.front().size;
    std::uint32_t dim = width <= 1 ? 0 : std::bit_width(width) - 1; // floor(log2)
    std::uint32_t cube = 1u << dim;

    input = rquick_shuffle(m, groups, std::move(input));

    // Local sort.
    std::vector<IndexedRun> data(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        data[pe] = sort_local(std::move(input[pe]), plus);

    // Hypercube rounds: halve the sub-cube once per dimension.
    for (std::uint32_t round = 0; round < dim; ++round) {
        std::uint32_t sub = cube >> round;   // current sub-cube width
        std::uint32_t half = sub >> 1;

        std::vector<Group> subcubes;
        for (const Group& g : groups)
            for (std::uint32_t q = 0; q < cube / sub; ++q)
                subcubes.push_back(Group{g.begin + q * sub, sub});

        std::vector<std::optional<Pivot>> medians(m.p());
        for (const Group& sc : subcubes) {
            for (std::uint32_t rank = 0; rank < sc.size; ++rank) {
                const IndexedRun& run = data[sc.pe(rank)];
                if (run.size() == 0)
                    continue;
                std::size_t mid = (run.size() - 1) / 2;
                Bytes s = run.run.arena[mid];
                medians[sc.pe(rank)] = Pivot{{s.begin(), s.end()}, run.ids[mid]};
            }
        }
        auto pivots = pivot_select(m, subcubes, medians);

        std::vector<std::vector<Envelope>> outboxes(m.p());
        std::vector<IndexedRun> kept(m.p());
        for (const Group& sc : subcubes) {
            for (std::uint32_t rank = 0; rank < sc.size; ++rank) {
                std::uint32_t pe = sc.pe(rank);
                IndexedRun& run = data[pe];
                std::size_t cut = pivots[pe] ? split_point(run, *pivots[pe]) : 0;
                bool lower = rank < half;
                std::uint32_t partner = lower ? sc.pe(rank + half) : sc.pe(rank - half);
                std::size_t keep_b = lower ? 0 : cut;
                std::size_t keep_e = lower ? cut : run.size();
                std::size_t send_b = lower ? cut : 0;
                std::size_t send_e = lower ? run.size() : cut;
                kept[pe] = slice_run(run, keep_b, keep_e);
                if (send_e > send_b) {
                    Envelope env;
                    env.dst = partner;
                    env.payload = encode_piece(run, send_b, send_e, {.with_lcp = plus});
                    outboxes[pe].push_back(std::move(env));
                }
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        data = std::move(kept);
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            for (const Envelope& env : inboxes[pe])
                data[pe] = merge_two(std::move(data[pe]), decode_piece(env.payload), plus);
    }

    // Redistribute evenly over the whole group so every PE ends with
    // ceil(n/w) or floor(n/w) strings.
    std::vector<std::uint64_t> counts(m.p(), 0);
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        counts[pe] = data[pe].size();
    auto before = prefix_sum(m, groups, counts);
    auto totals = allreduce(m, groups, counts, ReduceOp::sum);

    std::vector<std::vector<Envelope>> outboxes(m.p());
    std::vector<std::vector<std::pair<std::uint32_t, IndexedRun>>> arriving(m.p());
    for (const Group& g : groups) {
        std::uint64_t total = totals[g.begin];
        std::uint64_t base = total / g.size;
        std::uint64_t extra = total % g.size;
        // Global ranks [target_begin(q), target_begin(q+1)) go to rank q.
        auto target_begin = [&](std::uint32_t q) {
            return q * base + std::min<std::uint64_t>(q, extra);
        };
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            IndexedRun& run = data[pe];
            std::uint64_t lo = before[pe];
            std::uint64_t hi = lo + run.size();
            for (std::uint32_t q = 0; q < g.size && run.size() > 0; ++q) {
                std::uint64_t tb = target_begin(q);
                std::uint64_t te = target_begin(q + 1);
                std::uint64_t b = std::max(lo, tb), e = std::min(hi, te);
                if (b >= e)
                    continue;
                if (g.pe(q) == pe) {
                    arriving[pe].emplace_back(pe, slice_run(run, b - lo, e - lo));
                    continue;
                }
                Envelope env;
                env.dst = g.pe(q);
                env.payload = encode_piece(run, b - lo, e - lo, {.with_lcp = plus});
                outboxes[pe].push_back(std::move(env));
            }
        }
    }
    auto inboxes = m.exchange(std::move(outboxes));
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        for (const Envelope& env : inboxes[pe])
            arriving[pe].emplace_back(env.src, decode_piece(env.payload));

    std::vector<IndexedRun> out(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
        // Source PEs hold ascending global rank ranges, so concatenating the
        // slices in source order restores the global order.
        auto& parts = arriving[pe];
        std::sort(parts.begin(), parts.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        IndexedRun merged;
        for (auto& [src, part] : parts) {
            for (std::size_t i = 0; i < part.size(); ++i) {
                std::size_t at = merged.size();
                merged.run.arena.push_back(part.run.arena[i]);
                merged.ids.push_back(part.ids[i]);
                merged.run.lcp.push_back(i > 0 ? part.run.lcp[i] : 0);
                if (at > 0 && i == 0)
                    merged.run.lcp[at] = lcp(merged.run.arena[at - 1], merged.run.arena[at]);
            }
        }
        out[pe] = std::move(merged);
    }
    return out;
}

} // namespace dss
