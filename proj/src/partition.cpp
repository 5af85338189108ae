#include "dss/partition.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace dss {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Variable-length rendering of an integer with characters 1..255.
void render_suffix(std::vector<std::uint8_t>& buf, std::uint64_t x) {
    std::uint8_t digits[16];
    int k = 0;
    do {
        digits[k++] = static_cast<std::uint8_t>(1 + x % 255);
        x /= 255;
    } while (x > 0);
    while (k > 0)
        buf.push_back(digits[--k]);
}

struct DrawState {
    std::vector<std::uint64_t> unit_count;   // per PE
    std::vector<std::uint64_t> base_samples; // per PE, before top-up
};

// Evenly spaced picks: position t of m over n units is
// floor((t+1) n / (m+1)) - 1, clamped at 0. At most ceil(n/(m+1)) units lie
// between consecutive picks.
std::uint64_t pick_position(std::uint64_t t, std::uint64_t m, std::uint64_t n) {
    std::uint64_t raw = (t + 1) * n / (m + 1);
    return raw == 0 ? 0 : raw - 1;
}

} // namespace

static std::vector<PeStrings> draw_samples(Machine& m, const std::vector<Group>& groups,
                                           const std::vector<const IndexedRun*>& runs,
                                           std::uint32_t v, bool char_units) {
    if (v == 0)
        throw std::invalid_argument("draw_samples: sampling factor must be positive");
    std::uint32_t gsize = groups.front().size;
    std::uint64_t target = std::uint64_t{gsize} * (v + 1);

    std::vector<std::uint64_t> units(m.p(), 0);
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            const IndexedRun& run = *runs[g.pe(rank)];
            units[g.pe(rank)] = char_units ? run.run.arena.char_count() : run.size();
        }
    auto group_units = allreduce(m, groups, units, ReduceOp::sum);

    // Initial per-PE draw.
    std::vector<std::vector<std::uint32_t>> picked(m.p()); // string indices, ascending
    std::vector<std::uint64_t> drawn(m.p(), 0);
    for (const Group& g : groups) {
        std::uint64_t total = group_units[g.begin];
        if (total == 0)
            continue;
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            const IndexedRun& run = *runs[pe];
            if (units[pe] == 0)
                continue;
            // ceil(units_i / w) - 1 with w = total / target, in exact integer
            // arithmetic.
            std::uint64_t cnt = ceil_div(units[pe] * target, total);
            cnt = cnt > 0 ? cnt - 1 : 0;
            if (!char_units) {
                for (std::uint64_t t = 0; t < cnt; ++t) {
                    std::uint64_t pos = pick_position(t, cnt, units[pe]);
                    picked[pe].push_back(static_cast<std::uint32_t>(pos));
                }
            } else {
                // Character positions, shifted back to string starts;
                // repeated picks of a string collapse.
                std::vector<std::uint64_t> cum(run.size() + 1, 0);
                for (std::size_t i = 0; i < run.size(); ++i)
                    cum[i + 1] = cum[i] + run.run.arena.length(i);
                for (std::uint64_t t = 0; t < cnt; ++t) {
                    std::uint64_t cpos = pick_position(t, cnt, units[pe]);
                    auto it = std::upper_bound(cum.begin(), cum.end(), cpos);
                    std::uint32_t str = static_cast<std::uint32_t>(it - cum.begin() - 1);
                    if (picked[pe].empty() || picked[pe].back() != str)
                        picked[pe].push_back(str);
                }
            }
            drawn[pe] = picked[pe].size();
        }
    }

    // Share the draw counts so each PE can determine its top-up share; the
    // first PEs (in group order) absorb the deficit, preferring PEs that
    // still have unsampled strings.
    std::vector<std::vector<std::uint8_t>> count_payload(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            std::uint64_t distinct = 0;
            for (std::size_t i = 0; i < picked[pe].size(); ++i)
                if (i == 0 || picked[pe][i] != picked[pe][i - 1])
                    ++distinct;
            std::uint64_t fresh = runs[pe]->size() > distinct ? runs[pe]->size() - distinct : 0;
            auto& buf = count_payload[pe];
            wire::put_u64(buf, drawn[pe]);
            wire::put_u64(buf, units[pe]);
            wire::put_u64(buf, fresh);
        }
    auto gathered = allgather_bytes(m, groups, count_payload);

    std::vector<PeStrings> out(m.p());
    for (const Group& g : groups) {
        if (group_units[g.begin] == 0)
            continue;
        std::vector<std::uint64_t> all_drawn(g.size), all_units(g.size), all_fresh(g.size);
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            wire::Reader r{gathered[g.begin][rank]};
            all_drawn[rank] = r.u64();
            all_units[rank] = r.u64();
            all_fresh[rank] = r.u64();
        }
        std::uint64_t total_drawn = 0;
        for (std::uint64_t d : all_drawn)
            total_drawn += d;
        std::uint64_t deficit = target > total_drawn ? target - total_drawn : 0;

        std::vector<std::uint64_t> extra(g.size, 0);
        std::uint64_t left = deficit;
        bool progress = true;
        while (left > 0 && progress) {
            progress = false;
            for (std::uint32_t rank = 0; rank < g.size && left > 0; ++rank) {
                if (all_units[rank] == 0 || extra[rank] >= all_fresh[rank])
                    continue;
                ++extra[rank];
                --left;
                progress = true;
            }
        }
        // Repeated samples once no fresh strings remain anywhere.
        while (left > 0) {
            for (std::uint32_t rank = 0; rank < g.size && left > 0; ++rank) {
                if (all_units[rank] == 0)
                    continue;
                ++extra[rank];
                --left;
            }
        }

        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            const IndexedRun& run = *runs[pe];
            // Top-up: unsampled strings first, then suffixed repeats.
            std::uint64_t need = extra[rank];
            std::vector<bool> sampled(run.size(), false);
            for (std::uint32_t s : picked[pe])
                sampled[s] = true;
            for (std::uint64_t round = 2; need > 0 && run.size() > 0; ++round) {
                for (std::size_t i = 0; i < run.size() && need > 0; ++i) {
                    if (round == 2 && sampled[i])
                        continue; // fresh strings first, repeats afterwards
                    sampled[i] = true;
                    picked[pe].push_back(static_cast<std::uint32_t>(i));
                    --need;
                }
            }

            // Emit in run order; in character mode a repeated sample of one
            // string carries the string's local index (and repeat ordinal)
            // as a disambiguation suffix.
            std::sort(picked[pe].begin(), picked[pe].end());
            std::vector<std::uint8_t> buf;
            std::uint64_t seq = 0;
            std::uint32_t repeat = 0;
            for (std::size_t o = 0; o < picked[pe].size(); ++o) {
                std::uint32_t str = picked[pe][o];
                repeat = (o > 0 && picked[pe][o - 1] == str) ? repeat + 1 : 0;
                Bytes body = run.run.arena[str];
                buf.assign(body.begin(), body.end());
                if (char_units && repeat > 0) {
                    render_suffix(buf, str);
                    if (repeat > 1)
                        render_suffix(buf, repeat);
                }
                out[pe].arena.push_back(Bytes{buf.data(), buf.size()});
                out[pe].ids.push_back((std::uint64_t{pe} << 32) | seq++);
            }
        }
    }
    return out;
}

std::vector<PeStrings> draw_samples_string(Machine& m, const std::vector<Group>& groups,
                                           const std::vector<const IndexedRun*>& runs,
                                           std::uint32_t v) {
    return draw_samples(m, groups, runs, v, false);
}

std::vector<PeStrings> draw_samples_character(Machine& m, const std::vector<Group>& groups,
                                              const std::vector<const IndexedRun*>& runs,
                                              std::uint32_t v) {
    return draw_samples(m, groups, runs, v, true);
}

std::vector<SplitterSet> compute_splitters(Machine& m, const std::vector<Group>& groups,
                                           std::vector<PeStrings> samples, std::uint32_t r) {
    std::vector<SplitterSet> out(m.p());
    if (r <= 1)
        return out;

    auto sorted = rquick_sort(m, groups, std::move(samples), true);

    std::vector<std::uint64_t> counts(m.p(), 0);
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        counts[pe] = sorted[pe].size();
    auto before = prefix_sum(m, groups, counts);
    auto totals = allreduce(m, groups, counts, ReduceOp::sum);

    // Owners of the selected ranks circulate their splitters.
    std::vector<std::vector<std::uint8_t>> payload(m.p());
    for (const Group& g : groups) {
        std::uint64_t total = totals[g.begin];
        if (total == 0)
            continue;
        if (total < r)
            throw std::runtime_error("compute_splitters: fewer samples than groups");
        std::uint64_t step = total / r;
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            auto& buf = payload[pe];
            for (std::uint32_t j = 1; j < r; ++j) {
                std::uint64_t want = std::uint64_t{j} * step - 1;
                if (want >= before[pe] && want < before[pe] + counts[pe]) {
                    Bytes s = sorted[pe].run.arena[want - before[pe]];
                    wire::put_u32(buf, j);
                    wire::put_u32(buf, static_cast<std::uint32_t>(s.size()));
                    wire::put_bytes(buf, s);
                }
            }
        }
    }
    auto gathered = allgather_bytes(m, groups, payload);

    for (const Group& g : groups) {
        SplitterSet set(r - 1);
        bool empty_group = totals[g.begin] == 0;
        if (!empty_group) {
            for (const auto& buf : gathered[g.begin]) {
                wire::Reader rd{buf};
                while (!rd.done()) {
                    std::uint32_t j = rd.u32();
                    std::uint32_t len = rd.u32();
                    auto b = rd.bytes(len);
                    set[j - 1].assign(b.begin(), b.end());
                }
            }
        }
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            out[g.pe(rank)] = set;
    }
    return out;
}

std::vector<std::size_t> make_buckets(const SortedRun& run, const SplitterSet& splitters) {
    std::vector<std::size_t> bounds;
    bounds.reserve(splitters.size() + 2);
    bounds.push_back(0);
    for (const auto& f : splitters) {
        Bytes fb{f.data(), f.size()};
        // First index with s > f: strings <= f stay in the lower bucket.
        std::size_t lo = bounds.back(), hi = run.size();
        while (lo < hi) {
            std::size_t mid = lo + (hi - lo) / 2;
            if (compare(run.arena[mid], fb) <= 0)
                lo = mid + 1;
            else
                hi = mid;
        }
        bounds.push_back(lo);
    }
    bounds.push_back(run.size());
    return bounds;
}

namespace {

std::uint64_t range_units(const IndexedRun& run, std::size_t begin, std::size_t end,
                          bool char_units) {
    if (!char_units)
        return end - begin;
    std::uint64_t u = 0;
    for (std::size_t i = begin; i < end; ++i)
        u += run.run.arena.length(i);
    return u;
}

// First string boundary at or after unit offset x within [begin, end).
std::size_t snap_to_boundary(const IndexedRun& run, std::size_t begin, std::size_t end,
                             std::uint64_t x, bool char_units) {
    if (!char_units)
        return std::min(begin + static_cast<std::size_t>(x), end);
    std::uint64_t cum = 0;
    for (std::size_t i = begin; i < end; ++i) {
        if (cum >= x)
            return i;
        cum += run.run.arena.length(i);
    }
    return end;
}

} // namespace

AssignmentResult bounded_assignment(Machine& m, const std::vector<Group>& groups, std::uint32_t r,
                                    const std::vector<const IndexedRun*>& runs,
                                    const std::vector<std::vector<std::size_t>>& bounds,
                                    bool char_units) {
    std::uint32_t gsize = groups.front().size;
    if (r == 0 || gsize % r != 0)
        throw std::invalid_argument("bounded_assignment: group size must be a multiple of r");
    std::uint32_t sub = gsize / r; // p''

    // Global bucket sizes.
    std::vector<std::vector<std::uint64_t>> local_units(m.p(), std::vector<std::uint64_t>(r, 0));
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            for (std::uint32_t j = 0; j < r; ++j)
                local_units[pe][j] =
                    range_units(*runs[pe], bounds[pe][j], bounds[pe][j + 1], char_units);
        }
    auto global_units = allreduce_vec(m, groups, local_units, ReduceOp::sum);

    // Small-bucket ranks via a prefix sum of indicators.
    std::vector<std::vector<std::uint64_t>> small_flag(m.p(), std::vector<std::uint64_t>(r, 0));
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            for (std::uint32_t j = 0; j < r; ++j) {
                std::uint64_t s = local_units[pe][j];
                bool small = s > 0 && s * 2 * r * sub <= global_units[pe][j];
                small_flag[pe][j] = small ? 1 : 0;
            }
        }
    auto small_rank = prefix_sum_vec(m, groups, small_flag);

    AssignmentResult result;
    result.plans.assign(m.p(), {});
    result.bucket_units = global_units;

    // Descriptors of large buckets (and small masses) travel to PE
    // floor(i/r) of the destination group, which forwards them to the
    // group root for the capacity merge.
    std::vector<std::vector<Envelope>> outboxes(m.p());
    for (const Group& g : groups) {
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            for (std::uint32_t j = 0; j < r; ++j) {
                std::uint64_t s = local_units[pe][j];
                if (s == 0)
                    continue;
                if (small_flag[pe][j]) {
                    // Destination decided locally; the root still needs the
                    // mass to compute residual capacities.
                    std::uint64_t t = small_rank[pe][j];
                    result.plans[pe].push_back(PlanEntry{
                        g.pe(static_cast<std::uint32_t>(j * sub + t / r)), j,
                        bounds[pe][j], bounds[pe][j + 1]});
                }
                Envelope env;
                env.dst = g.pe(j * sub + rank / r);
                auto& buf = env.payload;
                wire::put_u32(buf, pe);
                wire::put_u32(buf, j);
                buf.push_back(small_flag[pe][j] ? 1 : 0);
                wire::put_u64(buf, small_flag[pe][j] ? small_rank[pe][j] : 0);
                wire::put_u64(buf, s);
                outboxes[pe].push_back(std::move(env));
            }
        }
    }
    auto inboxes = m.exchange(std::move(outboxes));

    // Forward to the sub-group root.
    std::vector<std::vector<Envelope>> to_root(m.p());
    for (const Group& g : groups) {
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            if (inboxes[pe].empty())
                continue;
            std::uint32_t root = g.pe((rank / sub) * sub);
            std::vector<std::uint8_t> buf;
            for (const Envelope& env : inboxes[pe])
                wire::put_bytes(buf, Bytes{env.payload.data(), env.payload.size()});
            to_root[pe].push_back(Envelope{pe, root, std::move(buf)});
        }
    }
    auto root_in = m.exchange(std::move(to_root));

    // Roots merge large buckets against residual capacities and answer the
    // owners with their piece list.
    struct Descriptor {
        std::uint32_t owner, bucket;
        bool small;
        std::uint64_t rank, units;
    };
    std::vector<std::vector<Envelope>> replies(m.p());
    for (const Group& g : groups) {
        for (std::uint32_t j = 0; j < r; ++j) {
            std::uint32_t root = g.pe(j * sub);
            std::vector<Descriptor> descs;
            for (const Envelope& env : root_in[root]) {
                wire::Reader rd{env.payload};
                while (!rd.done()) {
                    Descriptor d;
                    d.owner = rd.u32();
                    d.bucket = rd.u32();
                    d.small = rd.bytes(1)[0] != 0;
                    d.rank = rd.u64();
                    d.units = rd.u64();
                    if (d.bucket == j)
                        descs.push_back(d);
                }
            }
            if (descs.empty())
                continue;
            std::sort(descs.begin(), descs.end(), [](const Descriptor& a, const Descriptor& b) {
                return a.owner < b.owner;
            });
            std::uint64_t bucket_total = global_units[root][j];
            std::uint64_t cap = ceil_div(bucket_total, sub);
            std::vector<std::uint64_t> residual(sub, cap);
            for (const Descriptor& d : descs)
                if (d.small)
                    residual[d.rank / r] -= std::min(residual[d.rank / r], d.units);

            // Walk the large buckets through the receivers in order.
            std::uint32_t q = 0;
            std::uint64_t room = residual.empty() ? 0 : residual[0];
            std::map<std::uint32_t, std::vector<std::uint8_t>> reply_bufs;
            for (const Descriptor& d : descs) {
                if (d.small)
                    continue;
                std::uint64_t consumed = 0;
                std::uint32_t pieces = 0;
                while (consumed < d.units) {
                    if (room == 0 && q + 1 < sub) {
                        ++q;
                        room = residual[q];
                        continue;
                    }
                    std::uint64_t take = std::min(d.units - consumed, room);
                    // A bucket never spreads over more than 3 receivers; the
                    // third piece absorbs the rest even beyond capacity.
                    if (pieces == 2 || (room == 0 && q + 1 >= sub))
                        take = d.units - consumed;
                    auto& buf = reply_bufs[d.owner];
                    wire::put_u32(buf, j);
                    wire::put_u32(buf, q);
                    wire::put_u64(buf, consumed);
                    wire::put_u64(buf, consumed + take);
                    consumed += take;
                    room -= std::min(room, take);
                    ++pieces;
                }
            }
            for (auto& [owner, buf] : reply_bufs)
                replies[root].push_back(Envelope{root, owner, std::move(buf)});
        }
    }
    auto owner_in = m.exchange(std::move(replies));

    for (const Group& g : groups) {
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            for (const Envelope& env : owner_in[pe]) {
                wire::Reader rd{env.payload};
                while (!rd.done()) {
                    std::uint32_t j = rd.u32();
                    std::uint32_t q = rd.u32();
                    std::uint64_t ub = rd.u64();
                    std::uint64_t ue = rd.u64();
                    std::size_t b = snap_to_boundary(*runs[pe], bounds[pe][j], bounds[pe][j + 1],
                                                     ub, char_units);
                    std::size_t e = snap_to_boundary(*runs[pe], bounds[pe][j], bounds[pe][j + 1],
                                                     ue, char_units);
                    if (b < e)
                        result.plans[pe].push_back(PlanEntry{g.pe(j * sub + q), j, b, e});
                }
            }
            std::sort(result.plans[pe].begin(), result.plans[pe].end(),
                      [](const PlanEntry& a, const PlanEntry& b) {
                          return std::tie(a.bucket, a.begin) < std::tie(b.bucket, b.begin);
                      });
        }
    }
    return result;
}

std::vector<MessagePlan> grid_assignment(const std::vector<Group>& groups, std::uint32_t r,
                                         const std::vector<std::vector<std::size_t>>& bounds) {
    std::vector<MessagePlan> plans(bounds.size());
    for (const Group& g : groups) {
        std::uint32_t sub = g.size / r;
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            std::uint32_t pe = g.pe(rank);
            for (std::uint32_t j = 0; j < r; ++j) {
                plans[pe].push_back(PlanEntry{g.pe(j * sub + rank % sub), j, bounds[pe][j],
                                              bounds[pe][j + 1]});
            }
        }
    }
    return plans;
}

} // namespace dss
