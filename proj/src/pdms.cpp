#include "dss/pdms.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include "dss/pieces.hpp"
#include "dss/rquick.hpp"

namespace dss {

namespace {

bool pair_less(const DedupPair& a, const DedupPair& b) {
    return std::tie(a.hash, a.index) < std::tie(b.hash, b.index);
}

std::vector<std::uint8_t> encode_pairs(const std::vector<DedupPair>& pairs) {
    std::vector<std::uint8_t> buf;
    buf.reserve(pairs.size() * 16);
    for (const DedupPair& p : pairs) {
        wire::put_u64(buf, p.hash);
        wire::put_u64(buf, p.index);
    }
    return buf;
}

std::vector<DedupPair> decode_pairs(std::span<const std::uint8_t> buf) {
    wire::Reader r{buf};
    std::vector<DedupPair> pairs;
    while (!r.done()) {
        DedupPair p;
        p.hash = r.u64();
        p.index = r.u64();
        pairs.push_back(p);
    }
    return pairs;
}

// One forward transfer: the pair ids moved to/from a peer in one stage.
struct RouteLog {
    std::uint32_t peer = 0;
    std::vector<std::uint64_t> indices;
};

} // namespace

std::vector<std::vector<bool>> dedup_by_sorting(Machine& m,
                                                const std::vector<std::vector<DedupPair>>& input) {
    std::uint32_t p = m.p();
    std::uint32_t dim = p <= 1 ? 0 : std::bit_width(p) - 1;
    std::uint32_t cube = 1u << dim;

    std::vector<std::vector<DedupPair>> data = input;
    std::vector<std::vector<std::vector<RouteLog>>> sent_log(p), recv_log(p);
    auto log_to = [](std::vector<std::vector<RouteLog>>& log, std::size_t stage,
                     std::uint32_t peer, const std::vector<DedupPair>& pairs) {
        if (log.size() <= stage)
            log.resize(stage + 1);
        RouteLog r;
        r.peer = peer;
        for (const DedupPair& q : pairs)
            r.indices.push_back(q.index);
        log[stage].push_back(std::move(r));
    };

    std::size_t stage = 0;
    if (cube < p) {
        std::vector<std::vector<Envelope>> out(p);
        for (std::uint32_t pe = cube; pe < p; ++pe) {
            log_to(sent_log[pe], stage, pe - cube, data[pe]);
            out[pe].push_back(Envelope{pe, pe - cube, encode_pairs(data[pe])});
            data[pe].clear();
        }
        auto in = m.exchange(std::move(out));
        for (std::uint32_t pe = 0; pe < cube; ++pe)
            for (const Envelope& env : in[pe]) {
                auto pairs = decode_pairs(env.payload);
                log_to(recv_log[pe], stage, env.src, pairs);
                data[pe].insert(data[pe].end(), pairs.begin(), pairs.end());
            }
        ++stage;
    }

    for (std::uint32_t pe = 0; pe < p; ++pe)
        std::sort(data[pe].begin(), data[pe].end(), pair_less);

    // Hypercube rounds; the hashes are uniform already, no shuffle needed.
    for (std::uint32_t round = 0; round < dim; ++round, ++stage) {
        std::uint32_t sub = cube >> round;
        std::uint32_t half = sub >> 1;
        std::vector<Group> subcubes;
        for (std::uint32_t b = 0; b < cube; b += sub)
            subcubes.push_back(Group{b, sub});

        std::vector<std::optional<Pivot>> medians(p);
        for (std::uint32_t pe = 0; pe < cube; ++pe) {
            if (data[pe].empty())
                continue;
            const DedupPair& mid = data[pe][(data[pe].size() - 1) / 2];
            std::vector<std::uint8_t> be(8);
            for (int i = 0; i < 8; ++i)
                be[i] = static_cast<std::uint8_t>(mid.hash >> (56 - 8 * i));
            medians[pe] = Pivot{std::move(be), mid.index};
        }
        auto pivots = pivot_select(m, subcubes, medians);

        std::vector<std::vector<Envelope>> out(p);
        for (const Group& sc : subcubes) {
            for (std::uint32_t rank = 0; rank < sc.size; ++rank) {
                std::uint32_t pe = sc.pe(rank);
                std::size_t cut = 0;
                if (pivots[pe]) {
                    std::uint64_t pivot_hash = 0;
                    for (int i = 0; i < 8; ++i)
                        pivot_hash = (pivot_hash << 8) | pivots[pe]->chars[i];
                    DedupPair edge{pivot_hash, pivots[pe]->id};
                    cut = std::upper_bound(data[pe].begin(), data[pe].end(), edge, pair_less) -
                          data[pe].begin();
                }
                bool lower = rank < half;
                std::uint32_t partner = lower ? sc.pe(rank + half) : sc.pe(rank - half);
                std::vector<DedupPair> keep, send;
                if (lower) {
                    keep.assign(data[pe].begin(), data[pe].begin() + cut);
                    send.assign(data[pe].begin() + cut, data[pe].end());
                } else {
                    keep.assign(data[pe].begin() + cut, data[pe].end());
                    send.assign(data[pe].begin(), data[pe].begin() + cut);
                }
                data[pe] = std::move(keep);
                if (!send.empty()) {
                    log_to(sent_log[pe], stage, partner, send);
                    out[pe].push_back(Envelope{pe, partner, encode_pairs(send)});
                }
            }
        }
        auto in = m.exchange(std::move(out));
        for (std::uint32_t pe = 0; pe < cube; ++pe) {
            for (const Envelope& env : in[pe]) {
                auto pairs = decode_pairs(env.payload);
                log_to(recv_log[pe], stage, env.src, pairs);
                std::vector<DedupPair> merged(data[pe].size() + pairs.size());
                std::merge(data[pe].begin(), data[pe].end(), pairs.begin(), pairs.end(),
                           merged.begin(), pair_less);
                data[pe] = std::move(merged);
            }
        }
    }
    std::size_t total_stages = stage;

    // Scan: local neighbors plus one boundary probe toward the next
    // non-empty PE and its verdict on the way back.
    std::vector<std::vector<std::uint8_t>> count_payload(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        wire::put_u64(count_payload[pe], data[pe].size());
    auto gathered = allgather_bytes(m, {Group{0, p}}, count_payload);
    std::vector<std::uint64_t> all_counts(p);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        wire::Reader r{gathered[0][pe]};
        all_counts[pe] = r.u64();
    }

    std::vector<std::vector<Envelope>> probes(p);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        if (data[pe].empty())
            continue;
        for (std::uint32_t nxt = pe + 1; nxt < p; ++nxt)
            if (all_counts[nxt] > 0) {
                std::vector<std::uint8_t> buf;
                wire::put_u64(buf, data[pe].back().hash);
                probes[pe].push_back(Envelope{pe, nxt, std::move(buf)});
                break;
            }
    }
    auto probe_in = m.exchange(std::move(probes));

    std::vector<std::map<std::uint64_t, bool>> flag_of(p);
    std::vector<std::vector<Envelope>> verdicts(p);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        bool prev_equal = false;
        for (const Envelope& env : probe_in[pe]) {
            bool match = !data[pe].empty() && [&] {
                wire::Reader r{env.payload};
                return r.u64() == data[pe].front().hash;
            }();
            prev_equal = prev_equal || match;
            verdicts[pe].push_back(Envelope{pe, env.src, {static_cast<std::uint8_t>(match)}});
        }
        for (std::size_t i = 0; i < data[pe].size(); ++i) {
            bool dup = (i > 0 && data[pe][i - 1].hash == data[pe][i].hash) ||
                       (i + 1 < data[pe].size() && data[pe][i + 1].hash == data[pe][i].hash) ||
                       (i == 0 && prev_equal);
            flag_of[pe][data[pe][i].index] = dup;
        }
    }
    auto verdict_in = m.exchange(std::move(verdicts));
    for (std::uint32_t pe = 0; pe < p; ++pe)
        for (const Envelope& env : verdict_in[pe])
            if (env.payload[0] && !data[pe].empty())
                flag_of[pe][data[pe].back().index] = true;

    // Reverse route: one bit per pair per stage.
    for (std::size_t s = total_stages; s-- > 0;) {
        std::vector<std::vector<Envelope>> out(p);
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            if (recv_log[pe].size() <= s)
                continue;
            for (const RouteLog& rec : recv_log[pe][s]) {
                std::vector<std::uint8_t> bits((rec.indices.size() + 7) / 8, 0);
                for (std::size_t i = 0; i < rec.indices.size(); ++i) {
                    auto it = flag_of[pe].find(rec.indices[i]);
                    if (it == flag_of[pe].end())
                        throw std::logic_error("dedup_by_sorting: lost flag on reverse route");
                    if (it->second)
                        bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
                    flag_of[pe].erase(it);
                }
                out[pe].push_back(Envelope{pe, rec.peer, std::move(bits)});
            }
        }
        auto in = m.exchange(std::move(out));
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            if (sent_log[pe].size() <= s)
                continue;
            for (const Envelope& env : in[pe]) {
                const RouteLog* match = nullptr;
                for (const RouteLog& rec : sent_log[pe][s])
                    if (rec.peer == env.src)
                        match = &rec;
                if (!match)
                    continue;
                for (std::size_t i = 0; i < match->indices.size(); ++i)
                    flag_of[pe][match->indices[i]] = (env.payload[i / 8] >> (i % 8)) & 1;
            }
        }
    }

    std::vector<std::vector<bool>> result(p);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        result[pe].resize(input[pe].size());
        for (std::size_t i = 0; i < input[pe].size(); ++i)
            result[pe][i] = flag_of[pe].at(input[pe][i].index);
    }
    return result;
}

namespace {

std::uint32_t default_init_len(std::uint32_t p, std::uint32_t sigma) {
    double x = std::log2(static_cast<double>(std::max(p, 2u))) /
               std::log2(static_cast<double>(std::max(sigma, 2u)));
    double e = std::ceil(std::log2(std::max(x, 1.0)));
    std::uint32_t len = static_cast<std::uint32_t>(std::ldexp(1.0, static_cast<int>(e)));
    return std::max(4u, len);
}

std::uint64_t default_switch_threshold(std::uint32_t p, std::size_t k) {
    double kk = static_cast<double>(std::max<std::size_t>(k, 1));
    double val = kk * kk * std::pow(p, 1.0 + 1.0 / kk) *
                 std::ceil(std::log2(static_cast<double>(std::max(p, 2u))));
    return static_cast<std::uint64_t>(val);
}

} // namespace

std::vector<std::vector<std::uint32_t>> approximate_dist_prefixes(
    Machine& m, const std::vector<IndexedRun>& runs, const PdConfig& cfg, DoublingStats* stats,
    bool error_on_duplicates) {
    std::uint32_t p = m.p();
    std::vector<Group> whole{Group{0, p}};

    m.begin_phase("pd.setup");
    std::vector<std::uint64_t> local_sigma(p, 0), local_max_len(p, 0);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        const StringArena& a = runs[pe].run.arena;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::uint8_t c : a[i])
                local_sigma[pe] = std::max<std::uint64_t>(local_sigma[pe], c);
        local_max_len[pe] = a.max_length();
    }
    auto sigma = allreduce(m, whole, local_sigma, ReduceOp::max);
    auto max_len = allreduce(m, whole, local_max_len, ReduceOp::max);

    std::uint32_t init_len = cfg.init_len
                                 ? cfg.init_len
                                 : default_init_len(p, static_cast<std::uint32_t>(sigma[0]));
    std::uint64_t threshold = cfg.switch_threshold
                                  ? cfg.switch_threshold
                                  : default_switch_threshold(p, cfg.bloom_dims.size());

    std::vector<std::vector<std::uint32_t>> result(p);
    std::vector<std::vector<std::uint32_t>> active(p); // string indices
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        result[pe].assign(runs[pe].size(), 0);
        active[pe].resize(runs[pe].size());
        for (std::uint32_t i = 0; i < runs[pe].size(); ++i)
            active[pe][i] = i;
    }

    if (stats)
        *stats = DoublingStats{};

    struct Candidate {
        std::uint32_t pe;
        std::uint32_t idx;
    };
    std::vector<Candidate> dup_candidates;

    std::uint64_t len_cur = init_len;
    for (std::uint32_t round = 1;; ++round, len_cur *= 2) {
        std::string lvl = std::to_string(round);
        m.begin_phase("pd.round." + lvl);
        std::vector<std::uint64_t> local_active(p, 0);
        for (std::uint32_t pe = 0; pe < p; ++pe)
            local_active[pe] = active[pe].size();
        std::uint64_t global_active = allreduce(m, whole, local_active, ReduceOp::sum)[0];
        if (global_active == 0)
            break;

        // A fresh filter per round, sized to the active operations.
        std::uint64_t m_filter = std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(std::ceil(cfg.filter_scale * global_active)));
        std::uint64_t round_seed = cfg.hash_seed ^ (0x9e3779b97f4a7c15ull * round);

        std::vector<std::vector<std::uint64_t>> positions(p);
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            positions[pe].reserve(active[pe].size());
            for (std::uint32_t idx : active[pe]) {
                Bytes s = runs[pe].run.arena[idx];
                std::uint64_t tested = std::min<std::uint64_t>(len_cur, s.size());
                std::uint64_t h = hash_bytes(s.subspan(0, tested), round_seed);
                positions[pe].push_back(reduce_to_range(h, m_filter));
            }
        }

        bool use_sorting = global_active < threshold;
        std::vector<std::vector<bool>> flags;
        if (use_sorting) {
            std::vector<std::vector<DedupPair>> pairs(p);
            for (std::uint32_t pe = 0; pe < p; ++pe)
                for (std::size_t i = 0; i < positions[pe].size(); ++i)
                    pairs[pe].push_back(
                        DedupPair{positions[pe][i], runs[pe].ids[active[pe][i]]});
            flags = dedup_by_sorting(m, pairs);
        } else {
            flags = dsbf_round(m, DsbfConfig{m_filter, cfg.bloom_dims}, positions);
        }

        if (stats) {
            stats->rounds = round;
            stats->active_per_round.push_back(global_active);
            if (use_sorting && stats->switch_round == 0)
                stats->switch_round = round;
        }

        for (std::uint32_t pe = 0; pe < p; ++pe) {
            std::vector<std::uint32_t> still_active;
            for (std::size_t i = 0; i < active[pe].size(); ++i) {
                std::uint32_t idx = active[pe][i];
                std::uint32_t full = runs[pe].run.arena.length(idx);
                std::uint32_t tested = static_cast<std::uint32_t>(
                    std::min<std::uint64_t>(len_cur, full));
                if (!flags[pe][i]) {
                    result[pe][idx] = tested;
                } else if (tested == full) {
                    result[pe][idx] = full;
                    dup_candidates.push_back(Candidate{pe, idx});
                } else {
                    still_active.push_back(idx);
                }
            }
            active[pe] = std::move(still_active);
        }
    }

    if (stats)
        for (std::uint32_t pe = 0; pe < p; ++pe)
            for (std::uint32_t d : result[pe])
                stats->approx_total += d;

    if (error_on_duplicates && !dup_candidates.empty()) {
        // Candidates collided at full length; confirm byte equality exactly.
        m.begin_phase("pd.dupcheck");
        std::vector<std::vector<std::uint8_t>> payload(p);
        for (const Candidate& c : dup_candidates) {
            Bytes s = runs[c.pe].run.arena[c.idx];
            auto& buf = payload[c.pe];
            wire::put_u64(buf, runs[c.pe].ids[c.idx]);
            wire::put_u32(buf, static_cast<std::uint32_t>(s.size()));
            wire::put_bytes(buf, s);
        }
        auto gathered = allgather_bytes(m, whole, payload);
        std::vector<std::pair<std::string, std::uint64_t>> cands;
        for (const auto& buf : gathered[0]) {
            wire::Reader r{buf};
            while (!r.done()) {
                std::uint64_t id = r.u64();
                std::uint32_t len = r.u32();
                auto b = r.bytes(len);
                cands.emplace_back(std::string(b.begin(), b.end()), id);
            }
        }
        std::sort(cands.begin(), cands.end());
        for (std::size_t i = 1; i < cands.size(); ++i)
            if (cands[i].first == cands[i - 1].first)
                throw std::invalid_argument(
                    "approximate_dist_prefixes: duplicate input strings (ids " +
                    std::to_string(cands[i - 1].second) + " and " +
                    std::to_string(cands[i].second) + ")");
    }
    return result;
}

PdmsResult pdms_sort(Machine& m, std::vector<PeStrings> input, const MsConfig& ms_cfg,
                     const PdConfig& pd_cfg) {
    PdmsResult res;
    m.begin_phase("pd.init_sort");
    std::vector<IndexedRun> runs(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        runs[pe] = local_sort_indexed(input[pe].arena, std::move(input[pe].ids));

    auto approx = approximate_dist_prefixes(m, runs, pd_cfg, &res.doubling, false);

    // Truncate to the approximated prefixes; ids stay as the tie-break key,
    // so exact duplicates keep their stable order.
    std::vector<IndexedRun> truncated(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
        IndexedRun& t = truncated[pe];
        const IndexedRun& r = runs[pe];
        t.ids = r.ids;
        t.run.lcp.assign(r.size(), 0);
        for (std::size_t i = 0; i < r.size(); ++i) {
            t.run.arena.push_back(r.run.arena[i].subspan(0, approx[pe][i]));
            if (i > 0)
                t.run.lcp[i] = std::min({r.run.lcp[i], approx[pe][i - 1], approx[pe][i]});
        }
    }

    res.runs = ms_sort_runs(m, std::move(truncated), ms_cfg, &res.ms_report);
    for (const IndexedRun& r : res.runs)
        res.permutation.insert(res.permutation.end(), r.ids.begin(), r.ids.end());
    return res;
}

} // namespace dss
