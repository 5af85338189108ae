#include "dss/msort.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dss/pieces.hpp"

namespace dss {

namespace {

void validate(const MsConfig& cfg, std::uint32_t p) {
    if (cfg.schedule.empty())
        throw std::invalid_argument("ms_sort: schedule must have at least one level");
    std::uint64_t prod = 1;
    for (std::uint32_t r : cfg.schedule) {
        if (r == 0)
            throw std::invalid_argument("ms_sort: zero split factor");
        prod *= r;
    }
    if (prod != p)
        throw std::invalid_argument("ms_sort: schedule must multiply to p");
}

std::vector<Group> level_groups(std::uint32_t p, std::uint32_t width) {
    std::vector<Group> groups;
    for (std::uint32_t b = 0; b < p; b += width)
        groups.push_back(Group{b, width});
    return groups;
}

} // namespace

std::vector<IndexedRun> ms_sort_runs(Machine& m, std::vector<IndexedRun> runs,
                                     const MsConfig& cfg, MsReport* report) {
    validate(cfg, m.p());
    std::uint32_t k = cfg.levels();

    if (report) {
        *report = MsReport{};
        for (const IndexedRun& r : runs) {
            report->total_strings += r.size();
            report->total_chars += r.run.arena.char_count();
            report->max_length = std::max(report->max_length, r.run.arena.max_length());
        }
    }

    std::uint32_t width = m.p();
    for (std::uint32_t t = 1; t <= k; ++t) {
        std::uint32_t r = cfg.schedule[t - 1];
        if (width % r != 0)
            throw std::invalid_argument("ms_sort: split factor does not divide group size");
        std::uint32_t sub = width / r;
        auto groups = level_groups(m.p(), width);
        std::uint32_t v = cfg.sampling_factor ? cfg.sampling_factor : 2 * k * r;
        std::string lvl = std::to_string(t);

        std::vector<const IndexedRun*> ptrs(m.p());
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            ptrs[pe] = &runs[pe];

        // Distributed partitioning: samples, splitters, local buckets.
        m.begin_phase("ms.partition." + lvl);
        std::vector<SplitterSet> splitters;
        if (r > 1) {
            auto samples = cfg.sampling == SamplingMode::string_based
                               ? draw_samples_string(m, groups, ptrs, v)
                               : draw_samples_character(m, groups, ptrs, v);
            splitters = compute_splitters(m, groups, std::move(samples), r);
        } else {
            splitters.assign(m.p(), SplitterSet{});
        }
        std::vector<std::vector<std::size_t>> bounds(m.p());
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            bounds[pe] = make_buckets(runs[pe].run, splitters[pe]);

        // String assignment.
        m.begin_phase("ms.assign." + lvl);
        std::vector<MessagePlan> plans;
        if (cfg.assignment == AssignmentMode::bounded) {
            auto res = bounded_assignment(m, groups, r, ptrs, bounds,
                                          cfg.sampling == SamplingMode::character_based);
            plans = std::move(res.plans);
        } else {
            plans = grid_assignment(groups, r, bounds);
        }

        if (report) {
            // Observed bucket maxima, aggregated outside the message fabric.
            LevelStats stats;
            stats.split = r;
            stats.sampling_factor = v;
            for (const Group& g : groups) {
                std::vector<std::uint64_t> strs(r, 0), chars(r, 0);
                for (std::uint32_t rank = 0; rank < g.size; ++rank) {
                    std::uint32_t pe = g.pe(rank);
                    for (std::uint32_t j = 0; j < r; ++j) {
                        strs[j] += bounds[pe][j + 1] - bounds[pe][j];
                        for (std::size_t i = bounds[pe][j]; i < bounds[pe][j + 1]; ++i)
                            chars[j] += runs[pe].run.arena.length(i);
                    }
                }
                for (std::uint32_t j = 0; j < r; ++j) {
                    stats.max_bucket_strings = std::max(stats.max_bucket_strings, strs[j]);
                    stats.max_bucket_chars = std::max(stats.max_bucket_chars, chars[j]);
                }
            }
            report->levels.push_back(stats);
        }

        // String exchange: one superstep of direct messages, one envelope
        // per plan entry (self entries included).
        m.begin_phase("ms.exchange." + lvl);
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            for (const PlanEntry& e : plans[pe]) {
                Envelope env;
                env.dst = e.dst;
                env.payload = encode_piece(runs[pe], e.begin, e.end,
                                           {.with_lcp = true, .compressed = cfg.lcp_compression});
                outboxes[pe].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));

        // Local LCP-aware merging.
        m.begin_phase("ms.merge." + lvl);
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            std::vector<IndexedRun> pieces;
            for (const Envelope& env : inboxes[pe])
                pieces.push_back(decode_piece(env.payload));
            runs[pe] = losertree_merge_indexed(pieces);
        }

        if (report) {
            LevelStats& stats = report->levels.back();
            for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
                stats.max_pe_strings = std::max<std::uint64_t>(stats.max_pe_strings,
                                                               runs[pe].size());
                stats.max_pe_chars = std::max<std::uint64_t>(stats.max_pe_chars,
                                                             runs[pe].run.arena.char_count());
            }
        }
        width = sub;
    }
    return runs;
}

std::vector<IndexedRun> ms_sort(Machine& m, std::vector<PeStrings> input, const MsConfig& cfg,
                                MsReport* report) {
    validate(cfg, m.p());
    m.begin_phase("ms.init_sort");
    std::vector<IndexedRun> runs(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        runs[pe] = local_sort_indexed(input[pe].arena, std::move(input[pe].ids));
    return ms_sort_runs(m, std::move(runs), cfg, report);
}

} // namespace dss
