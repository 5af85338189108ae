#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "dss/corpus.hpp"
#include "dss/partition.hpp"
#include "util.hpp"

using namespace dss;

namespace {

// Builds per-PE sorted runs from string lists, with block-wise global ids.
std::vector<IndexedRun> make_runs(const std::vector<std::vector<const char*>>& per_pe) {
    std::vector<IndexedRun> runs(per_pe.size());
    std::uint64_t next_id = 0;
    for (std::size_t pe = 0; pe < per_pe.size(); ++pe) {
        StringArena a;
        std::vector<std::uint64_t> ids;
        for (const char* s : per_pe[pe]) {
            a.push_back(std::string_view{s});
            ids.push_back(next_id++);
        }
        runs[pe] = local_sort_indexed(a, std::move(ids));
    }
    return runs;
}

std::vector<const IndexedRun*> run_ptrs(const std::vector<IndexedRun>& runs) {
    std::vector<const IndexedRun*> ptrs;
    for (const IndexedRun& r : runs)
        ptrs.push_back(&r);
    return ptrs;
}

std::uint64_t total_samples(const std::vector<PeStrings>& samples) {
    std::uint64_t n = 0;
    for (const PeStrings& s : samples)
        n += s.arena.size();
    return n;
}

std::vector<IndexedRun> random_runs(std::mt19937_64& rng, std::uint32_t p, std::size_t per_pe,
                                    std::size_t max_len = 10, std::uint8_t sigma = 4) {
    std::vector<IndexedRun> runs(p);
    std::uint64_t next_id = 0;
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        StringArena a = testutil::random_arena(rng, per_pe, 1, max_len, sigma);
        std::vector<std::uint64_t> ids(a.size());
        for (auto& id : ids)
            id = next_id++;
        runs[pe] = local_sort_indexed(a, std::move(ids));
    }
    return runs;
}

} // namespace

TEST_CASE("string sampling draws the exact global count") {
    auto runs = make_runs({{"a", "b", "c", "d"}, {"e", "f", "g", "h"}});
    Machine m(2, 1);
    auto samples = draw_samples_string(m, {Group{0, 2}}, run_ptrs(runs), 1);
    CHECK(total_samples(samples) == 4); // p'(v+1) = 2*2
}

TEST_CASE("degenerate skew: one PE draws all samples") {
    auto runs = make_runs({{"a", "b", "c", "d", "e", "f", "g", "h"}, {}});
    Machine m(2, 1);
    auto samples = draw_samples_string(m, {Group{0, 2}}, run_ptrs(runs), 1);
    CHECK(total_samples(samples) == 4);
    CHECK(samples[0].arena.size() == 4);
    CHECK(samples[1].arena.size() == 0);
}

TEST_CASE("sampling exactness across divisibility cases") {
    std::mt19937_64 rng(3);
    for (std::uint32_t p : {2u, 3u, 4u, 8u}) {
        for (std::uint32_t v : {1u, 2u, 5u, 16u}) {
            std::vector<IndexedRun> runs(p);
            std::uint64_t id = 0;
            std::uniform_int_distribution<std::size_t> cnt(0, 37);
            bool any = false;
            for (std::uint32_t pe = 0; pe < p; ++pe) {
                std::size_t n = cnt(rng);
                any = any || n > 0;
                StringArena a = testutil::random_arena(rng, n, 1, 9, 4);
                std::vector<std::uint64_t> ids(a.size());
                for (auto& x : ids)
                    x = id++;
                runs[pe] = local_sort_indexed(a, std::move(ids));
            }
            if (!any)
                continue;
            Machine m(p, 1);
            auto s1 = draw_samples_string(m, {Group{0, p}}, run_ptrs(runs), v);
            CHECK(total_samples(s1) == std::uint64_t{p} * (v + 1));
            auto s2 = draw_samples_character(m, {Group{0, p}}, run_ptrs(runs), v);
            CHECK(total_samples(s2) == std::uint64_t{p} * (v + 1));
        }
    }
}

TEST_CASE("string sampling gap property") {
    // At most ceil(w) strings lie between consecutive samples on any PE.
    std::mt19937_64 rng(5);
    std::uint32_t p = 4, v = 3;
    StringArena all = generate_dn({.n = 1000, .len = 12, .dn_ratio = 0.7, .sigma = 8, .seed = 4});
    std::vector<IndexedRun> runs(p);
    std::size_t at = 0;
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        StringArena a;
        std::size_t cnt = 1000 / p;
        std::vector<std::uint64_t> ids;
        for (std::size_t i = 0; i < cnt; ++i, ++at) {
            a.push_back(all[at]);
            ids.push_back(at);
        }
        runs[pe] = local_sort_indexed(a, std::move(ids));
    }
    Machine m(p, 1);
    auto samples = draw_samples_string(m, {Group{0, p}}, run_ptrs(runs), v);

    std::uint64_t total = 1000;
    std::uint64_t target = std::uint64_t{p} * (v + 1);
    std::uint64_t gap_limit = (total + target - 1) / target; // ceil(w)
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        const IndexedRun& run = runs[pe];
        // Strings are unique, so sample positions are recoverable.
        std::vector<std::size_t> pos;
        for (std::size_t i = 0; i < samples[pe].arena.size(); ++i) {
            Bytes s = samples[pe].arena[i];
            for (std::size_t k = 0; k < run.size(); ++k)
                if (compare(run.run.arena[k], s) == 0) {
                    pos.push_back(k);
                    break;
                }
        }
        REQUIRE(pos.size() == samples[pe].arena.size());
        std::size_t prev = 0;
        for (std::size_t k = 0; k < pos.size(); ++k) {
            std::size_t before = pos[k] - prev; // strings strictly between
            CHECK(before <= gap_limit);
            prev = pos[k] + 1;
        }
        CHECK(run.size() - prev <= gap_limit);
    }
}

TEST_CASE("character sampling with unit strings equals string sampling") {
    auto runs = make_runs({{"a", "b", "c", "d"}, {"e", "f", "g", "h"}});
    Machine m1(2, 1), m2(2, 1);
    auto sc = draw_samples_character(m1, {Group{0, 2}}, run_ptrs(runs), 1);
    auto ss = draw_samples_string(m2, {Group{0, 2}}, run_ptrs(runs), 1);
    REQUIRE(total_samples(sc) == total_samples(ss));
    for (std::uint32_t pe = 0; pe < 2; ++pe)
        CHECK(sc[pe].arena == ss[pe].arena);
}

TEST_CASE("character sampling collapses repeated picks of a giant string") {
    // One huge string next to many tiny ones: the giant covers several
    // sampling windows but is emitted once and without a suffix.
    std::vector<std::vector<const char*>> data(2);
    std::string giant(200, 'z');
    data[0] = {giant.c_str()};
    std::vector<std::string> tiny;
    for (int i = 0; i < 40; ++i)
        tiny.push_back(std::string(1, static_cast<char>('a' + i % 20)) + std::to_string(i % 7 + 1));
    for (auto& t : tiny)
        data[1].push_back(t.c_str());
    auto runs = make_runs(data);
    Machine m(2, 1);
    auto samples = draw_samples_character(m, {Group{0, 2}}, run_ptrs(runs), 3);
    CHECK(total_samples(samples) == 8);
    // The giant string appears exactly once, verbatim.
    std::size_t giant_count = 0;
    for (std::uint32_t pe = 0; pe < 2; ++pe)
        for (std::size_t i = 0; i < samples[pe].arena.size(); ++i) {
            Bytes s = samples[pe].arena[i];
            if (s.size() >= 200 && std::equal(s.begin(), s.begin() + 200,
                                              reinterpret_cast<const std::uint8_t*>(giant.data())))
                ++giant_count;
        }
    CHECK(giant_count == 1);
    for (std::size_t i = 0; i < samples[0].arena.size(); ++i)
        CHECK(samples[0].arena.length(i) == 200); // no disambiguation suffix
}

TEST_CASE("character sampling gap property") {
    // Unique equal-length strings make sample positions recoverable.
    std::uint32_t p = 4, v = 2;
    StringArena all = generate_dn({.n = 1000, .len = 14, .dn_ratio = 0.6, .sigma = 8, .seed = 6});
    std::vector<IndexedRun> runs(p);
    std::size_t at = 0;
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        StringArena a;
        std::vector<std::uint64_t> ids;
        for (std::size_t i = 0; i < 250; ++i, ++at) {
            a.push_back(all[at]);
            ids.push_back(at);
        }
        runs[pe] = local_sort_indexed(a, std::move(ids));
    }
    Machine m(p, 1);
    auto samples = draw_samples_character(m, {Group{0, p}}, run_ptrs(runs), v);

    std::uint64_t total_chars = 0;
    std::uint32_t lhat = 0;
    for (auto& r : runs) {
        total_chars += r.run.arena.char_count();
        lhat = std::max(lhat, r.run.arena.max_length());
    }
    std::uint64_t target = std::uint64_t{p} * (v + 1);
    double w = static_cast<double>(total_chars) / target;
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        const IndexedRun& run = runs[pe];
        std::vector<std::uint64_t> cum(run.size() + 1, 0);
        for (std::size_t i = 0; i < run.size(); ++i)
            cum[i + 1] = cum[i] + run.run.arena.length(i);
        // Match samples back to string starts (body prefix match).
        std::vector<std::uint64_t> pos;
        for (std::size_t i = 0; i < samples[pe].arena.size(); ++i) {
            Bytes s = samples[pe].arena[i];
            for (std::size_t k = 0; k < run.size(); ++k) {
                Bytes b = run.run.arena[k];
                if (b.size() <= s.size() && std::equal(b.begin(), b.end(), s.begin())) {
                    pos.push_back(cum[k]);
                    break;
                }
            }
        }
        std::sort(pos.begin(), pos.end());
        std::uint64_t prev = 0;
        for (std::uint64_t x : pos) {
            CHECK(static_cast<double>(x - prev) <= w + lhat);
            prev = x;
        }
        CHECK(static_cast<double>(cum[run.size()] - prev) <= w + lhat);
    }
}

TEST_CASE("compute_splitters picks every |V|/r-th sample") {
    auto runs = make_runs({{"a", "b", "c", "d"}, {"e", "f", "g", "h"}});
    Machine m(2, 1);
    std::vector<PeStrings> samples(2);
    const char* names[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int i = 0; i < 8; ++i) {
        samples[i / 4].arena.push_back(std::string_view{names[i]});
        samples[i / 4].ids.push_back(i);
    }
    auto splitters = compute_splitters(m, {Group{0, 2}}, std::move(samples), 4);
    REQUIRE(splitters[0].size() == 3);
    CHECK(splitters[0][0] == std::vector<std::uint8_t>{'b'});
    CHECK(splitters[0][1] == std::vector<std::uint8_t>{'d'});
    CHECK(splitters[0][2] == std::vector<std::uint8_t>{'f'});
    CHECK(splitters[0] == splitters[1]);
}

TEST_CASE("compute_splitters with r=1 is empty") {
    auto runs = make_runs({{"a"}, {"b"}});
    Machine m(2, 1);
    std::vector<PeStrings> samples(2);
    samples[0].arena.push_back(std::string_view{"a"});
    samples[0].ids.push_back(0);
    samples[1].arena.push_back(std::string_view{"b"});
    samples[1].ids.push_back(1);
    auto splitters = compute_splitters(m, {Group{0, 2}}, std::move(samples), 1);
    CHECK(splitters[0].empty());
}

TEST_CASE("compute_splitters equals the sort-then-index oracle") {
    std::mt19937_64 rng(7);
    std::uint32_t p = 8, r = 8, v = 2 * r;
    auto runs = random_runs(rng, p, 100, 8, 6);
    Machine m(p, 1);
    auto samples = draw_samples_string(m, {Group{0, p}}, run_ptrs(runs), v);

    // Oracle: gather all samples with (bytes, origin) order, pick ranks.
    struct S {
        std::string bytes;
        std::uint64_t id;
    };
    std::vector<S> all;
    for (std::uint32_t pe = 0; pe < p; ++pe)
        for (std::size_t i = 0; i < samples[pe].arena.size(); ++i) {
            Bytes b = samples[pe].arena[i];
            all.push_back(S{std::string(b.begin(), b.end()), samples[pe].ids[i]});
        }
    std::sort(all.begin(), all.end(), [](const S& a, const S& b) {
        if (a.bytes != b.bytes)
            return a.bytes < b.bytes;
        return a.id < b.id;
    });
    std::uint64_t step = all.size() / r;

    auto splitters = compute_splitters(m, {Group{0, p}}, std::move(samples), r);
    REQUIRE(splitters[0].size() == r - 1);
    for (std::uint32_t j = 1; j < r; ++j) {
        const std::string& want = all[j * step - 1].bytes;
        const auto& got = splitters[0][j - 1];
        CHECK(std::string(got.begin(), got.end()) == want);
    }
}

TEST_CASE("make_buckets boundary convention") {
    SortedRun run = local_sort(testutil::arena_of({"a", "b", "c"}));
    SplitterSet splitters{{'b'}};
    auto bounds = make_buckets(run, splitters);
    CHECK(bounds == std::vector<std::size_t>{0, 2, 3}); // B0 = {a, b}, B1 = {c}
}

TEST_CASE("make_buckets with everything below the first splitter") {
    SortedRun run = local_sort(testutil::arena_of({"a", "ab", "ac"}));
    SplitterSet splitters{{'z'}};
    auto bounds = make_buckets(run, splitters);
    CHECK(bounds == std::vector<std::size_t>{0, 3, 3});
}

TEST_CASE("duplicate splitters yield empty middle buckets") {
    SortedRun run = local_sort(testutil::arena_of({"a", "m", "m", "z"}));
    SplitterSet splitters{{'m'}, {'m'}, {'x'}};
    auto bounds = make_buckets(run, splitters);
    CHECK(bounds == std::vector<std::size_t>{0, 3, 3, 3, 4});
}

namespace {

// Applies plans and checks coverage plus per-PE message counting.
struct PlanStats {
    std::map<std::uint32_t, std::uint64_t> recv_strings;
    std::map<std::uint32_t, std::uint64_t> recv_chars;
    std::uint64_t max_sends = 0;
    std::uint64_t max_receives = 0;
};

PlanStats apply_plans(const std::vector<IndexedRun>& runs,
                      const std::vector<std::vector<std::size_t>>& bounds,
                      const std::vector<MessagePlan>& plans, std::uint32_t r) {
    PlanStats st;
    std::map<std::uint32_t, std::uint64_t> recv_count;
    for (std::size_t pe = 0; pe < plans.size(); ++pe) {
        st.max_sends = std::max<std::uint64_t>(st.max_sends, plans[pe].size());
        // Entries of one bucket must exactly cover the bucket range.
        std::map<std::uint32_t, std::vector<std::pair<std::size_t, std::size_t>>> by_bucket;
        for (const PlanEntry& e : plans[pe]) {
            by_bucket[e.bucket].emplace_back(e.begin, e.end);
            recv_count[e.dst] += 1;
            st.recv_strings[e.dst] += e.end - e.begin;
            for (std::size_t i = e.begin; i < e.end; ++i)
                st.recv_chars[e.dst] += runs[pe].run.arena.length(i);
        }
        for (std::uint32_t j = 0; j < r; ++j) {
            auto& ranges = by_bucket[j];
            std::sort(ranges.begin(), ranges.end());
            std::size_t at = bounds[pe][j];
            for (auto& [b, e] : ranges) {
                REQUIRE(b == at);
                at = e;
            }
            REQUIRE(at == bounds[pe][j + 1]);
        }
    }
    for (auto& [dst, cnt] : recv_count)
        st.max_receives = std::max(st.max_receives, cnt);
    return st;
}

} // namespace

TEST_CASE("grid assignment mapping and counts") {
    auto runs = make_runs({{"a"}, {"b"}, {"c"}, {"d"}});
    std::vector<std::vector<std::size_t>> bounds(4);
    for (std::uint32_t pe = 0; pe < 4; ++pe)
        bounds[pe] = make_buckets(runs[pe].run, SplitterSet{{'b'}});
    auto plans = grid_assignment({Group{0, 4}}, 2, bounds);
    // PE 1 (row 1 of column 0) sends bucket 1 to PE 1*2+1 = 3.
    REQUIRE(plans[1].size() == 2);
    CHECK(plans[1][0].dst == 1);
    CHECK(plans[1][1].dst == 3);
    for (std::uint32_t pe = 0; pe < 4; ++pe)
        CHECK(plans[pe].size() == 2); // exactly r messages

    auto self = grid_assignment({Group{0, 4}}, 1, bounds);
    for (std::uint32_t pe = 0; pe < 4; ++pe) {
        REQUIRE(self[pe].size() == 1);
        CHECK(self[pe][0].dst == pe);
    }
}

TEST_CASE("bounded assignment on uniform buckets") {
    std::mt19937_64 rng(8);
    std::uint32_t p = 8, r = 4;
    auto runs = random_runs(rng, p, 64, 6, 8);
    Machine m(p, 1);
    auto ptrs = run_ptrs(runs);
    auto samples = draw_samples_string(m, {Group{0, p}}, ptrs, 2 * r);
    auto splitters = compute_splitters(m, {Group{0, p}}, std::move(samples), r);
    std::vector<std::vector<std::size_t>> bounds(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        bounds[pe] = make_buckets(runs[pe].run, splitters[pe]);

    auto res = bounded_assignment(m, {Group{0, p}}, r, ptrs, bounds, false);
    PlanStats st = apply_plans(runs, bounds, res.plans, r);
    CHECK(st.max_sends <= 3 * r);
    CHECK(st.max_receives <= 3 * r);
    // String balance: every receiver of group j holds <= ceil(|B^j|/p'').
    std::uint32_t sub = p / r;
    for (auto& [dst, cnt] : st.recv_strings) {
        std::uint32_t j = dst / sub;
        std::uint64_t cap = (res.bucket_units[0][j] + sub - 1) / sub;
        CHECK(cnt <= cap);
    }
    CHECK(m.ledger().conserved());
}

TEST_CASE("one PE holding a whole bucket splits over at most 3 receivers") {
    std::uint32_t p = 8, r = 2;
    std::vector<std::vector<const char*>> data(p);
    std::vector<std::string> backing;
    backing.reserve(64);
    for (int i = 0; i < 64; ++i)
        backing.push_back("z" + std::string(1, 'a' + i % 26) + std::to_string(i));
    for (auto& s : backing)
        data[3].push_back(s.c_str()); // all strings above the splitter, on PE 3
    auto runs = make_runs(data);
    std::vector<std::vector<std::size_t>> bounds(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        bounds[pe] = make_buckets(runs[pe].run, SplitterSet{{'m'}});

    Machine m(p, 1);
    auto res = bounded_assignment(m, {Group{0, p}}, r, run_ptrs(runs), bounds, false);
    std::map<std::uint32_t, bool> receivers;
    for (const PlanEntry& e : res.plans[3])
        if (e.bucket == 1)
            receivers[e.dst] = true;
    CHECK(receivers.size() <= 3);
    CHECK(receivers.size() >= 1);
    apply_plans(runs, bounds, res.plans, r);
}

TEST_CASE("character mode never splits a string") {
    std::uint32_t p = 4, r = 2;
    std::vector<std::vector<const char*>> data(p);
    std::string giant(300, 'z');
    data[0] = {giant.c_str()};
    auto runs = make_runs(data);
    std::vector<std::vector<std::size_t>> bounds(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        bounds[pe] = make_buckets(runs[pe].run, SplitterSet{{'m'}});

    Machine m(p, 1);
    auto res = bounded_assignment(m, {Group{0, p}}, r, run_ptrs(runs), bounds, true);
    // The single string must go to exactly one receiver, whole.
    REQUIRE(res.plans[0].size() == 1);
    CHECK(res.plans[0][0].end - res.plans[0][0].begin == 1);
    apply_plans(runs, bounds, res.plans, r);
}

TEST_CASE("character balance stays within share + max length") {
    std::mt19937_64 rng(9);
    std::uint32_t p = 8, r = 2;
    auto runs = random_runs(rng, p, 120, 20, 6);
    Machine m(p, 1);
    auto ptrs = run_ptrs(runs);
    auto samples = draw_samples_character(m, {Group{0, p}}, ptrs, 2 * r);
    auto splitters = compute_splitters(m, {Group{0, p}}, std::move(samples), r);
    std::vector<std::vector<std::size_t>> bounds(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        bounds[pe] = make_buckets(runs[pe].run, splitters[pe]);

    auto res = bounded_assignment(m, {Group{0, p}}, r, ptrs, bounds, true);
    PlanStats st = apply_plans(runs, bounds, res.plans, r);
    CHECK(st.max_sends <= 3 * r);
    CHECK(st.max_receives <= 3 * r);
    std::uint32_t lhat = 0;
    for (auto& run : runs)
        lhat = std::max(lhat, run.run.arena.max_length());
    std::uint32_t sub = p / r;
    for (auto& [dst, chars] : st.recv_chars) {
        std::uint32_t j = dst / sub;
        CHECK(chars <= res.bucket_units[0][j] / sub + lhat);
    }
}
