#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "dss/corpus.hpp"
#include "dss/pdms.hpp"
#include "util.hpp"

using namespace dss;

namespace {

std::vector<PeStrings> distribute(const StringArena& all, std::uint32_t p) {
    std::vector<PeStrings> out(p);
    std::size_t base = all.size() / p, extra = all.size() % p;
    std::size_t next = 0;
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        std::size_t cnt = base + (pe < extra ? 1 : 0);
        for (std::size_t i = 0; i < cnt; ++i, ++next) {
            out[pe].arena.push_back(all[next]);
            out[pe].ids.push_back(next);
        }
    }
    return out;
}

std::vector<IndexedRun> sorted_runs(const StringArena& all, std::uint32_t p) {
    auto pes = distribute(all, p);
    std::vector<IndexedRun> runs(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        runs[pe] = local_sort_indexed(pes[pe].arena, std::move(pes[pe].ids));
    return runs;
}

// Oracle d(s) per original index.
std::map<std::uint64_t, std::uint32_t> oracle_d(const StringArena& all) {
    std::vector<std::uint64_t> perm;
    SortedRun run = oracle_sort(all, &perm);
    DistPrefixes d = distinguishing_prefixes(run);
    std::map<std::uint64_t, std::uint32_t> by_id;
    for (std::size_t i = 0; i < perm.size(); ++i)
        by_id[perm[i]] = d.d[i];
    return by_id;
}

void check_safety(const StringArena& all, std::uint32_t p, const PdConfig& cfg) {
    Machine m(p, 3);
    auto runs = sorted_runs(all, p);
    auto approx = approximate_dist_prefixes(m, runs, cfg);
    auto want = oracle_d(all);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        for (std::size_t i = 0; i < runs[pe].size(); ++i) {
            CHECK(approx[pe][i] >= want.at(runs[pe].ids[i]));
            CHECK(approx[pe][i] <= runs[pe].run.arena.length(i));
        }
}

} // namespace

TEST_CASE("two strings differing in the last character") {
    StringArena a;
    std::string s1(40, 'a'), s2(40, 'a');
    s1.back() = 'b';
    s2.back() = 'c';
    a.push_back(std::string_view{s1});
    a.push_back(std::string_view{s2});

    Machine m(2, 1);
    auto runs = sorted_runs(a, 2);
    DoublingStats stats;
    auto approx = approximate_dist_prefixes(m, runs, PdConfig{.bloom_dims = {2}}, &stats);
    for (std::uint32_t pe = 0; pe < 2; ++pe)
        for (std::uint32_t d : approx[pe])
            CHECK(d == 40);
    // Doubling from 4: 4, 8, 16, 32, then the capped full length.
    CHECK(stats.rounds == 5);
}

TEST_CASE("distinct first characters finalize at the initial length") {
    StringArena a;
    for (int c = 0; c < 16; ++c) {
        std::string s(12, static_cast<char>('a' + c));
        a.push_back(std::string_view{s});
    }
    Machine m(4, 1);
    auto runs = sorted_runs(a, 4);
    DoublingStats stats;
    // A generous filter keeps the round free of false positives.
    auto approx = approximate_dist_prefixes(
        m, runs, PdConfig{.bloom_dims = {4}, .hash_seed = 5, .filter_scale = 100.0}, &stats);
    for (std::uint32_t pe = 0; pe < 4; ++pe)
        for (std::uint32_t d : approx[pe])
            CHECK(d == 4); // l_init
    CHECK(stats.rounds == 1);
}

TEST_CASE("approximation is safe on random and dn corpora") {
    std::mt19937_64 rng(2);
    check_safety(testutil::random_arena(rng, 800, 2, 16, 4), 8, PdConfig{.bloom_dims = {8}});
    check_safety(generate_dn({.n = 1000, .len = 32, .dn_ratio = 0.5, .sigma = 8, .seed = 5}), 8,
                 PdConfig{.bloom_dims = {4, 2}});
    check_safety(generate_dn({.n = 500, .len = 24, .dn_ratio = 0.0, .sigma = 4, .seed = 6}), 4,
                 PdConfig{.bloom_dims = {2, 2}});
}

TEST_CASE("round bound holds") {
    StringArena a = generate_dn({.n = 600, .len = 64, .dn_ratio = 0.9, .sigma = 4, .seed = 7});
    Machine m(8, 1);
    auto runs = sorted_runs(a, 8);
    DoublingStats stats;
    approximate_dist_prefixes(m, runs, PdConfig{.bloom_dims = {8}}, &stats);
    // ceil(log2(lhat / l_init)) + 1 with l_init = 4.
    CHECK(stats.rounds <= static_cast<std::uint32_t>(std::ceil(std::log2(64.0 / 4.0))) + 1);
}

TEST_CASE("switch threshold does not change the outcome") {
    StringArena a = generate_dn({.n = 1200, .len = 48, .dn_ratio = 0.4, .sigma = 8, .seed = 8});
    auto run_with = [&](std::uint64_t threshold) {
        Machine m(8, 1);
        auto runs = sorted_runs(a, 8);
        DoublingStats stats;
        auto approx = approximate_dist_prefixes(
            m, runs, PdConfig{.bloom_dims = {8}, .hash_seed = 99, .switch_threshold = threshold},
            &stats);
        return std::make_pair(approx, stats.switch_round);
    };
    auto [bloom_only, sw1] = run_with(1);                  // never switches
    auto [sort_only, sw2] = run_with(1ull << 40);          // always sorts
    CHECK(sw1 == 0);
    CHECK(sw2 == 1);
    CHECK(bloom_only == sort_only);
}

TEST_CASE("dedup_by_sorting basics") {
    Machine m(4, 1);
    std::vector<std::vector<DedupPair>> pairs(4);
    pairs[0] = {{10, 0}, {20, 1}};
    pairs[1] = {{30, 2}};
    pairs[2] = {{20, 3}};
    pairs[3] = {{20, 4}, {40, 5}};
    auto flags = dedup_by_sorting(m, pairs);
    CHECK(flags[0] == std::vector<bool>{false, true});
    CHECK(flags[1] == std::vector<bool>{false});
    CHECK(flags[2] == std::vector<bool>{true});
    CHECK(flags[3] == std::vector<bool>{true, false});
}

TEST_CASE("dedup_by_sorting equals dsbf_round on the same batch") {
    std::mt19937_64 rng(9);
    for (std::uint32_t p : {4u, 6u, 8u}) {
        std::vector<std::vector<DedupPair>> pairs(p);
        std::vector<std::vector<std::uint64_t>> positions(p);
        std::uint64_t id = 0;
        for (std::uint32_t pe = 0; pe < p; ++pe)
            for (int i = 0; i < 120; ++i) {
                std::uint64_t pos = rng() % 1500;
                pairs[pe].push_back({pos, id++});
                positions[pe].push_back(pos);
            }
        Machine m1(p, 1), m2(p, 1);
        auto a = dedup_by_sorting(m1, pairs);
        auto b = dsbf_round(m2, DsbfConfig{1500, {p}}, positions);
        CHECK(a == b);
    }
}

TEST_CASE("pdms permutation equals the oracle") {
    auto check = [](const StringArena& all, std::uint32_t p, MsConfig ms_cfg, PdConfig pd_cfg) {
        Machine m(p, 11);
        auto res = pdms_sort(m, distribute(all, p), ms_cfg, pd_cfg);
        std::vector<std::uint64_t> want;
        oracle_sort(all, &want);
        CHECK(res.permutation == want);
        CHECK(m.ledger().conserved());
    };
    std::mt19937_64 rng(10);
    check(testutil::random_arena(rng, 1600, 2, 12, 4), 16, MsConfig{.schedule = {4, 4}},
          PdConfig{.bloom_dims = {4, 4}});
    check(generate_dn({.n = 1600, .len = 24, .dn_ratio = 0.25, .sigma = 8, .seed = 12}), 16,
          MsConfig{.schedule = {4, 4}, .sampling = SamplingMode::character_based},
          PdConfig{.bloom_dims = {4, 4}});
    // Duplicate-heavy corpus: exact duplicates finalize at full length and
    // keep their stable order through the id tie-break.
    check(testutil::random_arena(rng, 900, 1, 2, 2), 8, MsConfig{.schedule = {2, 2, 2}},
          PdConfig{.bloom_dims = {8}});
}

TEST_CASE("pdms on full-coverage data is correct with no savings") {
    StringArena a = generate_dn({.n = 1000, .len = 20, .dn_ratio = 1.0, .sigma = 8, .seed = 13});
    Machine m(8, 11);
    auto res = pdms_sort(m, distribute(a, 8), MsConfig{.schedule = {4, 2}},
                         PdConfig{.bloom_dims = {8}});
    std::vector<std::uint64_t> want;
    oracle_sort(a, &want);
    CHECK(res.permutation == want);
    // Approximations cover whole strings.
    CHECK(res.doubling.approx_total >= a.char_count() * 95 / 100);
}

TEST_CASE("pdms exchanges fewer bytes than ms on low-dn data") {
    StringArena a = generate_dn({.n = 3200, .len = 100, .dn_ratio = 0.25, .sigma = 8, .seed = 14});
    Machine mm(16, 11);
    MsConfig cfg{.schedule = {4, 4}};
    auto ms_out = ms_sort(mm, distribute(a, 16), cfg);
    (void)ms_out;
    Machine mp(16, 11);
    auto res = pdms_sort(mp, distribute(a, 16), cfg, PdConfig{.bloom_dims = {4, 4}});
    std::vector<std::uint64_t> want;
    oracle_sort(a, &want);
    REQUIRE(res.permutation == want);
    CHECK(mp.ledger().total_bytes_sent("ms.exchange.") <
          mm.ledger().total_bytes_sent("ms.exchange."));
}

TEST_CASE("approximation overshoot stays within the 4x envelope") {
    // On dn data the doubling overshoots by at most one doubling step plus
    // occasional false-positive retries; the mean ratio stays under 4.
    for (std::uint64_t seed : {31ull, 32ull}) {
        for (double q : {0.25, 0.5}) {
            StringArena a = generate_dn({.n = 2000, .len = 64, .dn_ratio = q, .sigma = 8,
                                         .seed = seed});
            Machine m(8, seed);
            auto runs = sorted_runs(a, 8);
            auto approx = approximate_dist_prefixes(m, runs, PdConfig{.bloom_dims = {8}});
            auto want = oracle_d(a);
            double ratio_sum = 0;
            std::size_t cnt = 0;
            for (std::uint32_t pe = 0; pe < 8; ++pe)
                for (std::size_t i = 0; i < runs[pe].size(); ++i) {
                    ratio_sum += static_cast<double>(approx[pe][i]) /
                                 want.at(runs[pe].ids[i]);
                    ++cnt;
                }
            CHECK(ratio_sum / cnt <= 4.0);
        }
    }
}

TEST_CASE("tiny inputs with empty PEs") {
    StringArena a = testutil::arena_of({"x", "m", "m", "q"});
    Machine m(8, 1);
    auto res = pdms_sort(m, distribute(a, 8), MsConfig{.schedule = {4, 2}},
                         PdConfig{.bloom_dims = {4, 2}});
    std::vector<std::uint64_t> want;
    oracle_sort(a, &want);
    CHECK(res.permutation == want);
}

TEST_CASE("duplicate detection raises when asked to") {
    StringArena a;
    a.push_back(std::string_view{"same"});
    a.push_back(std::string_view{"same"});
    a.push_back(std::string_view{"other"});
    Machine m(2, 1);
    auto runs = sorted_runs(a, 2);
    CHECK_THROWS_WITH_AS(
        approximate_dist_prefixes(m, runs, PdConfig{.bloom_dims = {2}}, nullptr, true),
        doctest::Contains("duplicate input strings"), std::invalid_argument);

    StringArena b = generate_dn({.n = 50, .len = 8, .dn_ratio = 0.5, .sigma = 8, .seed = 15});
    Machine m2(2, 1);
    auto runs2 = sorted_runs(b, 2);
    CHECK_NOTHROW(approximate_dist_prefixes(m2, runs2, PdConfig{.bloom_dims = {2}}, nullptr, true));
}
