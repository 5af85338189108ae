#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dss/corpus.hpp"
#include "dss/rquick.hpp"
#include "util.hpp"

using namespace dss;

namespace {

// Distributes an arena block-wise over p PEs with global original indices
// as ids.
std::vector<PeStrings> distribute(const StringArena& all, std::uint32_t p) {
    std::vector<PeStrings> out(p);
    std::size_t n = all.size();
    std::size_t base = n / p, extra = n % p;
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

StringArena concatenate(const std::vector<IndexedRun>& runs) {
    StringArena all;
    for (const IndexedRun& r : runs)
        for (std::size_t i = 0; i < r.size(); ++i)
            all.push_back(r.run.arena[i]);
    return all;
}

void check_against_oracle(const StringArena& input, std::uint32_t p, bool plus,
                          std::uint64_t seed = 7) {
    Machine m(p, seed);
    m.begin_phase("rquick");
    auto out = rquick_sort(m, distribute(input, p), plus);
    StringArena got = concatenate(out);
    SortedRun want = oracle_sort(input);
    CHECK(got == want.arena);
    // Balance: every PE ends with ceil(n/p) or floor(n/p) strings.
    for (const IndexedRun& r : out) {
        CHECK(r.size() >= input.size() / p);
        CHECK(r.size() <= (input.size() + p - 1) / p);
        CHECK(validate_run(r.run));
    }
    CHECK(m.ledger().conserved());
}

} // namespace

TEST_CASE("single PE is a local sort") {
    std::mt19937_64 rng(1);
    StringArena in = testutil::random_arena(rng, 50, 1, 8, 4);
    check_against_oracle(in, 1, false);
    check_against_oracle(in, 1, true);
}

TEST_CASE("p=4 random strings match the oracle") {
    std::mt19937_64 rng(2);
    StringArena in = testutil::random_arena(rng, 400, 1, 10, 4);
    check_against_oracle(in, 4, false);
    check_against_oracle(in, 4, true);
}

TEST_CASE("non-power-of-two PE counts fold into the cube") {
    std::mt19937_64 rng(3);
    StringArena in = testutil::random_arena(rng, 600, 1, 12, 6);
    for (std::uint32_t p : {3u, 5u, 6u, 7u, 12u})
        check_against_oracle(in, p, true);
}

TEST_CASE("duplicate-heavy input stays correct") {
    std::mt19937_64 rng(4);
    StringArena in = testutil::random_arena(rng, 500, 1, 3, 2);
    check_against_oracle(in, 8, false);
    check_against_oracle(in, 8, true);
}

TEST_CASE("plus and plain produce identical orderings") {
    std::mt19937_64 rng(5);
    StringArena in = testutil::random_arena(rng, 800, 1, 10, 4);
    for (std::uint32_t p : {4u, 6u, 8u}) {
        Machine m1(p, 11), m2(p, 11);
        auto a = rquick_sort(m1, distribute(in, p), false);
        auto b = rquick_sort(m2, distribute(in, p), true);
        REQUIRE(a.size() == b.size());
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            CHECK(a[pe].run.arena == b[pe].run.arena);
            CHECK(a[pe].ids == b[pe].ids);
        }
    }
}

TEST_CASE("pivot_select takes the median of medians") {
    Machine m(3, 1);
    std::vector<std::optional<Pivot>> medians(3);
    medians[0] = Pivot{{'b'}, 0};
    medians[1] = Pivot{{'d'}, 1};
    medians[2] = Pivot{{'f'}, 2};
    auto pivots = pivot_select(m, {Group{0, 3}}, medians);
    for (std::uint32_t pe = 0; pe < 3; ++pe) {
        REQUIRE(pivots[pe].has_value());
        CHECK(pivots[pe]->chars == std::vector<std::uint8_t>{'d'});
    }
}

TEST_CASE("pivot_select single PE and abstaining PEs") {
    Machine m(2, 1);
    std::vector<std::optional<Pivot>> medians(2);
    medians[1] = Pivot{{'z'}, 4};
    auto pivots = pivot_select(m, {Group{0, 2}}, medians);
    CHECK(pivots[0]->chars == std::vector<std::uint8_t>{'z'});
    CHECK(pivots[1]->chars == std::vector<std::uint8_t>{'z'});

    auto none = pivot_select(m, {Group{0, 2}}, std::vector<std::optional<Pivot>>(2));
    CHECK(!none[0].has_value());
}

TEST_CASE("pivot splits every subcube with at least two items") {
    // Randomized: whatever the skew, the chosen pivot leaves both a <= part
    // and a > part whenever the subcube holds two or more items.
    std::mt19937_64 rng(13);
    for (int iter = 0; iter < 50; ++iter) {
        std::uint32_t p = 1 + rng() % 6;
        Machine m(p, 1);
        std::vector<IndexedRun> runs(p);
        std::vector<std::optional<Pivot>> medians(p);
        std::size_t total = 0;
        std::uint64_t id = 0;
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            std::size_t cnt = rng() % 5;
            StringArena a = testutil::random_arena(rng, cnt, 1, 3, 2);
            std::vector<std::uint64_t> ids(cnt);
            for (auto& x : ids)
                x = id++;
            runs[pe] = local_sort_indexed(a, std::move(ids));
            total += cnt;
            if (cnt > 0) {
                std::size_t mid = (cnt - 1) / 2;
                Bytes s = runs[pe].run.arena[mid];
                medians[pe] = Pivot{{s.begin(), s.end()}, runs[pe].ids[mid]};
            }
        }
        if (total < 2)
            continue;
        auto pivots = pivot_select(m, {Group{0, p}}, medians);
        REQUIRE(pivots[0].has_value());
        const Pivot& pv = *pivots[0];
        std::size_t low = 0, high = 0;
        for (std::uint32_t pe = 0; pe < p; ++pe)
            for (std::size_t i = 0; i < runs[pe].size(); ++i) {
                int c = compare(runs[pe].run.arena[i], Bytes{pv.chars.data(), pv.chars.size()});
                bool leq_pivot = c != 0 ? c < 0 : runs[pe].ids[i] <= pv.id;
                (leq_pivot ? low : high) += 1;
            }
        CHECK(low >= 1);
        CHECK(high >= 1);
    }
}

TEST_CASE("shuffle spreads strings roughly evenly") {
    // Smoke check of the random permutation step: with n >= 100 p and a
    // power-of-two p, post-shuffle counts stay within 50% of n/p for the
    // fixed test seed.
    std::mt19937_64 rng(6);
    for (std::uint32_t p : {4u, 8u, 16u}) {
        StringArena in = testutil::random_arena(rng, 150 * p, 1, 6, 4);
        Machine m(p, 1234);
        m.begin_phase("shuffle_check");
        auto shuffled = rquick_shuffle(m, {Group{0, p}}, distribute(in, p));
        double avg = static_cast<double>(in.size()) / p;
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            CHECK(shuffled[pe].arena.size() > avg * 0.5);
            CHECK(shuffled[pe].arena.size() < avg * 1.5);
        }
    }
}

TEST_CASE("empty PEs are legal") {
    StringArena in = testutil::arena_of({"b", "a"});
    check_against_oracle(in, 8, true);
}

TEST_CASE("dn corpus across seeds") {
    StringArena in = generate_dn({.n = 3000, .len = 32, .dn_ratio = 0.5, .sigma = 4, .seed = 9});
    for (std::uint64_t seed : {1ull, 2ull, 3ull})
        check_against_oracle(in, 16, true, seed);
}
