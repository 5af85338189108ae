#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "dss/bloom.hpp"

using namespace dss;

TEST_CASE("elias-fano empty block") {
    EliasFanoBlock b = ef_encode({}, 100);
    CHECK(b.count == 0);
    CHECK(b.payload_bits == 0);
    CHECK(b.bit_size() == kEfHeaderBits);
    CHECK(ef_decode(b).empty());
}

TEST_CASE("elias-fano dense block is pure unary") {
    EliasFanoBlock b = ef_encode({0, 1, 2, 3}, 4);
    CHECK(b.low_width == 0);
    CHECK(ef_decode(b) == std::vector<std::uint64_t>{0, 1, 2, 3});
}

TEST_CASE("elias-fano roundtrip and size bound on random batches") {
    std::mt19937_64 rng(1);
    for (int iter = 0; iter < 200; ++iter) {
        std::uint64_t u = 1 + rng() % (1ull << 20);
        std::size_t x = rng() % std::min<std::uint64_t>(u, 3000);
        std::set<std::uint64_t> vals;
        while (vals.size() < x)
            vals.insert(rng() % u);
        std::vector<std::uint64_t> v(vals.begin(), vals.end());
        EliasFanoBlock b = ef_encode(v, u);
        CHECK(ef_decode(b) == v);
        if (x > 0) {
            double bound = x * (std::log2(static_cast<double>(u) / x) + 2.0);
            CHECK(static_cast<double>(b.payload_bits) <= bound);
        }
        auto wire = b.serialize();
        auto back = EliasFanoBlock::deserialize(wire);
        CHECK(ef_decode(back) == v);
    }
}

TEST_CASE("elias-fano rejects bad input") {
    CHECK_THROWS(ef_encode({3, 2}, 10));
    CHECK_THROWS(ef_encode({5, 5}, 10));
    CHECK_THROWS(ef_encode({11}, 10));
}

TEST_CASE("true duplicates are flagged on both PEs") {
    Machine m(4, 1);
    DsbfConfig cfg{1000, {4}};
    std::vector<std::vector<std::uint64_t>> items(4);
    items[0] = {77, 5};
    items[2] = {77};
    auto flags = dsbf_round(m, cfg, items);
    CHECK(flags[0][0] == true);
    CHECK(flags[0][1] == false);
    CHECK(flags[2][0] == true);
}

TEST_CASE("local duplicates are flagged without traffic dependence") {
    Machine m(2, 1);
    DsbfConfig cfg{1000, {2}};
    std::vector<std::vector<std::uint64_t>> items(2);
    items[1] = {9, 9, 10};
    auto flags = dsbf_round(m, cfg, items);
    CHECK(flags[1][0] == true);
    CHECK(flags[1][1] == true);
    CHECK(flags[1][2] == false);
}

TEST_CASE("all distinct positions come back unique") {
    Machine m(8, 1);
    DsbfConfig cfg{1 << 20, {2, 2, 2}};
    std::vector<std::vector<std::uint64_t>> items(8);
    std::uint64_t v = 1;
    for (auto& batch : items)
        for (int i = 0; i < 50; ++i)
            batch.push_back(v += 97);
    auto flags = dsbf_round(m, cfg, items);
    for (const auto& f : flags)
        for (bool b : f)
            CHECK(b == false);
}

TEST_CASE("grid depth does not change the answers") {
    std::mt19937_64 rng(3);
    std::uint32_t p = 8;
    std::vector<std::vector<std::uint64_t>> items(p);
    for (auto& batch : items)
        for (int i = 0; i < 200; ++i)
            batch.push_back(rng() % 4096);
    std::vector<std::vector<std::vector<std::uint32_t>>> dim_choices = {
        {{8}}, {{4, 2}}, {{2, 4}}, {{2, 2, 2}}};
    std::vector<std::vector<std::vector<bool>>> results;
    for (auto& dims : dim_choices) {
        Machine m(p, 1);
        results.push_back(dsbf_round(m, DsbfConfig{4096, dims[0]}, items));
    }
    for (std::size_t i = 1; i < results.size(); ++i)
        CHECK(results[i] == results[0]);
}

TEST_CASE("flags equal exact position-collision detection") {
    std::mt19937_64 rng(4);
    std::uint32_t p = 6;
    std::vector<std::vector<std::uint64_t>> items(p);
    std::map<std::uint64_t, int> global_count;
    for (auto& batch : items)
        for (int i = 0; i < 150; ++i) {
            std::uint64_t pos = rng() % 2000;
            batch.push_back(pos);
            global_count[pos]++;
        }
    Machine m(p, 1);
    auto flags = dsbf_round(m, DsbfConfig{2000, {3, 2}}, items);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        for (std::size_t i = 0; i < items[pe].size(); ++i)
            CHECK(flags[pe][i] == (global_count[items[pe][i]] >= 2));
    CHECK(m.ledger().conserved());
}

TEST_CASE("per-PE message count stays within the grid row size") {
    std::mt19937_64 rng(5);
    std::uint32_t p = 16;
    std::vector<std::vector<std::uint64_t>> items(p);
    for (auto& batch : items)
        for (int i = 0; i < 300; ++i)
            batch.push_back(rng() % (1 << 16));
    Machine m(p, 1);
    m.begin_phase("bloom");
    dsbf_round(m, DsbfConfig{1 << 16, {4, 4}}, items);
    const auto& ph = m.ledger().phase("bloom");
    // 2 forward + 2 reverse rounds, at most dim-1 = 3 messages each.
    CHECK(ph.supersteps == 4);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        CHECK(ph.pe[pe].msgs_sent <= 4 * 3);
}

TEST_CASE("fp rate is zero for a single item and small for a huge filter") {
    CHECK(fp_rate_estimate(4, {4}, 1, 100, 1) == 0.0);
    double rate = fp_rate_estimate(4, {2, 2}, 2000, 200000, 2);
    CHECK(rate < 0.05);
}

TEST_CASE("fp rate near the single-shot collision rate at m = e*n") {
    std::uint64_t n = 20000;
    std::uint64_t m_size = static_cast<std::uint64_t>(std::ceil(std::exp(1.0) * n));
    double sum = 0;
    int seeds = 5;
    for (int s = 0; s < seeds; ++s)
        sum += fp_rate_estimate(8, {8}, n, m_size, 100 + s);
    double mean = sum / seeds;
    CHECK(mean > 0.15);
    CHECK(mean < 0.45);
}
