#include "dss/bloom.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dss {

namespace {

void set_bit(std::vector<std::uint8_t>& bits, std::uint64_t i) {
    if (bits.size() * 8 <= i)
        bits.resize(i / 8 + 1, 0);
    bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
}

bool get_bit(const std::vector<std::uint8_t>& bits, std::uint64_t i) {
    return (bits[i / 8] >> (i % 8)) & 1;
}

} // namespace

std::uint64_t EliasFanoBlock::bit_size() const { return kEfHeaderBits + payload_bits; }

std::vector<std::uint8_t> EliasFanoBlock::serialize() const {
    std::vector<std::uint8_t> buf;
    wire::put_u64(buf, count);
    wire::put_u64(buf, universe);
    buf.push_back(low_width);
    wire::put_bytes(buf, Bytes{bits.data(), bits.size()});
    return buf;
}

EliasFanoBlock EliasFanoBlock::deserialize(std::span<const std::uint8_t> buf) {
    wire::Reader r{buf};
    EliasFanoBlock b;
    b.count = r.u64();
    b.universe = r.u64();
    b.low_width = r.bytes(1)[0];
    auto rest = r.bytes(buf.size() - r.pos);
    b.bits.assign(rest.begin(), rest.end());
    b.payload_bits = b.bits.size() * 8;
    return b;
}

EliasFanoBlock ef_encode(const std::vector<std::uint64_t>& values, std::uint64_t universe) {
    EliasFanoBlock block;
    block.count = values.size();
    block.universe = universe;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] >= universe)
            throw std::invalid_argument("ef_encode: value outside universe");
        if (i > 0 && values[i] <= values[i - 1])
            throw std::invalid_argument("ef_encode: values must be strictly ascending");
    }
    if (values.empty())
        return block;

    std::uint64_t x = values.size();
    std::uint8_t b = 0;
    while ((x << (b + 1)) <= universe)
        ++b; // floor(log2(u/x))
    block.low_width = b;

    std::uint64_t bit = 0;
    // Packed low halves.
    for (std::uint64_t v : values) {
        for (std::uint8_t j = 0; j < b; ++j, ++bit)
            if ((v >> j) & 1)
                set_bit(block.bits, bit);
    }
    // Unary-coded deltas of the high halves.
    std::uint64_t prev_high = 0;
    for (std::uint64_t v : values) {
        std::uint64_t high = v >> b;
        bit += high - prev_high; // zeros
        set_bit(block.bits, bit++);
        prev_high = high;
    }
    block.payload_bits = bit;

    // The coding keeps every batch inside the stated envelope.
    double bound = static_cast<double>(x) *
                   (std::log2(static_cast<double>(universe) / static_cast<double>(x)) + 2.0);
    if (static_cast<double>(block.payload_bits) > bound)
        throw std::logic_error("ef_encode: size bound violated");
    return block;
}

std::vector<std::uint64_t> ef_decode(const EliasFanoBlock& block) {
    std::vector<std::uint64_t> out;
    out.reserve(block.count);
    if (block.count == 0)
        return out;
    std::uint64_t low_bits_total = block.count * block.low_width;
    if (block.bits.size() * 8 < low_bits_total)
        throw std::invalid_argument("ef_decode: truncated low bits");
    std::uint64_t bit = low_bits_total;
    std::uint64_t high = 0;
    for (std::uint64_t i = 0; i < block.count; ++i) {
        while (true) {
            if (bit >= block.bits.size() * 8)
                throw std::invalid_argument("ef_decode: truncated unary part");
            bool one = get_bit(block.bits, bit++);
            if (one)
                break;
            ++high;
        }
        std::uint64_t low = 0;
        for (std::uint8_t j = 0; j < block.low_width; ++j)
            if (get_bit(block.bits, i * block.low_width + j))
                low |= std::uint64_t{1} << j;
        std::uint64_t v = (high << block.low_width) | low;
        if (v >= block.universe)
            throw std::invalid_argument("ef_decode: value outside universe");
        if (!out.empty() && v <= out.back())
            throw std::invalid_argument("ef_decode: sequence not ascending");
        out.push_back(v);
    }
    return out;
}

std::uint64_t hash_bytes(Bytes data, std::uint64_t seed) {
    std::uint64_t h = seed ^ 0xcbf29ce484222325ull;
    for (std::uint8_t c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    h ^= data.size();
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

std::uint64_t hash_u64(std::uint64_t x, std::uint64_t seed) {
    std::uint8_t buf[8];
    for (int i = 0; i < 8; ++i)
        buf[i] = static_cast<std::uint8_t>(x >> (8 * i));
    return hash_bytes(Bytes{buf, 8}, seed);
}

std::uint64_t reduce_to_range(std::uint64_t h, std::uint64_t m) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(h) * static_cast<unsigned __int128>(m)) >> 64);
}

namespace {

struct HopTable {
    // Positions this PE forwarded, in ascending order, per next-hop PE.
    std::map<std::uint32_t, std::vector<std::uint64_t>> sent;
    // Contributors per position: which inbound PEs carried it (self for the
    // PE's own items in round 0).
    std::map<std::uint64_t, std::vector<std::uint32_t>> contributors;
};

} // namespace

std::vector<std::vector<bool>> dsbf_round(Machine& m, const DsbfConfig& cfg,
                                          const std::vector<std::vector<std::uint64_t>>& items) {
    std::uint32_t p = m.p();
    std::uint64_t prod = 1;
    for (std::uint32_t d : cfg.dims)
        prod *= d;
    if (prod != p)
        throw std::invalid_argument("dsbf_round: dims must multiply to p");
    std::size_t k = cfg.dims.size();
    for (const auto& batch : items)
        for (std::uint64_t pos : batch)
            if (pos >= cfg.m)
                throw std::out_of_range("dsbf_round: position outside filter");

    std::vector<std::uint32_t> stride(k, 1);
    for (std::size_t t = 1; t < k; ++t)
        stride[t] = stride[t - 1] * cfg.dims[t - 1];
    auto coord = [&](std::uint32_t pe, std::size_t t) { return (pe / stride[t]) % cfg.dims[t]; };
    auto owner_of = [&](std::uint64_t pos) {
        return static_cast<std::uint32_t>((static_cast<unsigned __int128>(pos) * p) / cfg.m);
    };
    auto next_hop = [&](std::uint32_t pe, std::uint64_t pos, std::size_t t) {
        std::int64_t shift =
            (std::int64_t)coord(owner_of(pos), t) - (std::int64_t)coord(pe, t);
        return static_cast<std::uint32_t>(pe + shift * stride[t]);
    };

    // Round 0 intake: local sort + dedup; local multiplicity is remembered
    // as an extra "self" contributor.
    std::vector<std::vector<HopTable>> tables(p, std::vector<HopTable>(k + 1));
    std::vector<std::vector<std::uint64_t>> holdings(p);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        std::vector<std::uint64_t> sorted = items[pe];
        std::sort(sorted.begin(), sorted.end());
        auto& contrib = tables[pe][0].contributors;
        for (std::uint64_t pos : sorted)
            contrib[pos].push_back(pe);
        holdings[pe].assign(contrib.size(), 0);
        std::size_t i = 0;
        for (auto& [pos, who] : contrib)
            holdings[pe][i++] = pos;
    }

    // Forward: k hops, dedup at every junction.
    for (std::size_t t = 0; t < k; ++t) {
        std::vector<std::vector<Envelope>> outboxes(p);
        std::vector<std::map<std::uint64_t, std::vector<std::uint32_t>>> incoming(p);
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            auto& sent = tables[pe][t].sent;
            for (std::uint64_t pos : holdings[pe])
                sent[next_hop(pe, pos, t)].push_back(pos);
            for (auto& [hop, list] : sent) {
                // Already ascending and duplicate-free.
                if (hop == pe) {
                    for (std::uint64_t pos : list)
                        incoming[pe][pos].push_back(pe);
                    continue;
                }
                Envelope env;
                env.dst = hop;
                env.payload = ef_encode(list, cfg.m).serialize();
                outboxes[pe].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                auto list = ef_decode(EliasFanoBlock::deserialize(env.payload));
                for (std::uint64_t pos : list)
                    incoming[pe][pos].push_back(env.src);
            }
            tables[pe][t + 1].contributors = std::move(incoming[pe]);
            holdings[pe].clear();
            for (auto& [pos, who] : tables[pe][t + 1].contributors)
                holdings[pe].push_back(pos);
        }
    }

    // Owners answer, then the bits retrace the route. answers[pe] maps each
    // currently known position to its flag.
    std::vector<std::map<std::uint64_t, bool>> answer(p);
    for (std::uint32_t pe = 0; pe < p; ++pe)
        for (auto& [pos, who] : tables[pe][k].contributors)
            answer[pe][pos] = who.size() >= 2;

    for (std::size_t t = k; t-- > 0;) {
        std::vector<std::map<std::uint64_t, bool>> next_answer(p);
        for (std::uint32_t pe = 0; pe < p; ++pe)
            for (auto& [hop, list] : tables[pe][t].sent)
                if (hop == pe)
                    for (std::uint64_t pos : list)
                        next_answer[pe][pos] = answer[pe].at(pos);
        // The receiver of each forward hop holds the answers for that hop's
        // list; it returns them as one bit per position, in list order.
        std::vector<std::vector<Envelope>> reverse(p);
        for (std::uint32_t src = 0; src < p; ++src) {
            for (auto& [hop, list] : tables[src][t].sent) {
                if (hop == src)
                    continue;
                std::vector<std::uint8_t> bits((list.size() + 7) / 8, 0);
                for (std::size_t i = 0; i < list.size(); ++i)
                    if (answer[hop].at(list[i]))
                        bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
                reverse[hop].push_back(Envelope{hop, src, std::move(bits)});
            }
        }
        auto inboxes = m.exchange(std::move(reverse));
        for (std::uint32_t pe = 0; pe < p; ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                const auto& list = tables[pe][t].sent.at(env.src);
                for (std::size_t i = 0; i < list.size(); ++i) {
                    bool bit = (env.payload[i / 8] >> (i % 8)) & 1;
                    next_answer[pe][list[i]] = bit;
                }
            }
            // A junction that merged several branches knows a duplicate even
            // if the upstream only saw the position once.
            for (auto& [pos, who] : tables[pe][t].contributors)
                if (who.size() >= 2)
                    next_answer[pe][pos] = true;
            answer[pe] = std::move(next_answer[pe]);
        }
    }

    std::vector<std::vector<bool>> flags(p);
    for (std::uint32_t pe = 0; pe < p; ++pe) {
        flags[pe].resize(items[pe].size(), false);
        for (std::size_t i = 0; i < items[pe].size(); ++i)
            flags[pe][i] = answer[pe].at(items[pe][i]);
    }
    return flags;
}

double fp_rate_estimate(std::uint32_t p, const std::vector<std::uint32_t>& dims, std::uint64_t n,
                        std::uint64_t m_size, std::uint64_t seed) {
    Machine machine(p, seed);
    machine.begin_phase("fp_estimate");
    std::vector<std::vector<std::uint64_t>> items(p);
    for (std::uint64_t i = 0; i < n; ++i)
        items[i % p].push_back(reduce_to_range(hash_u64(i, seed), m_size));
    auto flags = dsbf_round(machine, DsbfConfig{m_size, dims}, items);
    std::uint64_t dup = 0;
    for (const auto& f : flags)
        for (bool b : f)
            dup += b ? 1 : 0;
    return n == 0 ? 0.0 : static_cast<double>(dup) / static_cast<double>(n);
}

} // namespace dss
