#include "dss/simnet.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include <json.hpp>

namespace dss {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint32_t rounds_for(std::uint32_t group_size) {
    return group_size <= 1 ? 0 : std::bit_width(group_size - 1);
}

void check_groups(const std::vector<Group>& groups, std::uint32_t p) {
    for (const Group& g : groups) {
        if (g.size == 0)
            throw std::invalid_argument("collective: empty group");
        if (g.begin + g.size > p)
            throw std::invalid_argument("collective: group out of range");
        if (g.size != groups.front().size)
            throw std::invalid_argument("collective: groups must have equal size");
    }
}

} // namespace

CommLedger::Phase& CommLedger::touch(const std::string& name) {
    Phase& ph = phases_[name];
    if (ph.pe.empty())
        ph.pe.resize(p_);
    return ph;
}

void CommLedger::record_message(const std::string& phase, std::uint32_t src, std::uint32_t dst,
                                std::uint64_t bytes) {
    Phase& ph = touch(phase);
    ph.pe[src].msgs_sent += 1;
    ph.pe[src].bytes_sent += bytes;
    ph.pe[dst].msgs_received += 1;
    ph.pe[dst].bytes_received += bytes;
}

void CommLedger::record_superstep(const std::string& phase) { touch(phase).supersteps += 1; }

std::uint64_t CommLedger::total_bytes_sent(const std::string& prefix) const {
    std::uint64_t total = 0;
    for (const auto& [name, ph] : phases_) {
        if (name.rfind(prefix, 0) != 0)
            continue;
        for (const PerPe& pe : ph.pe)
            total += pe.bytes_sent;
    }
    return total;
}

std::uint64_t CommLedger::total_supersteps(const std::string& prefix) const {
    std::uint64_t total = 0;
    for (const auto& [name, ph] : phases_)
        if (name.rfind(prefix, 0) == 0)
            total += ph.supersteps;
    return total;
}

std::uint64_t CommLedger::max_msgs_sent_per_pe(const std::string& prefix) const {
    std::vector<std::uint64_t> per_pe(p_, 0);
    for (const auto& [name, ph] : phases_) {
        if (name.rfind(prefix, 0) != 0)
            continue;
        for (std::uint32_t i = 0; i < p_; ++i)
            per_pe[i] += ph.pe[i].msgs_sent;
    }
    return per_pe.empty() ? 0 : *std::max_element(per_pe.begin(), per_pe.end());
}

std::uint64_t CommLedger::max_msgs_received_per_pe(const std::string& prefix) const {
    std::vector<std::uint64_t> per_pe(p_, 0);
    for (const auto& [name, ph] : phases_) {
        if (name.rfind(prefix, 0) != 0)
            continue;
        for (std::uint32_t i = 0; i < p_; ++i)
            per_pe[i] += ph.pe[i].msgs_received;
    }
    return per_pe.empty() ? 0 : *std::max_element(per_pe.begin(), per_pe.end());
}

std::vector<std::string> CommLedger::phase_names(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, ph] : phases_)
        if (name.rfind(prefix, 0) == 0)
            out.push_back(name);
    return out;
}

bool CommLedger::conserved() const {
    for (const auto& [name, ph] : phases_) {
        std::uint64_t ms = 0, mr = 0, bs = 0, br = 0;
        for (const PerPe& pe : ph.pe) {
            ms += pe.msgs_sent;
            mr += pe.msgs_received;
            bs += pe.bytes_sent;
            br += pe.bytes_received;
        }
        if (ms != mr || bs != br)
            return false;
    }
    return true;
}

std::string CommLedger::to_json() const {
    nlohmann::json root;
    nlohmann::json& phases = root["phases"];
    phases = nlohmann::json::object();
    for (const auto& [name, ph] : phases_) {
        nlohmann::json& j = phases[name];
        j["supersteps"] = ph.supersteps;
        nlohmann::json& pes = j["pes"];
        pes = nlohmann::json::object();
        for (std::uint32_t i = 0; i < ph.pe.size(); ++i) {
            const PerPe& pe = ph.pe[i];
            pes[std::to_string(i)] = {{"msgs_sent", pe.msgs_sent},
                                      {"msgs_received", pe.msgs_received},
                                      {"bytes_sent", pe.bytes_sent},
                                      {"bytes_received", pe.bytes_received}};
        }
    }
    return root.dump();
}

std::vector<std::vector<Envelope>> Machine::exchange(std::vector<std::vector<Envelope>> outboxes) {
    if (outboxes.size() != p_)
        throw std::invalid_argument("exchange: need one outbox per PE");
    ledger_.record_superstep(phase_);
    std::vector<std::vector<Envelope>> inboxes(p_);
    for (std::uint32_t src = 0; src < p_; ++src) {
        for (Envelope& env : outboxes[src]) {
            if (env.dst >= p_)
                throw std::out_of_range("exchange: destination PE out of range");
            env.src = src;
            ledger_.record_message(phase_, src, env.dst, env.payload.size());
            inboxes[env.dst].push_back(std::move(env));
        }
    }
    // Iterating sources in ascending order already yields (src, send order).
    return inboxes;
}

std::mt19937_64 Machine::pe_rng(std::uint32_t pe) const {
    std::uint64_t s = splitmix64(seed_ ^ splitmix64(pe ^ (fnv1a(phase_) << 1)));
    return std::mt19937_64(s);
}

std::vector<std::vector<Envelope>> run_superstep(
    Machine& m, const std::function<std::vector<Envelope>(std::uint32_t)>& per_pe_step) {
    std::vector<std::vector<Envelope>> outboxes(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe)
        outboxes[pe] = per_pe_step(pe);
    return m.exchange(std::move(outboxes));
}

namespace {

std::uint64_t apply_op(std::uint64_t a, std::uint64_t b, ReduceOp op) {
    switch (op) {
    case ReduceOp::sum: return a + b;
    case ReduceOp::max: return std::max(a, b);
    case ReduceOp::min: return std::min(a, b);
    }
    return a;
}

std::vector<std::uint8_t> encode_u64s(const std::vector<std::uint64_t>& v) {
    std::vector<std::uint8_t> buf;
    buf.reserve(v.size() * 8);
    for (std::uint64_t x : v)
        wire::put_u64(buf, x);
    return buf;
}

std::vector<std::uint64_t> decode_u64s(wire::Reader& r) {
    std::vector<std::uint64_t> v;
    while (!r.done())
        v.push_back(r.u64());
    return v;
}

} // namespace

std::vector<std::vector<std::uint64_t>> prefix_sum_vec(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint64_t>>& local) {
    check_groups(groups, m.p());
    std::uint32_t rounds = rounds_for(groups.front().size);

    // Doubling scan: after round j, each rank holds the sum over the 2^(j+1)
    // ranks ending at it. `carry` accumulates contributions strictly from
    // the left, `window` is what gets forwarded.
    struct State {
        std::vector<std::uint64_t> window;
        std::vector<std::uint64_t> incoming;
        bool has_incoming = false;
    };
    std::vector<State> st(m.p());
    std::vector<std::vector<std::uint64_t>> exclusive(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            st[g.pe(rank)].window = local[g.pe(rank)];
            exclusive[g.pe(rank)].assign(local[g.pe(rank)].size(), 0);
        }

    for (std::uint32_t round = 0; round < rounds; ++round) {
        std::uint32_t stride = 1u << round;
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = 0; rank + stride < g.size; ++rank) {
                Envelope env;
                env.dst = g.pe(rank + stride);
                env.payload = encode_u64s(st[g.pe(rank)].window);
                outboxes[g.pe(rank)].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                wire::Reader r{env.payload};
                st[pe].incoming = decode_u64s(r);
                st[pe].has_incoming = true;
            }
        }
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            State& s = st[pe];
            if (!s.has_incoming)
                continue;
            for (std::size_t i = 0; i < s.window.size(); ++i) {
                s.window[i] += s.incoming[i];
                exclusive[pe][i] += s.incoming[i];
            }
            s.has_incoming = false;
        }
    }
    return exclusive;
}

std::vector<std::uint64_t> prefix_sum(Machine& m, const std::vector<Group>& groups,
                                      const std::vector<std::uint64_t>& local) {
    std::vector<std::vector<std::uint64_t>> wrapped(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            wrapped[g.pe(rank)] = {local[g.pe(rank)]};
    auto res = prefix_sum_vec(m, groups, wrapped);
    std::vector<std::uint64_t> out(m.p(), 0);
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            out[g.pe(rank)] = res[g.pe(rank)][0];
    return out;
}

std::vector<std::vector<std::uint64_t>> allreduce_vec(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint64_t>>& local, ReduceOp op) {
    check_groups(groups, m.p());
    std::uint32_t rounds = rounds_for(groups.front().size);
    std::vector<std::vector<std::uint64_t>> acc(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            acc[g.pe(rank)] = local[g.pe(rank)];

    // Binomial reduce towards rank 0.
    for (std::uint32_t round = 0; round < rounds; ++round) {
        std::uint32_t stride = 1u << round;
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = stride; rank < g.size; rank += 2 * stride) {
                Envelope env;
                env.dst = g.pe(rank - stride);
                env.payload = encode_u64s(acc[g.pe(rank)]);
                outboxes[g.pe(rank)].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                wire::Reader r{env.payload};
                auto v = decode_u64s(r);
                for (std::size_t i = 0; i < acc[pe].size(); ++i)
                    acc[pe][i] = apply_op(acc[pe][i], v[i], op);
            }
        }
    }
    // Binomial broadcast of the result from rank 0.
    for (std::uint32_t round = 0; round < rounds; ++round) {
        std::uint32_t stride = 1u << (rounds - 1 - round);
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = 0; rank + stride < g.size; rank += 2 * stride) {
                if (rank % (2 * stride) != 0)
                    continue;
                Envelope env;
                env.dst = g.pe(rank + stride);
                env.payload = encode_u64s(acc[g.pe(rank)]);
                outboxes[g.pe(rank)].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            for (const Envelope& env : inboxes[pe]) {
                wire::Reader r{env.payload};
                acc[pe] = decode_u64s(r);
            }
    }
    return acc;
}

std::vector<std::uint64_t> allreduce(Machine& m, const std::vector<Group>& groups,
                                     const std::vector<std::uint64_t>& local, ReduceOp op) {
    std::vector<std::vector<std::uint64_t>> wrapped(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            wrapped[g.pe(rank)] = {local[g.pe(rank)]};
    auto res = allreduce_vec(m, groups, wrapped, op);
    std::vector<std::uint64_t> out(m.p(), 0);
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            out[g.pe(rank)] = res[g.pe(rank)][0];
    return out;
}

std::vector<std::vector<std::vector<std::uint8_t>>> allgather_bytes(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint8_t>>& local) {
    check_groups(groups, m.p());
    std::uint32_t rounds = rounds_for(groups.front().size);

    // Accumulated (rank, payload) lists, gathered to rank 0 then broadcast.
    using Gathered = std::vector<std::pair<std::uint32_t, std::vector<std::uint8_t>>>;
    std::vector<Gathered> acc(m.p());
    for (const Group& g : groups)
        for (std::uint32_t rank = 0; rank < g.size; ++rank)
            acc[g.pe(rank)].emplace_back(rank, local[g.pe(rank)]);

    auto encode = [](const Gathered& gathered) {
        std::vector<std::uint8_t> buf;
        for (const auto& [rank, payload] : gathered) {
            wire::put_u32(buf, rank);
            wire::put_u32(buf, static_cast<std::uint32_t>(payload.size()));
            wire::put_bytes(buf, payload);
        }
        return buf;
    };
    auto decode = [](const std::vector<std::uint8_t>& buf) {
        Gathered gathered;
        wire::Reader r{buf};
        while (!r.done()) {
            std::uint32_t rank = r.u32();
            std::uint32_t len = r.u32();
            auto b = r.bytes(len);
            gathered.emplace_back(rank, std::vector<std::uint8_t>(b.begin(), b.end()));
        }
        return gathered;
    };

    for (std::uint32_t round = 0; round < rounds; ++round) {
        std::uint32_t stride = 1u << round;
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = stride; rank < g.size; rank += 2 * stride) {
                Envelope env;
                env.dst = g.pe(rank - stride);
                env.payload = encode(acc[g.pe(rank)]);
                outboxes[g.pe(rank)].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            for (const Envelope& env : inboxes[pe]) {
                Gathered in = decode(env.payload);
                acc[pe].insert(acc[pe].end(), in.begin(), in.end());
            }
    }
    for (std::uint32_t round = 0; round < rounds; ++round) {
        std::uint32_t stride = 1u << (rounds - 1 - round);
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = 0; rank + stride < g.size; rank += 2 * stride) {
                if (rank % (2 * stride) != 0)
                    continue;
                Envelope env;
                env.dst = g.pe(rank + stride);
                env.payload = encode(acc[g.pe(rank)]);
                outboxes[g.pe(rank)].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            for (const Envelope& env : inboxes[pe])
                acc[pe] = decode(env.payload);
    }

    std::vector<std::vector<std::vector<std::uint8_t>>> out(m.p());
    for (const Group& g : groups) {
        for (std::uint32_t rank = 0; rank < g.size; ++rank) {
            Gathered& gathered = acc[g.pe(rank)];
            std::stable_sort(gathered.begin(), gathered.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            auto& slot = out[g.pe(rank)];
            slot.resize(g.size);
            for (auto& [r, payload] : gathered)
                slot[r] = payload;
        }
    }
    return out;
}

std::vector<std::vector<std::uint8_t>> broadcast_bytes(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint8_t>>& root_payload) {
    check_groups(groups, m.p());
    std::uint32_t rounds = rounds_for(groups.front().size);
    std::vector<std::vector<std::uint8_t>> value(m.p());
    std::vector<bool> holds(m.p(), false);
    for (const Group& g : groups) {
        value[g.begin] = root_payload[g.begin];
        holds[g.begin] = true;
    }
    for (std::uint32_t round = 0; round < rounds; ++round) {
        std::uint32_t stride = 1u << round;
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (const Group& g : groups) {
            for (std::uint32_t rank = 0; rank < stride && rank + stride < g.size; ++rank) {
                if (!holds[g.pe(rank)])
                    continue;
                Envelope env;
                env.dst = g.pe(rank + stride);
                env.payload = value[g.pe(rank)];
                outboxes[g.pe(rank)].push_back(std::move(env));
            }
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe)
            for (Envelope& env : inboxes[pe]) {
                value[pe] = std::move(env.payload);
                holds[pe] = true;
            }
    }
    return value;
}

std::vector<std::vector<GridMessage>> grid_alltoall(
    Machine& m, const std::vector<std::uint32_t>& dims,
    std::vector<std::vector<std::vector<std::uint8_t>>> payloads) {
    std::uint64_t prod = 1;
    for (std::uint32_t d : dims) {
        if (d == 0)
            throw std::invalid_argument("grid_alltoall: zero dimension");
        prod *= d;
    }
    if (prod != m.p())
        throw std::invalid_argument("grid_alltoall: dims must multiply to p");
    std::size_t k = dims.size();

    std::vector<std::uint32_t> stride(k, 1);
    for (std::size_t t = 1; t < k; ++t)
        stride[t] = stride[t - 1] * dims[t - 1];
    auto coord = [&](std::uint32_t pe, std::size_t t) { return (pe / stride[t]) % dims[t]; };

    struct Item {
        std::uint32_t src, dst;
        std::vector<std::uint8_t> payload;
    };
    std::vector<std::vector<Item>> holding(m.p());
    for (std::uint32_t src = 0; src < m.p(); ++src) {
        if (payloads[src].size() != m.p())
            throw std::invalid_argument("grid_alltoall: need a payload slot per destination");
        for (std::uint32_t dst = 0; dst < m.p(); ++dst) {
            if (payloads[src][dst].empty())
                continue;
            holding[src].push_back(Item{src, dst, std::move(payloads[src][dst])});
        }
    }

    for (std::size_t t = 0; t < k; ++t) {
        std::vector<std::vector<Item>> next(m.p());
        std::vector<std::vector<Envelope>> outboxes(m.p());
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            // Bundle items by their next hop: coordinate t corrected toward
            // the destination, all other coordinates kept.
            std::map<std::uint32_t, std::vector<std::uint8_t>> bundles;
            for (Item& item : holding[pe]) {
                std::int64_t shift = (std::int64_t)coord(item.dst, t) - (std::int64_t)coord(pe, t);
                std::uint32_t hop = static_cast<std::uint32_t>(pe + shift * stride[t]);
                if (hop == pe) {
                    next[pe].push_back(std::move(item));
                    continue;
                }
                auto& buf = bundles[hop];
                wire::put_u32(buf, item.src);
                wire::put_u32(buf, item.dst);
                wire::put_u32(buf, static_cast<std::uint32_t>(item.payload.size()));
                wire::put_bytes(buf, item.payload);
            }
            for (auto& [hop, buf] : bundles)
                outboxes[pe].push_back(Envelope{pe, hop, std::move(buf)});
        }
        auto inboxes = m.exchange(std::move(outboxes));
        for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
            for (const Envelope& env : inboxes[pe]) {
                wire::Reader r{env.payload};
                while (!r.done()) {
                    Item item;
                    item.src = r.u32();
                    item.dst = r.u32();
                    std::uint32_t len = r.u32();
                    auto b = r.bytes(len);
                    item.payload.assign(b.begin(), b.end());
                    next[pe].push_back(std::move(item));
                }
            }
        }
        holding = std::move(next);
    }

    std::vector<std::vector<GridMessage>> out(m.p());
    for (std::uint32_t pe = 0; pe < m.p(); ++pe) {
        std::stable_sort(holding[pe].begin(), holding[pe].end(),
                         [](const Item& a, const Item& b) { return a.src < b.src; });
        for (Item& item : holding[pe])
            out[pe].push_back(GridMessage{item.src, std::move(item.payload)});
    }
    return out;
}

std::vector<std::uint32_t> make_schedule(std::uint32_t p, std::uint32_t levels) {
    if (p == 0 || levels == 0)
        throw std::invalid_argument("make_schedule: p and levels must be positive");
    std::vector<std::uint32_t> primes;
    std::uint32_t x = p;
    for (std::uint32_t f = 2; f * f <= x; ++f)
        while (x % f == 0) {
            primes.push_back(f);
            x /= f;
        }
    if (x > 1)
        primes.push_back(x);
    std::sort(primes.rbegin(), primes.rend());

    std::vector<std::uint32_t> factors(levels, 1);
    for (std::uint32_t q : primes)
        *std::min_element(factors.begin(), factors.end()) *= q;
    std::sort(factors.rbegin(), factors.rend());
    return factors;
}

} // namespace dss
