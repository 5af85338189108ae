#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dss {

struct Envelope {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::vector<std::uint8_t> payload;
};

// A contiguous PE range.
struct Group {
    std::uint32_t begin = 0;
    std::uint32_t size = 0;

    bool contains(std::uint32_t pe) const { return pe >= begin && pe < begin + size; }
    std::uint32_t rank(std::uint32_t pe) const { return pe - begin; }
    std::uint32_t pe(std::uint32_t rank) const { return begin + rank; }
};

// Per-PE, per-phase accounting of messages and bytes; the cost model. A
// message delivered to its own sender is still a message.
class CommLedger {
public:
    struct PerPe {
        std::uint64_t msgs_sent = 0;
        std::uint64_t msgs_received = 0;
        std::uint64_t bytes_sent = 0;
        std::uint64_t bytes_received = 0;
    };
    struct Phase {
        std::uint64_t supersteps = 0;
        std::vector<PerPe> pe;
    };

    explicit CommLedger(std::uint32_t p = 0) : p_(p) {}

    void record_message(const std::string& phase, std::uint32_t src, std::uint32_t dst,
                        std::uint64_t bytes);
    void record_superstep(const std::string& phase);

    const std::map<std::string, Phase>& phases() const { return phases_; }
    bool has_phase(const std::string& name) const { return phases_.count(name) > 0; }
    const Phase& phase(const std::string& name) const { return phases_.at(name); }

    // Aggregates over all phases whose name starts with `prefix`.
    std::uint64_t total_bytes_sent(const std::string& prefix = "") const;
    std::uint64_t total_supersteps(const std::string& prefix = "") const;
    std::uint64_t max_msgs_sent_per_pe(const std::string& prefix = "") const;
    std::uint64_t max_msgs_received_per_pe(const std::string& prefix = "") const;
    std::vector<std::string> phase_names(const std::string& prefix = "") const;

    // Per phase, global bytes/messages sent must equal those received.
    bool conserved() const;

    // {"phases": {name: {"supersteps": n, "pes": {pe: counters}}}}
    std::string to_json() const;

private:
    std::uint32_t p_;
    std::map<std::string, Phase> phases_;
    Phase& touch(const std::string& name);
};

// Deterministic simulated distributed machine: p virtual PEs communicating
// through barrier-delimited supersteps. All cross-PE effects flow through
// Envelopes; drivers keep per-PE state in plain arrays indexed by PE id.
class Machine {
public:
    Machine(std::uint32_t p, std::uint64_t seed) : p_(p), seed_(seed), ledger_(p) {}

    std::uint32_t p() const { return p_; }
    std::uint64_t seed() const { return seed_; }
    CommLedger& ledger() { return ledger_; }
    const CommLedger& ledger() const { return ledger_; }

    void begin_phase(std::string name) { phase_ = std::move(name); }
    const std::string& phase() const { return phase_; }

    // Delivers all envelopes produced in this superstep before the next one
    // begins. Inboxes are ordered by (src, send order). Throws on dst >= p.
    std::vector<std::vector<Envelope>> exchange(std::vector<std::vector<Envelope>> outboxes);

    // PE-local generator, seeded from (machine seed, pe, current phase).
    std::mt19937_64 pe_rng(std::uint32_t pe) const;

private:
    std::uint32_t p_;
    std::uint64_t seed_;
    std::string phase_ = "default";
    CommLedger ledger_;
};

// One superstep: every PE's step function produces its outgoing envelopes;
// the returned inboxes hold what each PE received.
std::vector<std::vector<Envelope>> run_superstep(
    Machine& m, const std::function<std::vector<Envelope>(std::uint32_t)>& per_pe_step);

namespace wire {

inline void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(&v),
               reinterpret_cast<const std::uint8_t*>(&v) + 4);
}
inline void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(&v),
               reinterpret_cast<const std::uint8_t*>(&v) + 8);
}
inline void put_bytes(std::vector<std::uint8_t>& buf, std::span<const std::uint8_t> b) {
    buf.insert(buf.end(), b.begin(), b.end());
}

struct Reader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;

    std::uint32_t u32() {
        std::uint32_t v;
        std::memcpy(&v, data.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        std::memcpy(&v, data.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        auto s = data.subspan(pos, n);
        pos += n;
        return s;
    }
    bool done() const { return pos == data.size(); }
};

} // namespace wire

// Collectives over equal-sized disjoint groups, executed in shared
// supersteps via binomial trees (broadcast, gather) and a doubling scan.
// Each primitive advances the superstep counter by ceil(log2(group size))
// per tree pass.

// Exclusive prefix sums of per-PE values, independently within each group.
std::vector<std::uint64_t> prefix_sum(Machine& m, const std::vector<Group>& groups,
                                      const std::vector<std::uint64_t>& local);
// Element-wise vector flavor; all vectors in a group must share a size.
std::vector<std::vector<std::uint64_t>> prefix_sum_vec(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint64_t>>& local);

enum class ReduceOp { sum, max, min };

std::vector<std::uint64_t> allreduce(Machine& m, const std::vector<Group>& groups,
                                     const std::vector<std::uint64_t>& local, ReduceOp op);
std::vector<std::vector<std::uint64_t>> allreduce_vec(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint64_t>>& local, ReduceOp op);

// Every group member ends up holding all members' payloads in rank order.
std::vector<std::vector<std::vector<std::uint8_t>>> allgather_bytes(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint8_t>>& local);

// Group-local rank 0 broadcasts its payload to the whole group.
std::vector<std::vector<std::uint8_t>> broadcast_bytes(
    Machine& m, const std::vector<Group>& groups,
    const std::vector<std::vector<std::uint8_t>>& root_payload);

// k-dimensional grid all-to-all: payload[src][dst] travels k rounds, fixing
// one grid coordinate per round. Per round each PE sends at most dim_t - 1
// messages (a bundle per row neighbor; local hand-offs are free).
struct GridMessage {
    std::uint32_t src = 0;
    std::vector<std::uint8_t> payload;
};
std::vector<std::vector<GridMessage>> grid_alltoall(
    Machine& m, const std::vector<std::uint32_t>& dims,
    std::vector<std::vector<std::vector<std::uint8_t>>> payloads);

// Splits p into `levels` near-equal factors (descending), product exactly p.
std::vector<std::uint32_t> make_schedule(std::uint32_t p, std::uint32_t levels);

} // namespace dss
