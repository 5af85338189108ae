#include "dss/pieces.hpp"

#include <stdexcept>

#include "dss/simnet.hpp"

namespace dss {

std::vector<std::uint8_t> encode_piece(const IndexedRun& run, std::size_t begin, std::size_t end,
                                       PieceLayout layout) {
    std::vector<std::uint8_t> buf;
    std::size_t n = end - begin;
    bool with_lcp = layout.with_lcp || layout.compressed;
    buf.push_back(static_cast<std::uint8_t>((with_lcp ? 1 : 0) | (layout.compressed ? 2 : 0)));
    wire::put_u32(buf, static_cast<std::uint32_t>(n));
    for (std::size_t i = begin; i < end; ++i)
        wire::put_u64(buf, run.ids[i]);
    if (with_lcp) {
        for (std::size_t i = begin; i < end; ++i)
            wire::put_u32(buf, i == begin ? 0 : run.run.lcp[i]);
    }
    for (std::size_t i = begin; i < end; ++i) {
        Bytes s = run.run.arena[i];
        std::uint32_t skip = (layout.compressed && i > begin) ? run.run.lcp[i] : 0;
        wire::put_bytes(buf, s.subspan(skip));
        buf.push_back(0);
    }
    return buf;
}

IndexedRun decode_piece(std::span<const std::uint8_t> bytes) {
    wire::Reader r{bytes};
    std::uint8_t flags = r.bytes(1)[0];
    bool with_lcp = flags & 1;
    bool compressed = flags & 2;
    std::uint32_t n = r.u32();

    IndexedRun out;
    out.ids.resize(n);
    for (std::uint32_t i = 0; i < n; ++i)
        out.ids[i] = r.u64();
    out.run.lcp.assign(n, 0);
    if (with_lcp)
        for (std::uint32_t i = 0; i < n; ++i)
            out.run.lcp[i] = r.u32();

    std::vector<std::uint8_t> prev;
    for (std::uint32_t i = 0; i < n; ++i) {
        std::size_t start = r.pos;
        while (r.pos < bytes.size() && bytes[r.pos] != 0)
            ++r.pos;
        if (r.pos >= bytes.size())
            throw std::invalid_argument("decode_piece: truncated body");
        std::span<const std::uint8_t> body{bytes.data() + start, r.pos - start};
        ++r.pos;
        if (compressed) {
            std::uint32_t keep = out.run.lcp[i];
            if (keep > prev.size())
                throw std::invalid_argument("decode_piece: lcp exceeds predecessor");
            prev.resize(keep);
            prev.insert(prev.end(), body.begin(), body.end());
            out.run.arena.push_back(Bytes{prev.data(), prev.size()});
        } else {
            out.run.arena.push_back(body);
            if (!with_lcp && i > 0)
                out.run.lcp[i] = lcp(out.run.arena[i - 1], out.run.arena[i]);
            prev.assign(body.begin(), body.end());
        }
    }
    if (!r.done())
        throw std::invalid_argument("decode_piece: trailing bytes");
    return out;
}

IndexedRun slice_run(const IndexedRun& run, std::size_t begin, std::size_t end) {
    IndexedRun out;
    for (std::size_t i = begin; i < end; ++i) {
        out.run.arena.push_back(run.run.arena[i]);
        out.run.lcp.push_back(i == begin ? 0 : run.run.lcp[i]);
        out.ids.push_back(run.ids[i]);
    }
    return out;
}

} // namespace dss
