#include "dss/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace dss {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'S', '1'};

// Smallest block length b with sigma^b >= n.
std::uint32_t min_block_len(std::uint64_t n, std::uint32_t sigma) {
    std::uint32_t b = 1;
    std::uint64_t space = sigma;
    while (space < n) {
        if (space > (std::uint64_t{1} << 62) / sigma)
            return b + 1; // space already dwarfs any realistic n
        space *= sigma;
        ++b;
    }
    return b;
}

// sigma^b capped at `cap`.
std::uint64_t pow_capped(std::uint32_t sigma, std::uint32_t b, std::uint64_t cap) {
    std::uint64_t v = 1;
    for (std::uint32_t i = 0; i < b; ++i) {
        if (v >= (cap + sigma - 1) / sigma)
            return cap;
        v *= sigma;
    }
    return std::min(v, cap);
}

} // namespace

StringArena generate_dn(const DnSpec& spec) {
    if (spec.sigma < 2 || spec.sigma > 255)
        throw std::invalid_argument("generate_dn: sigma must be in 2..255");
    if (spec.len < 1)
        throw std::invalid_argument("generate_dn: len must be >= 1");
    if (spec.dn_ratio < 0.0 || spec.dn_ratio > 1.0)
        throw std::invalid_argument("generate_dn: dn_ratio must be in [0, 1]");

    StringArena out;
    if (spec.n == 0)
        return out;

    std::uint32_t min_b = min_block_len(spec.n, spec.sigma);
    if (min_b > spec.len)
        throw std::invalid_argument("generate_dn: n unique strings do not fit length len");
    std::uint32_t block =
        std::clamp<std::uint32_t>(static_cast<std::uint32_t>(std::ceil(spec.dn_ratio * spec.len)),
                                  min_b, spec.len);

    // Draw n distinct integers from a dense range: adjacent sorted values
    // then differ only in the last block digits, which concentrates D in the
    // block and drives the realized ratio to block/len.
    std::uint64_t range = pow_capped(spec.sigma, block, 2 * spec.n);
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<std::uint64_t> dist(0, range - 1);
    std::unordered_set<std::uint64_t> seen;
    std::vector<std::uint64_t> values;
    values.reserve(spec.n);
    while (values.size() < spec.n) {
        std::uint64_t v = dist(rng);
        if (seen.insert(v).second)
            values.push_back(v);
    }

    std::vector<std::uint8_t> buf(spec.len, 1);
    out.reserve(spec.n, std::uint64_t{spec.n} * spec.len);
    for (std::uint64_t v : values) {
        std::uint64_t x = v;
        for (std::uint32_t d = 0; d < block; ++d) {
            buf[block - 1 - d] = static_cast<std::uint8_t>(1 + x % spec.sigma);
            x /= spec.sigma;
        }
        std::fill(buf.begin() + block, buf.end(), std::uint8_t{1});
        out.push_back(Bytes{buf.data(), buf.size()});
    }
    return out;
}

void write_corpus(const StringArena& arena, const std::filesystem::path& path,
                  CorpusFormat format) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("write_corpus: cannot open " + path.string());
    if (format == CorpusFormat::binary) {
        f.write(kMagic, 4);
        std::uint64_t n = arena.size();
        f.write(reinterpret_cast<const char*>(&n), 8);
        for (std::size_t i = 0; i < arena.size(); ++i) {
            Bytes s = arena[i];
            std::uint32_t len = static_cast<std::uint32_t>(s.size());
            f.write(reinterpret_cast<const char*>(&len), 4);
            f.write(reinterpret_cast<const char*>(s.data()), len);
        }
    } else {
        for (std::size_t i = 0; i < arena.size(); ++i) {
            Bytes s = arena[i];
            if (std::find(s.begin(), s.end(), std::uint8_t{'\n'}) != s.end())
                throw std::runtime_error("write_corpus: string contains newline; use binary");
            f.write(reinterpret_cast<const char*>(s.data()), s.size());
            f.put('\n');
        }
    }
    if (!f)
        throw std::runtime_error("write_corpus: write failed for " + path.string());
}

StringArena read_corpus(const std::filesystem::path& path, CorpusFormat format) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("read_corpus: cannot open " + path.string());
    StringArena out;
    if (format == CorpusFormat::binary) {
        char magic[4];
        f.read(magic, 4);
        std::uint64_t n = 0;
        f.read(reinterpret_cast<char*>(&n), 8);
        if (!f || std::memcmp(magic, kMagic, 4) != 0)
            throw std::runtime_error("read_corpus: malformed header in " + path.string());
        std::vector<std::uint8_t> buf;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint32_t len = 0;
            f.read(reinterpret_cast<char*>(&len), 4);
            if (!f || len == 0)
                throw std::runtime_error("read_corpus: malformed record in " + path.string());
            buf.resize(len);
            f.read(reinterpret_cast<char*>(buf.data()), len);
            if (!f)
                throw std::runtime_error("read_corpus: truncated body in " + path.string());
            out.push_back(Bytes{buf.data(), buf.size()}); // rejects embedded 0
        }
        if (f.get() != std::ifstream::traits_type::eof())
            throw std::runtime_error("read_corpus: trailing data in " + path.string());
    } else {
        std::string line;
        std::uint64_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty())
                throw std::runtime_error("read_corpus: empty line " + std::to_string(lineno) +
                                         " in " + path.string());
            out.push_back(std::string_view{line});
        }
    }
    return out;
}

SortedRun oracle_sort(const StringArena& arena, std::vector<std::uint64_t>* perm) {
    std::vector<std::uint64_t> idx(arena.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint64_t a, std::uint64_t b) {
        return compare(arena[a], arena[b]) < 0;
    });
    SortedRun out;
    out.arena.reserve(arena.size(), arena.char_count());
    out.lcp.resize(arena.size(), 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.arena.push_back(arena[idx[i]]);
        if (i > 0)
            out.lcp[i] = lcp(arena[idx[i - 1]], arena[idx[i]]);
    }
    if (perm)
        *perm = std::move(idx);
    return out;
}

double measure_dn_ratio(const StringArena& arena) {
    if (arena.size() == 0 || arena.char_count() == 0)
        return 0.0;
    DistPrefixes d = distinguishing_prefixes(oracle_sort(arena));
    return static_cast<double>(d.total) / static_cast<double>(arena.char_count());
}

} // namespace dss
