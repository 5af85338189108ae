// Command-line front end: generate corpora, run the simulated sorters,
// verify results, and sweep benchmark grids.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dss/corpus.hpp"
#include "dss/msort.hpp"
#include "dss/pdms.hpp"
#include "dss/rquick.hpp"
#include "dss/simnet.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;

dss::CorpusFormat parse_format(const std::string& s) {
    return s == "text" ? dss::CorpusFormat::text : dss::CorpusFormat::binary;
}

std::vector<dss::PeStrings> distribute(const dss::StringArena& all, std::uint32_t p) {
    std::vector<dss::PeStrings> out(p);
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

std::vector<std::uint32_t> parse_schedule(const std::string& text) {
    std::vector<std::uint32_t> schedule;
    std::size_t at = 0;
    while (at < text.size()) {
        std::size_t x = text.find('x', at);
        std::string part = text.substr(at, x == std::string::npos ? x : x - at);
        schedule.push_back(static_cast<std::uint32_t>(std::stoul(part)));
        if (x == std::string::npos)
            break;
        at = x + 1;
    }
    return schedule;
}

struct SortSettings {
    std::string algo = "ms";
    std::uint32_t pes = 1;
    std::uint32_t levels = 1;
    std::string schedule_text;
    std::string sampling = "string";
    std::uint32_t sampling_factor = 0;
    std::string assignment = "grid";
    std::string compress = "off";
    std::uint64_t seed = 1;
};

struct SortOutcome {
    bool correct = true;
    dss::StringArena sorted;           // ms / rquick
    std::vector<std::uint64_t> perm;   // pdms
    json report;
};

// Runs one simulated sort and assembles the RunReport.
SortOutcome run_sort(const dss::StringArena& input, const SortSettings& s) {
    dss::Machine machine(s.pes, s.seed);
    std::vector<std::uint32_t> schedule =
        s.schedule_text.empty() ? dss::make_schedule(s.pes, s.levels)
                                : parse_schedule(s.schedule_text);
    std::uint64_t prod = 1;
    for (std::uint32_t r : schedule)
        prod *= r;
    if (prod != s.pes)
        throw CLI::ValidationError("--schedule", "schedule must multiply to --pes");

    dss::MsConfig cfg;
    cfg.schedule = schedule;
    cfg.sampling = s.sampling == "char" ? dss::SamplingMode::character_based
                                        : dss::SamplingMode::string_based;
    cfg.sampling_factor = s.sampling_factor;
    cfg.assignment = s.assignment == "bounded" ? dss::AssignmentMode::bounded
                                               : dss::AssignmentMode::grid;
    cfg.lcp_compression = s.compress == "on";

    SortOutcome out;
    dss::MsReport ms_report;
    json doubling;

    if (s.algo == "ms") {
        auto runs = dss::ms_sort(machine, distribute(input, s.pes), cfg, &ms_report);
        for (const dss::IndexedRun& r : runs)
            for (std::size_t i = 0; i < r.size(); ++i)
                out.sorted.push_back(r.run.arena[i]);
    } else if (s.algo == "pdms") {
        dss::PdConfig pd;
        pd.bloom_dims = schedule;
        pd.hash_seed = s.seed;
        auto res = dss::pdms_sort(machine, distribute(input, s.pes), cfg, pd);
        out.perm = std::move(res.permutation);
        ms_report = res.ms_report;
        doubling["rounds"] = res.doubling.rounds;
        doubling["switch_round"] = res.doubling.switch_round;
        doubling["active_per_round"] = res.doubling.active_per_round;
        doubling["approx_total_chars"] = res.doubling.approx_total;
    } else if (s.algo == "rquick" || s.algo == "rquick+") {
        machine.begin_phase("rquick");
        auto runs = dss::rquick_sort(machine, distribute(input, s.pes), s.algo == "rquick+");
        for (const dss::IndexedRun& r : runs)
            for (std::size_t i = 0; i < r.size(); ++i)
                out.sorted.push_back(r.run.arena[i]);
    } else {
        throw CLI::ValidationError("--algo", "unknown algorithm " + s.algo);
    }

    // Internal verdict: order and conservation, without the full oracle.
    bool ordered = true;
    if (s.algo != "pdms") {
        ordered = out.sorted.size() == input.size();
        for (std::size_t i = 1; ordered && i < out.sorted.size(); ++i)
            ordered = !dss::less(out.sorted[i], out.sorted[i - 1]);
    } else {
        std::vector<bool> seen(input.size(), false);
        ordered = out.perm.size() == input.size();
        for (std::uint64_t id : out.perm) {
            if (id >= input.size() || seen[id]) {
                ordered = false;
                break;
            }
            seen[id] = true;
        }
    }
    out.correct = ordered && machine.ledger().conserved();

    json levels = json::array();
    for (const dss::LevelStats& l : ms_report.levels)
        levels.push_back({{"split", l.split},
                          {"sampling_factor", l.sampling_factor},
                          {"max_bucket_strings", l.max_bucket_strings},
                          {"max_bucket_chars", l.max_bucket_chars},
                          {"max_pe_strings", l.max_pe_strings},
                          {"max_pe_chars", l.max_pe_chars}});

    out.report = json{{"schema_version", 1},
                      {"dn_measured", dss::measure_dn_ratio(input)},
                      {"config",
                       {{"algo", s.algo},
                        {"pes", s.pes},
                        {"schedule", schedule},
                        {"sampling", s.sampling},
                        {"sampling_factor", s.sampling_factor},
                        {"assignment", s.assignment},
                        {"compress_lcp", s.compress == "on"},
                        {"seed", s.seed}}},
                      {"input", {{"strings", input.size()}, {"chars", input.char_count()}}},
                      {"verdict", out.correct ? "ok" : "failed"},
                      {"balance", {{"levels", levels},
                                   {"max_length", ms_report.max_length}}},
                      {"ledger", json::parse(machine.ledger().to_json())}};
    if (!doubling.is_null())
        out.report["doubling"] = doubling;

    // Headline ledger numbers for quick reading and the bench CSV.
    const dss::CommLedger& led = machine.ledger();
    out.report["summary"] = {
        {"bytes_exchange", led.total_bytes_sent("ms.exchange.")},
        {"msgs_max_pe", led.max_msgs_sent_per_pe("")},
        {"supersteps", led.total_supersteps("")},
        {"exchange_phases", led.phase_names("ms.exchange.").size()}};
    return out;
}

int cmd_gen(std::uint64_t n, std::uint32_t len, double dn_ratio, std::uint32_t sigma,
            std::uint64_t seed, const std::string& out, const std::string& format) {
    dss::StringArena arena = dss::generate_dn(
        {.n = n, .len = len, .dn_ratio = dn_ratio, .sigma = sigma, .seed = seed});
    dss::write_corpus(arena, out, parse_format(format));
    double measured = dss::measure_dn_ratio(arena);
    std::cout << "wrote " << arena.size() << " strings, " << arena.char_count()
              << " chars to " << out << "\n";
    std::cout << "D/N=" << measured << " (target " << dn_ratio << ")\n";
    return kExitOk;
}

int cmd_sort(const SortSettings& s, const std::string& in_path, const std::string& out_path,
             const std::string& report_path, const std::string& format) {
    dss::StringArena input = dss::read_corpus(in_path, parse_format(format));
    SortOutcome out = run_sort(input, s);
    if (s.algo == "pdms") {
        std::ofstream f(out_path, std::ios::binary);
        for (std::uint64_t id : out.perm)
            f.write(reinterpret_cast<const char*>(&id), 8);
    } else {
        dss::write_corpus(out.sorted, out_path, parse_format(format));
    }
    if (!report_path.empty()) {
        std::ofstream f(report_path);
        f << out.report.dump(2) << "\n";
    }
    std::cout << (out.correct ? "ok" : "FAILED") << ": " << input.size() << " strings, algo "
              << s.algo << ", p=" << s.pes << "\n";
    return out.correct ? kExitOk : kExitVerifyFailed;
}

int cmd_verify(const std::string& in_path, const std::string& sorted_path,
               const std::string& perm_path, const std::string& format) {
    dss::StringArena original = dss::read_corpus(in_path, parse_format(format));
    std::vector<std::uint64_t> want_perm;
    dss::SortedRun want = dss::oracle_sort(original, &want_perm);

    if (!perm_path.empty()) {
        std::ifstream f(perm_path, std::ios::binary);
        std::vector<std::uint64_t> perm;
        std::uint64_t v;
        while (f.read(reinterpret_cast<char*>(&v), 8))
            perm.push_back(v);
        if (perm.size() != original.size()) {
            std::cout << "FAIL: permutation has " << perm.size() << " entries, corpus has "
                      << original.size() << "\n";
            return kExitVerifyFailed;
        }
        for (std::size_t i = 0; i < perm.size(); ++i) {
            if (perm[i] != want_perm[i]) {
                std::cout << "FAIL: rank " << i << " holds index " << perm[i] << ", expected "
                          << want_perm[i] << "\n";
                return kExitVerifyFailed;
            }
        }
        std::cout << "ok: permutation of " << perm.size() << " strings verified\n";
        return kExitOk;
    }

    dss::StringArena sorted = dss::read_corpus(sorted_path, parse_format(format));
    if (sorted.size() != original.size()) {
        std::cout << "FAIL: size mismatch\n";
        return kExitVerifyFailed;
    }
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (dss::compare(sorted[i], want.arena[i]) != 0) {
            std::cout << "FAIL: first mismatch at index " << i << "\n";
            return kExitVerifyFailed;
        }
    }
    std::cout << "ok: " << sorted.size() << " strings verified\n";
    return kExitOk;
}

int cmd_bench(const std::string& suite, const std::string& out_dir, std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/" + suite + ".csv");
    csv << "algo,p,k,dn_ratio,n,bytes_exchange,msgs_max_pe,supersteps,max_strings_pe,"
           "max_chars_pe,exchange_phases,correct\n";

    auto cell = [&](const std::string& algo, std::uint32_t p, std::uint32_t k, double dn,
                    std::uint64_t n_per_pe) {
        std::uint64_t n = n_per_pe * p;
        dss::StringArena input = dss::generate_dn(
            {.n = n, .len = 50, .dn_ratio = dn, .sigma = 64, .seed = seed});
        SortSettings s;
        s.algo = algo;
        s.pes = p;
        s.levels = k;
        s.seed = seed;
        SortOutcome out = run_sort(input, s);

        std::uint64_t max_strings = 0, max_chars = 0;
        for (const auto& l : out.report["balance"]["levels"]) {
            max_strings = std::max<std::uint64_t>(max_strings, l["max_pe_strings"]);
            max_chars = std::max<std::uint64_t>(max_chars, l["max_pe_chars"]);
        }
        csv << algo << ',' << p << ',' << k << ',' << dn << ',' << n << ','
            << out.report["summary"]["bytes_exchange"] << ','
            << out.report["summary"]["msgs_max_pe"] << ','
            << out.report["summary"]["supersteps"] << ',' << max_strings << ',' << max_chars
            << ',' << out.report["summary"]["exchange_phases"] << ','
            << (out.correct ? 1 : 0) << '\n';

        std::string name = out_dir + "/" + suite + "_" + algo + "_p" + std::to_string(p) + "_k" +
                           std::to_string(k) + "_dn" + std::to_string(dn) + ".json";
        std::ofstream rf(name);
        rf << out.report.dump(2) << "\n";
    };

    if (suite == "weak-np") {
        for (std::uint32_t p : {4u, 16u, 64u})
            for (std::uint64_t npp : {100ull, 1000ull})
                for (const char* algo : {"ms", "pdms"})
                    cell(algo, p, p == 4 ? 1 : 2, 0.5, npp);
    } else if (suite == "weak-dn") {
        for (double dn : {0.0, 0.25, 0.5, 0.75, 1.0})
            for (std::uint32_t p : {4u, 16u, 64u})
                for (const char* algo : {"ms", "pdms"})
                    cell(algo, p, p == 4 ? 1 : 2, dn, 500);
    } else if (suite == "levels") {
        for (std::uint32_t k : {1u, 2u, 3u})
            for (const char* algo : {"ms", "pdms"})
                cell(algo, 64, k, 0.5, 200);
    } else {
        throw CLI::ValidationError("--suite", "unknown suite " + suite);
    }
    std::cout << "wrote " << out_dir << "/" << suite << ".csv\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic distributed string sorting simulator"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a corpus with a target D/N ratio");
    std::uint64_t g_n = 1000;
    std::uint32_t g_len = 50, g_sigma = 255;
    double g_dn = 0.5;
    std::uint64_t g_seed = 1;
    std::string g_out, g_format = "bin";
    gen->add_option("--n", g_n, "string count");
    gen->add_option("--len", g_len, "string length");
    gen->add_option("--dn-ratio", g_dn, "target D/N in [0,1]");
    gen->add_option("--sigma", g_sigma, "alphabet size (2..255)");
    gen->add_option("--seed", g_seed, "generator seed");
    gen->add_option("--out", g_out, "output path")->required();
    gen->add_option("--format", g_format, "bin|text")->check(CLI::IsMember({"bin", "text"}));

    // sort
    auto* sort_cmd = app.add_subcommand("sort", "sort a corpus on the simulated machine");
    SortSettings s;
    std::string s_in, s_out, s_report, s_format = "bin";
    sort_cmd->add_option("--algo", s.algo, "ms|pdms|rquick|rquick+")
        ->check(CLI::IsMember({"ms", "pdms", "rquick", "rquick+"}));
    sort_cmd->add_option("--pes", s.pes, "virtual PE count");
    sort_cmd->add_option("--levels", s.levels, "recursion levels (ms/pdms)");
    sort_cmd->add_option("--schedule", s.schedule_text, "split factors, e.g. 4x4");
    sort_cmd->add_option("--sampling", s.sampling, "string|char")
        ->check(CLI::IsMember({"string", "char"}));
    sort_cmd->add_option("--sampling-factor", s.sampling_factor, "samples per PE factor v");
    sort_cmd->add_option("--assignment", s.assignment, "grid|bounded")
        ->check(CLI::IsMember({"grid", "bounded"}));
    sort_cmd->add_option("--compress-lcp", s.compress, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    sort_cmd->add_option("--seed", s.seed, "machine seed");
    sort_cmd->add_option("--in", s_in, "input corpus")->required();
    sort_cmd->add_option("--out", s_out, "output corpus or permutation file")->required();
    sort_cmd->add_option("--report", s_report, "RunReport JSON path");
    sort_cmd->add_option("--format", s_format, "bin|text")
        ->check(CLI::IsMember({"bin", "text"}));

    // verify
    auto* verify = app.add_subcommand("verify", "check a sorted corpus or permutation");
    std::string v_in, v_sorted, v_perm, v_format = "bin";
    verify->add_option("--in", v_in, "original corpus")->required();
    verify->add_option("--sorted", v_sorted, "sorted corpus to check");
    verify->add_option("--perm", v_perm, "permutation file to check");
    verify->add_option("--format", v_format, "bin|text")->check(CLI::IsMember({"bin", "text"}));

    // bench
    auto* bench = app.add_subcommand("bench", "run a desk-scale benchmark grid");
    std::string b_suite = "weak-dn", b_out = "bench-out";
    std::uint64_t b_seed = 1;
    bench->add_option("--suite", b_suite, "weak-np|weak-dn|levels")
        ->check(CLI::IsMember({"weak-np", "weak-dn", "levels"}));
    bench->add_option("--out", b_out, "output directory");
    bench->add_option("--seed", b_seed, "seed");

    try {
        app.parse(argc, argv);
        if (gen->parsed())
            return cmd_gen(g_n, g_len, g_dn, g_sigma, g_seed, g_out, g_format);
        if (sort_cmd->parsed())
            return cmd_sort(s, s_in, s_out, s_report, s_format);
        if (verify->parsed()) {
            if (v_sorted.empty() == v_perm.empty()) {
                std::cerr << "verify: exactly one of --sorted / --perm is required\n";
                return kExitUsage;
            }
            return cmd_verify(v_in, v_sorted, v_perm, v_format);
        }
        if (bench->parsed())
            return cmd_bench(b_suite, b_out, b_seed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
