#include "runner.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jellium/coupling.hpp"
#include "jellium/empirical.hpp"
#include "jellium/energy.hpp"
#include "jellium/gibbs.hpp"
#include "jellium/screening.hpp"

namespace jellium::cli {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> kRuns = {"sample", "mcmc", "verify-split", "imbalance", "screen", "couple", "estimate"};

namespace {

json block_defaults(const std::string& run) {
    if (run == "sample") return {{"N", 8}, {"reference", "binomial"}, {"count", 1}};
    if (run == "mcmc")
        return {{"N", 4},
                {"steps", 2000},
                {"thin", 10},
                {"burnin", 500},
                {"chains", 1},
                {"interaction", 1.0},
                {"verify_every", 1000},
                {"proposal", {{"p_relocate", 0.4}, {"p_repath", 0.4}, {"p_local", 0.2}, {"sigma_x", 0.3}}}};
    if (run == "verify-split") return {{"N", 2}, {"h", 1.0 / 64}, {"reference", "binomial"}};
    if (run == "imbalance") return {{"N", 8}, {"x_minus", 2.0}, {"x_plus", nullptr}};
    if (run == "screen")
        return {{"R", 40},         {"M", 3.0},          {"eps", 0.04},     {"xi", 2.0},
                {"h", 1.0 / 32},   {"samples", 1},      {"source", "binomial"},
                {"placement", "centered"}, {"continuum_check", true}};
    if (run == "couple")
        return {{"R", 2},           {"delta", 0.4},   {"eps", 0.01},   {"M", 3.0},
                {"xi", 2.0},        {"beta", 1e-3},   {"n_time", 8},   {"metric", "x_only"},
                {"force_independent", false}, {"samples", 1000}};
    if (run == "estimate")
        return {{"R", 4},           {"m", 4},           {"M", 3.0},          {"eps", 0.04},
                {"xi", 2.0},        {"steps", 4000},    {"thin", 40},        {"burnin", 1000},
                {"interaction", 1.0}, {"feature_resolution", 2}, {"batches", 10}, {"min_samples", 100},
                {"quadrature_cell", 0.25}, {"quadrature_order", 4}};
    throw ConfigError("unknown run '" + run + "'; expected one of sample, mcmc, verify-split, imbalance, "
                      "screen, couple, estimate");
}

std::string block_key(const std::string& run) {
    std::string k = run;
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

void merge_checked(json& target, const json& raw, const std::string& path) {
    if (!raw.is_object()) throw ConfigError("'" + path + "' must be an object");
    for (const auto& [key, value] : raw.items()) {
        const std::string name = path.empty() ? key : path + "." + key;
        if (!target.contains(key)) throw ConfigError("unknown config key '" + name + "'");
        json& slot = target[key];
        if (slot.is_object()) {
            merge_checked(slot, value, name);
        } else if (slot.is_null()) {
            if (!value.is_null() && !value.is_number()) throw ConfigError("'" + name + "' must be a number or null");
            slot = value;
        } else if (slot.is_number_integer()) {
            if (!value.is_number_integer()) throw ConfigError("'" + name + "' must be an integer");
            slot = value;
        } else if (slot.is_number()) {
            if (!value.is_number()) throw ConfigError("'" + name + "' must be a number");
            slot = value.get<double>();
        } else if (slot.is_boolean()) {
            if (!value.is_boolean()) throw ConfigError("'" + name + "' must be a boolean");
            slot = value;
        } else {
            if (!value.is_string()) throw ConfigError("'" + name + "' must be a string");
            slot = value;
        }
    }
}

StripParams model_params(const json& m) {
    StripParams p;
    p.k = m.at("k").get<int>();
    p.beta = m.at("beta").get<double>();
    p.eta = m.at("eta").get<double>();
    p.n_time = m.at("n_time").get<int>();
    p.validate();
    return p;
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw ConfigError("cannot write " + tmp.string());
        os << content;
    }
    fs::rename(tmp, path);
}

struct Outputs {
    fs::path dir;
    std::vector<std::string> names;
    void write(const std::string& name, const std::string& content) {
        write_atomic(dir / name, content);
        names.push_back(name);
    }
    void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
};

Config reference_sample(Rng& rng, const std::string& ref, long N, const StripParams& sp) {
    if (ref == "binomial") return sample_binomial(rng, N, sp);
    if (ref == "poisson") return sample_poisson(rng, BoxDomain(0, N), 1.0, sp);
    throw ConfigError("reference must be 'binomial' or 'poisson'");
}

std::string paths_csv(const std::vector<Config>& samples) {
    std::ostringstream os;
    os.precision(17);
    os << "sample,bridge,node,t,x,y\n";
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const Config& c = samples[s];
        for (std::size_t b = 0; b < c.size(); ++b)
            for (int j = 0; j < c.n_time(); ++j) {
                const Point p = c[b].node(j);
                os << s << ',' << b << ',' << j << ',' << c.time(j) << ',' << c[b].x_at(j) << ','
                   << (p.size() > 1 ? p(1) : 0.0) << '\n';
            }
    }
    return os.str();
}

void run_sample(const json& cfg, const StripParams& sp, Rng& rng, Outputs& out) {
    const json& b = cfg.at("sample");
    const long N = b.at("N").get<long>();
    const int count = b.at("count").get<int>();
    if (count < 1) throw ConfigError("sample.count must be >= 1");
    std::vector<Config> samples;
    json arr = json::array();
    for (int i = 0; i < count; ++i) {
        samples.push_back(reference_sample(rng, b.at("reference").get<std::string>(), N, sp));
        arr.push_back(to_json(samples.back()));
    }
    out.write("samples.json", arr);
    out.write("paths.csv", paths_csv(samples));
}

ChainOptions chain_options(const json& b, std::uint64_t seed) {
    ChainOptions o;
    o.steps = b.at("steps").get<std::int64_t>();
    o.thin = b.at("thin").get<std::int64_t>();
    o.burnin = b.at("burnin").get<std::int64_t>();
    o.interaction = b.at("interaction").get<double>();
    if (b.contains("verify_every")) o.verify_every = b.at("verify_every").get<int>();
    o.seed = seed;
    o.validate();
    return o;
}

void run_mcmc(const json& cfg, const StripParams& sp, Rng& rng, std::uint64_t seed, Outputs& out) {
    const json& b = cfg.at("mcmc");
    const long N = b.at("N").get<long>();
    const int chains = b.at("chains").get<int>();
    if (chains < 1) throw ConfigError("mcmc.chains must be >= 1");
    ProposalMix mix;
    const json& p = b.at("proposal");
    mix.p_relocate = p.at("p_relocate").get<double>();
    mix.p_repath = p.at("p_repath").get<double>();
    mix.p_local = p.at("p_local").get<double>();
    mix.sigma_x = p.at("sigma_x").get<double>();
    mix.validate();
    const GreensKernel kernel(sp);
    const Config init = sample_binomial(rng, N, sp);
    const std::vector<ChainResult> res = run_chains(init, chains, chain_options(b, seed), mix, kernel);

    std::ostringstream os;
    os.precision(17);
    os << "chain,index,energy\n";
    json summary = json::array();
    for (std::size_t c = 0; c < res.size(); ++c) {
        for (std::size_t i = 0; i < res[c].energies.size(); ++i) os << c << ',' << i << ',' << res[c].energies[i] << '\n';
        summary.push_back({{"chain", c}, {"acceptance_rate", res[c].acceptance_rate}, {"samples", res[c].samples.size()}});
    }
    out.write("trace.csv", os.str());
    out.write("summary.json", summary);
    if (!res.empty() && !res[0].samples.empty()) out.write("final_state.json", to_json(res[0].samples.back()));
}

void run_verify_split(const json& cfg, const StripParams& sp, Rng& rng, Outputs& out) {
    const json& b = cfg.at("verify_split");
    const long N = b.at("N").get<long>();
    const Config c = reference_sample(rng, b.at("reference").get<std::string>(), N, sp);
    const BoxDomain dom(0, N);
    const EnergyReport r = verify_split(c, dom, GreensKernel(sp), Grid(dom, b.at("h").get<double>()));
    json j = to_json(r);
    j["config"] = to_json(c);
    out.write("report.json", j);
}

void run_imbalance(const json& cfg, const StripParams& sp, Rng& rng, Outputs& out) {
    const json& b = cfg.at("imbalance");
    const long N = b.at("N").get<long>();
    const Config c = sample_binomial(rng, N, sp);
    const BoxDomain dom(0, N);
    const GreensKernel kernel(sp);
    json j;
    j["one_sided"] = to_json(check_imbalance_bound(c, dom, kernel, b.at("x_minus").get<double>()));
    if (!b.at("x_plus").is_null())
        j["two_sided"] =
            to_json(check_imbalance_bound2(c, dom, kernel, b.at("x_minus").get<double>(), b.at("x_plus").get<double>()));
    j["config"] = to_json(c);
    out.write("report.json", j);
}

void run_screen(const json& cfg, const StripParams& sp, Rng& rng, Outputs& out) {
    const json& b = cfg.at("screen");
    ScreeningParams params;
    const long R = b.at("R").get<long>();
    params.reg = RegularityParams::relaxed(b.at("M").get<double>(), b.at("eps").get<double>(), R,
                                           b.at("xi").get<double>());
    params.h = b.at("h").get<double>();
    params.continuum_check = b.at("continuum_check").get<bool>();
    const std::string placement = b.at("placement").get<std::string>();
    if (placement == "printed") params.placement = CssPlacement::printed;
    else if (placement != "centered") throw ConfigError("screen.placement must be 'centered' or 'printed'");
    params.validate();
    const int n = b.at("samples").get<int>();
    if (n < 1) throw ConfigError("screen.samples must be >= 1");
    const std::string source = b.at("source").get<std::string>();
    std::vector<Config> configs;
    for (int i = 0; i < n; ++i) {
        if (source == "crystal") configs.push_back(crystal(R, Config(sp)));
        else configs.push_back(reference_sample(rng, source, R, sp));
    }
    const GreensKernel kernel(sp);
    std::ostringstream os;
    os.precision(17);
    os << "sample,regular,plan_failed,x0,x_plus,energy_lhs,phi0,phi_emp,passed\n";
    json all = json::array();
    for (int i = 0; i < n; ++i) {
        const ScreeningResult r = screening_report(configs[i], params, kernel);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        os << i << ',' << int(r.cert.regular_branch) << ',' << int(r.cert.plan_failed) << ','
           << (r.plan ? r.plan->x0() : nan) << ',' << (r.plan ? r.plan->x_plus() : nan) << ',' << r.cert.energy_lhs
           << ',' << r.cert.phi0 << ',' << r.cert.phi_emp << ',' << int(r.cert.passed()) << '\n';
        all.push_back(to_json(r));
    }
    out.write("screening.csv", os.str());
    out.write("results.json", all);
}

void run_couple(const json& cfg, const StripParams& model, std::uint64_t seed, Outputs& out) {
    const json& b = cfg.at("couple");
    CouplingParams p;
    p.R = b.at("R").get<long>();
    p.delta = b.at("delta").get<double>();
    p.eps = b.at("eps").get<double>();
    p.M = b.at("M").get<double>();
    p.xi = b.at("xi").get<double>();
    p.strip = model;
    p.strip.beta = b.at("beta").get<double>();
    p.strip.n_time = b.at("n_time").get<int>();
    const std::string metric = b.at("metric").get<std::string>();
    if (metric == "euclidean") p.metric = FcMetric::euclidean;
    else if (metric != "x_only") throw ConfigError("couple.metric must be 'x_only' or 'euclidean'");
    p.force_independent = b.at("force_independent").get<bool>();
    p.validate();
    const FcEstimate est = estimate_fc_probability(p, b.at("samples").get<long>(), seed, GreensKernel(p.strip));
    out.write("coupling.csv", fc_csv(p, est));
    json s = to_json(est);
    s["delta1"] = p.delta1();
    out.write("summary.json", s);
}

void run_estimate(const json& cfg, const StripParams& sp, Rng& rng, std::uint64_t seed, Outputs& out) {
    const json& b = cfg.at("estimate");
    const long R = b.at("R").get<long>(), m = b.at("m").get<long>(), N = R * m;
    const double M = b.at("M").get<double>(), eps = b.at("eps").get<double>();
    const GreensKernel kernel(sp);
    const ChainResult chain = run_chain(sample_binomial(rng, N, sp), chain_options(b, seed), ProposalMix{}, kernel);
    std::vector<Config> windows;
    for (const Config& c : chain.samples)
        for (const auto& atom : block_average(c, N, R, m).atoms) windows.push_back(atom.first);
    const int batches = b.at("batches").get<int>();
    TruncatedEnergyParams tp;
    tp.quadrature = {b.at("quadrature_cell").get<double>(), b.at("quadrature_order").get<int>()};
    tp.validate();
    const std::vector<double> energies = truncated_energies(windows, R, kernel, tp);
    const MeanCI w = estimate_wmr(energies, M, R, batches);
    EntropyOptions eo;
    eo.batches = batches;
    eo.seed = seed;
    eo.min_samples = b.at("min_samples").get<std::size_t>();
    const EntropyEstimate ent = estimate_entropy(windows, R, b.at("feature_resolution").get<int>(), eo);
    EstimateRow row;
    row.M = M;
    row.eps = eps;
    row.R = R;
    row.estimate = FreeEnergyEstimate::combine(w, MeanCI{ent.value, ent.half_width}, sp.beta);
    out.write("estimate.csv", estimate_table_csv({row}));
    out.write("summary.json", json{{"windows", windows.size()},
                                   {"acceptance_rate", chain.acceptance_rate},
                                   {"w_m_r", row.estimate.w_m_r},
                                   {"ci_w", row.estimate.ci_w},
                                   {"ent_hat", ent.value},
                                   {"ent_raw", ent.raw},
                                   {"ci_ent", row.estimate.ci_ent},
                                   {"f_hat", row.estimate.f_hat},
                                   {"ci_f", row.estimate.ci_f}});
}

}  // namespace

json resolve_config(const json& raw_in, const std::string& run) {
    json defaults = {{"run", run},
                     {"seed", 1},
                     {"output_dir", "out"},
                     {"model", {{"k", 1}, {"beta", 1.0}, {"eta", 0.125}, {"n_time", 16}}},
                     {block_key(run), block_defaults(run)}};
    const json& raw = raw_in.is_object() && raw_in.contains("resolved_config") ? raw_in.at("resolved_config") : raw_in;
    if (raw.is_object() && raw.contains("run") && raw.at("run") != run)
        throw ConfigError("config is for run '" + raw.at("run").dump() + "', not '" + run + "'");
    merge_checked(defaults, raw, "");
    return defaults;
}

std::vector<std::string> run_experiment(const json& cfg, const std::string& run) {
    const auto t0 = std::chrono::steady_clock::now();
    const StripParams sp = model_params(cfg.at("model"));
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    Outputs out;
    out.dir = cfg.at("output_dir").get<std::string>();
    fs::create_directories(out.dir);
    Rng rng(seed);
    if (run == "sample") run_sample(cfg, sp, rng, out);
    else if (run == "mcmc") run_mcmc(cfg, sp, rng, seed, out);
    else if (run == "verify-split") run_verify_split(cfg, sp, rng, out);
    else if (run == "imbalance") run_imbalance(cfg, sp, rng, out);
    else if (run == "screen") run_screen(cfg, sp, rng, out);
    else if (run == "couple") run_couple(cfg, sp, seed, out);
    else if (run == "estimate") run_estimate(cfg, sp, rng, seed, out);
    else throw ConfigError("unknown run '" + run + "'");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest = {{"version", JELLIUM_VERSION},
                     {"run", run},
                     {"resolved_config", cfg},
                     {"outputs", out.names},
                     {"wall_time_s", wall}};
    out.write("manifest.json", manifest);
    return out.names;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Jellium path-measure experiments"};
    std::string run, config_path, out_dir;
    std::uint64_t seed = 0;
    std::int64_t steps = 0, thin = 0, burnin = 0;
    app.add_option("run", run, "Experiment to run")->required()->check(CLI::IsMember(kRuns));
    app.add_option("--config", config_path, "JSON config file (a manifest also works)");
    auto* seed_opt = app.add_option("--seed", seed, "Override seed");
    auto* out_opt = app.add_option("--out", out_dir, "Override output_dir");
    auto* steps_opt = app.add_option("--steps", steps, "Override chain steps (mcmc, estimate)");
    auto* thin_opt = app.add_option("--thin", thin, "Override chain thinning (mcmc, estimate)");
    auto* burnin_opt = app.add_option("--burnin", burnin, "Override burn-in (mcmc, estimate)");
    app.set_version_flag("--version", std::string(JELLIUM_VERSION));

    auto fail = [&](const std::string& kind, const std::string& msg, int code) {
        err << json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << '\n';
        return code;
    };
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        return fail("UsageError", e.what(), 1);
    }

    json cfg;
    try {
        json raw = json::object();
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) throw ConfigError("cannot open config '" + config_path + "'");
            try {
                raw = json::parse(is);
            } catch (const json::parse_error& e) {
                throw ConfigError(std::string("malformed JSON: ") + e.what());
            }
        }
        cfg = resolve_config(raw, run);
        if (*seed_opt) cfg["seed"] = seed;
        if (*out_opt) cfg["output_dir"] = out_dir;
        const std::string bk = block_key(run);
        for (auto [opt, key, value] : {std::tuple{steps_opt, "steps", steps}, std::tuple{thin_opt, "thin", thin},
                                       std::tuple{burnin_opt, "burnin", burnin}}) {
            if (!*opt) continue;
            if (!cfg[bk].contains(key)) throw ConfigError(std::string("--") + key + " does not apply to " + run);
            cfg[bk][key] = value;
        }
    } catch (const Error& e) {
        return fail(e.kind(), e.what(), 1);
    }

    try {
        const auto names = run_experiment(cfg, run);
        out << json{{"run", run}, {"output_dir", cfg.at("output_dir")}, {"outputs", names}}.dump() << '\n';
        return 0;
    } catch (const Error& e) {
        return fail(e.kind(), e.what(), e.numerical() ? 2 : 1);
    } catch (const json::exception& e) {
        return fail("ConfigError", e.what(), 1);
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), 1);
    }
}

}  // namespace jellium::cli
