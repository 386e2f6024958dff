#include "jellium/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "jellium/errors.hpp"
#include "jellium/parallel.hpp"

namespace jellium {

double EmpiricalMeasure::total_weight() const {
    std::vector<double> w;
    for (const auto& a : atoms) w.push_back(a.second);
    return pairwise_sum(w);
}

EmpiricalMeasure empirical_field(const Config& config, long N) {
    if (N < 1) throw InvalidParams("empirical_field requires N >= 1");
    EmpiricalMeasure e;
    e.atoms.reserve(N);
    for (long i = 0; i < N; ++i) e.atoms.emplace_back(shift(config, i), 1.0 / double(N));
    return e;
}

EmpiricalMeasure block_average(const Config& config, long N, long R, long m) {
    if (R < 1 || m < 1 || N != m * R)
        throw BadPartition("block_average needs N = mR (N = " + std::to_string(N) + ", R = " + std::to_string(R) +
                           ", m = " + std::to_string(m) + ")");
    EmpiricalMeasure e;
    e.atoms.reserve(m);
    for (long i = 0; i < m; ++i) {
        const BoxDomain K(i * R, (i + 1) * R);
        e.atoms.emplace_back(shift(project(config, K), i * R), 1.0 / double(m));
    }
    return e;
}

// RegularityParams

RegularityParams RegularityParams::paper(double M, double eps, long R) {
    RegularityParams p;
    p.M = M;
    p.eps = eps;
    p.R = R;
    p.xi = std::pow(eps, -3.0);
    p.paper_scale = true;
    p.validate();
    return p;
}

RegularityParams RegularityParams::relaxed(double M, double eps, long R, double xi) {
    RegularityParams p;
    p.M = M;
    p.eps = eps;
    p.R = R;
    p.xi = xi;
    p.paper_scale = false;
    p.validate();
    return p;
}

bool RegularityParams::paper_constraints_hold() const {
    return M > 2.0 && eps > 0.0 && eps < 1.0 / (M * M) && double(R) > std::pow(2.0 / eps, 8.0) &&
           std::abs(xi - std::pow(eps, -3.0)) <= 1e-12 * xi;
}

void RegularityParams::validate() const {
    if (!(M > 2.0)) throw InvalidParams("M must exceed 2");
    if (!(eps > 0.0 && eps < 1.0 / (M * M))) throw InvalidParams("eps must lie in (0, 1/M^2)");
    if (R < 1) throw InvalidParams("R must be >= 1");
    if (!(xi > 0.0)) throw InvalidParams("xi must be positive");
    if (paper_scale && !paper_constraints_hold())
        throw InvalidParams("paper_scale parameters need R > (2/eps)^8 and xi = eps^-3");
}

std::pair<double, double> RegularityParams::dense_window() const {
    if (paper_scale) {
        const double r = std::pow(double(R), 0.875);
        return {2.0 * r, R - 2.0 * r};
    }
    return tame_window();
}

double RegularityParams::range_threshold() const { return std::pow(eps, -7.0 / 3.0); }

// Regularity

namespace {

double range_sum(const Config& config, const RegularityParams& p) {
    const double zeta = p.range_threshold();
    double s = 0.0;
    for (const Bridge& b : project(config, BoxDomain(0, p.R))) s += std::max(0.0, std::pow(psi(b), 7.0 / 6.0) - zeta);
    return s;
}

double surrogate_energy(const Config& window, long R, const GreensKernel& kernel, const TruncatedEnergyParams& tp) {
    try {
        return truncated_energy(window, BoxDomain(0, R), tp, kernel);
    } catch (const InfeasibleNeutrality&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

RegularityRecord classify_regular(const Config& config, const RegularityParams& params, double truncated_energy) {
    params.validate();
    RegularityRecord r;
    r.energy = truncated_energy;
    r.energy_ok = truncated_energy + params.eps < params.M * double(params.R);
    r.range_sum = range_sum(config, params);
    r.range_ok = r.range_sum < 0.5 * params.eps * double(params.R);
    r.regular = r.energy_ok && r.range_ok;
    return r;
}

RegularityRecord classify_regular(const Config& config, const RegularityParams& params, const GreensKernel& kernel,
                                  const TruncatedEnergyParams& tparams) {
    const Config w = project(config, BoxDomain(0, params.R));
    return classify_regular(config, params, surrogate_energy(w, params.R, kernel, tparams));
}

// Dense and tame abscissas

int dense_count(const Config& config, const RegularityParams& params, double x0) {
    int n = 0;
    for (const Bridge& b : project(config, BoxDomain(0, params.R)))
        if (std::abs(b.start()(0) - x0) <= params.xi) ++n;
    return n;
}

std::vector<Interval> dense_abscissas(const Config& config, const RegularityParams& params) {
    params.validate();
    const auto [wlo, whi] = params.dense_window();
    if (!(wlo <= whi)) throw InvalidParams("dense window [" + std::to_string(wlo) + ", " + std::to_string(whi) +
                                           "] is empty");
    // Count at x: +1 entering s - xi (closed), -1 after s + xi (closed).
    std::map<double, std::pair<int, int>> events;
    for (const Bridge& b : project(config, BoxDomain(0, params.R))) {
        events[b.start()(0) - params.xi].first += 1;
        events[b.start()(0) + params.xi].second += 1;
    }
    const double thr = params.dense_threshold();
    std::vector<Interval> raw;
    auto add = [&](double lo, double hi) {
        if (!raw.empty() && raw.back().hi >= lo) raw.back().hi = std::max(raw.back().hi, hi);
        else raw.push_back({lo, hi});
    };
    int after = 0;
    for (auto it = events.begin(); it != events.end(); ++it) {
        const double c = it->first;
        const int at = after + it->second.first;
        after = at - it->second.second;
        if (at >= thr) add(c, c);
        auto next = std::next(it);
        if (after >= thr && next != events.end()) add(c, next->first);
    }
    std::vector<Interval> out;
    for (const Interval& iv : raw) {
        const double lo = std::max(iv.lo, wlo), hi = std::min(iv.hi, whi);
        if (lo <= hi) out.push_back({lo, hi});
    }
    return out;
}

double total_length(const std::vector<Interval>& set) {
    double s = 0.0;
    for (const Interval& iv : set) s += iv.length();
    return s;
}

bool is_tame(double x0, const Config& config, const RegularityParams& params) {
    params.validate();
    const auto [lo, hi] = params.tame_window();
    if (!(x0 >= lo && x0 <= hi))
        throw OutOfRange("x0 = " + std::to_string(x0) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
    const auto [dlo, dhi] = params.dense_window();
    if (x0 >= dlo && x0 <= dhi && dense_count(config, params, x0) >= params.dense_threshold()) return false;
    for (const Bridge& b : config)
        if (x_distance(b, x0) <= 1.0 && std::abs(b.start()(0) - x0) > params.xi) return false;
    return true;
}

std::vector<RegularFractionRow> regular_fraction(const std::vector<Config>& samples,
                                                 const std::vector<double>& energies,
                                                 const std::vector<RegularityParams>& params_list) {
    if (samples.size() != energies.size()) throw InvalidParams("one energy per sample required");
    std::vector<RegularFractionRow> rows;
    for (const RegularityParams& p : params_list) {
        RegularFractionRow row{p.M, p.eps, p.R, 0, static_cast<long>(samples.size())};
        for (std::size_t i = 0; i < samples.size(); ++i) row.regular += classify_regular(samples[i], p, energies[i]).regular;
        rows.push_back(row);
    }
    return rows;
}

// Estimators

FreeEnergyEstimate FreeEnergyEstimate::combine(const MeanCI& w, const MeanCI& ent, double beta) {
    if (!(beta > 0.0)) throw InvalidParams("beta must be positive");
    FreeEnergyEstimate f;
    f.beta = beta;
    f.w_m_r = w.mean;
    f.ent_hat = ent.mean;
    f.f_hat = f.w_m_r + f.ent_hat / beta;
    f.ci_w = w.half_width;
    f.ci_ent = ent.half_width;
    f.ci_f = f.ci_w + f.ci_ent / beta;
    return f;
}

std::vector<double> truncated_energies(const std::vector<Config>& samples, long R, const GreensKernel& kernel,
                                       const TruncatedEnergyParams& tparams) {
    std::vector<double> out(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        out[i] = surrogate_energy(project(samples[i], BoxDomain(0, R)), R, kernel, tparams);
    });
    return out;
}

MeanCI estimate_wmr(const std::vector<double>& energies, double M, long R, int batches) {
    if (R < 1) throw InvalidParams("R must be >= 1");
    std::vector<double> v;
    v.reserve(energies.size());
    for (double e : energies) v.push_back(std::min(e / double(R), M));
    return batch_means(v, batches, 0.99);
}

namespace {

// sum p log(p / q) - (K - 1) / 2n over observed categories.
template <typename LogQ>
double corrected_kl(const std::map<long, long>& counts, long n, LogQ&& log_q) {
    if (n == 0) return 0.0;
    std::vector<double> terms;
    for (const auto& [k, c] : counts) {
        const double p = double(c) / double(n);
        terms.push_back(p * (std::log(p) - log_q(k)));
    }
    return pairwise_sum(terms) - double(counts.size() - 1) / (2.0 * double(n));
}

std::vector<double> psi_reference_edges(const Config& like, const EntropyOptions& opts) {
    StripParams p;
    p.k = like.k();
    p.beta = like.beta();
    p.n_time = like.n_time();
    Rng rng(opts.seed);
    std::vector<double> ref(opts.reference_draws);
    for (double& v : ref) v = psi(Bridge(Point::Zero(p.k + 1), sample_bridge_increments(rng, p)));
    std::sort(ref.begin(), ref.end());
    std::vector<double> edges;
    for (int j = 1; j < opts.psi_bins; ++j) edges.push_back(ref[ref.size() * j / opts.psi_bins]);
    return edges;
}

struct Features {
    double count_part = 0.0;
    double psi_part = 0.0;
};

Features features(const std::vector<Config>& samples, std::size_t lo, std::size_t hi, long R, int res,
                  const std::vector<double>& edges, int bins) {
    std::vector<Config> sub(samples.begin() + lo, samples.begin() + hi);
    Features f;
    f.count_part = count_feature_kl(sub, R, res);
    std::map<long, long> psi_counts;
    long nb = 0;
    for (const Config& c : sub)
        for (const Bridge& b : project(c, BoxDomain(0, R))) {
            ++psi_counts[std::upper_bound(edges.begin(), edges.end(), psi(b)) - edges.begin()];
            ++nb;
        }
    const double intensity = double(nb) / (double(sub.size()) * double(R));
    const double log_q = -std::log(double(bins));
    f.psi_part = intensity * corrected_kl(psi_counts, nb, [&](long) { return log_q; });
    return f;
}

}  // namespace

double count_feature_kl(const std::vector<Config>& samples, long R, int feature_resolution) {
    if (samples.empty()) return 0.0;
    const long cells = R * feature_resolution;
    const double w = 1.0 / double(feature_resolution);
    std::vector<std::map<long, long>> hist(cells);
    for (const Config& c : samples) {
        std::vector<long> n(cells, 0);
        for (const Bridge& b : project(c, BoxDomain(0, R)))
            ++n[std::min<long>(cells - 1, static_cast<long>(b.start()(0) * feature_resolution))];
        for (long j = 0; j < cells; ++j) ++hist[j][n[j]];
    }
    std::vector<double> kl(cells);
    const long ns = static_cast<long>(samples.size());
    for (long j = 0; j < cells; ++j)
        kl[j] = corrected_kl(hist[j], ns, [&](long k) { return k * std::log(w) - w - std::lgamma(k + 1.0); });
    return pairwise_sum(kl) / double(R);
}

EntropyEstimate estimate_entropy(const std::vector<Config>& samples, long R, int feature_resolution,
                                 const EntropyOptions& opts) {
    if (samples.size() < opts.min_samples)
        throw InvalidParams("estimate_entropy needs at least " + std::to_string(opts.min_samples) + " samples");
    if (R < 1 || feature_resolution < 1) throw InvalidParams("R and feature_resolution must be >= 1");
    if (opts.psi_bins < 2 || opts.batches < 2) throw InvalidParams("psi_bins and batches must be >= 2");
    const std::vector<double> edges = psi_reference_edges(samples.front(), opts);

    const std::size_t n = samples.size();
    std::vector<Features> parts(opts.batches + 1);
    parallel_for(parts.size(), [&](std::size_t b) {
        if (b == 0) parts[0] = features(samples, 0, n, R, feature_resolution, edges, opts.psi_bins);
        else
            parts[b] = features(samples, n * (b - 1) / opts.batches, n * b / opts.batches, R, feature_resolution, edges,
                                opts.psi_bins);
    });
    EntropyEstimate e;
    e.feature_resolution = feature_resolution;
    e.count_part = parts[0].count_part;
    e.psi_part = parts[0].psi_part;
    e.raw = e.count_part + e.psi_part;
    e.value = std::max(0.0, e.raw);
    double mean = 0.0, var = 0.0;
    for (int b = 1; b <= opts.batches; ++b) mean += parts[b].count_part + parts[b].psi_part;
    mean /= opts.batches;
    for (int b = 1; b <= opts.batches; ++b) {
        const double d = parts[b].count_part + parts[b].psi_part - mean;
        var += d * d;
    }
    var /= (opts.batches - 1);
    e.half_width = student_t_quantile(0.5 + 0.5 * opts.level, opts.batches - 1) * std::sqrt(var / opts.batches);
    return e;
}

std::vector<double> psi_tail_profile(const std::vector<Config>& samples, long R, const std::vector<double>& zetas) {
    std::vector<double> ps;
    for (const Config& c : samples)
        for (const Bridge& b : project(c, BoxDomain(0, R))) ps.push_back(std::pow(psi(b), 7.0 / 6.0));
    std::vector<double> out;
    for (double z : zetas) {
        std::vector<double> t;
        t.reserve(ps.size());
        for (double p : ps) t.push_back(std::max(0.0, p - z));
        out.push_back(pairwise_sum(t) / (double(samples.size()) * double(R)));
    }
    return out;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& values) {
    if (xs.size() != values.size() || xs.size() < 2) throw InvalidParams("loglog_slope needs >= 2 paired values");
    Eigen::MatrixXd A(xs.size(), 2);
    Eigen::VectorXd b(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0 && values[i] > 0.0)) throw InvalidParams("loglog_slope needs positive values");
        A(i, 0) = 1.0;
        A(i, 1) = std::log(xs[i]);
        b(i) = std::log(values[i]);
    }
    return A.colPivHouseholderQr().solve(b)(1);
}

FubRangeCheck check_fub_range(const Config& config, long R) {
    if (R < 1) throw InvalidParams("R must be >= 1");
    FubRangeCheck r;
    const double r78 = std::pow(double(R), 0.875);
    const long c = static_cast<long>(std::ceil(r78));
    for (const Bridge& b : config) r.bound += 2.0 * std::max(0.0, psi(b) - r78 + 2.0);
    if (config.empty()) return r;
    double xmin = config[0].x_min(), xmax = config[0].x_max();
    for (const Bridge& b : config) {
        xmin = std::min(xmin, b.x_min());
        xmax = std::max(xmax, b.x_max());
    }
    const long i0 = static_cast<long>(std::floor(xmin)) - R - 2, i1 = static_cast<long>(std::ceil(xmax)) + 2;
    for (long i = i0; i <= i1; ++i) {
        ++r.windows;
        if (R - 2 * c < 0) continue;  // K^- empty
        if (!in_theta(config, BoxDomain(i, i + R), double(i + c), double(i + R - c))) ++r.violations;
    }
    return r;
}

EdenseCheck check_edense(const Config& config, const RegularityParams& params, double field_energy, double eta) {
    params.validate();
    EdenseCheck r;
    const double M = params.M, eps = params.eps, R = double(params.R);
    const auto [dlo, dhi] = params.dense_window();
    double cap;
    if (params.paper_scale) {
        r.constants_ok = params.paper_constraints_hold() && dlo <= dhi;
        cap = std::pow(R, 0.875);
    } else {
        r.constants_ok = M > 2.0 && eps < 1.0 / (M * M) && dlo <= dhi && dlo - 2.0 * params.xi - eta >= 8.0 * M / R;
        cap = params.xi;
    }
    r.field_energy = field_energy;
    r.energy_ok = field_energy < M * R;
    r.range_ok = true;
    for (const Bridge& b : config) r.range_ok &= psi(b) < cap;
    r.bound = eps * R;
    if (dlo <= dhi) r.dense_measure = total_length(dense_abscissas(config, params));
    return r;
}

EdenseCheck check_edense(const Config& config, const RegularityParams& params, double eta, const FieldQuadrature& q) {
    const double e = restricted_field_energy(config, BoxDomain(0, params.R), eta, 0.0, double(params.R), q);
    return check_edense(config, params, e, eta);
}

std::string estimate_table_csv(const std::vector<EstimateRow>& rows) {
    std::ostringstream os;
    os.precision(12);
    os << "M,eps,R,w_m_r,ent_hat,f_hat,ci\n";
    for (const EstimateRow& r : rows)
        os << r.M << ',' << r.eps << ',' << r.R << ',' << r.estimate.w_m_r << ',' << r.estimate.ent_hat << ','
           << r.estimate.f_hat << ',' << r.estimate.ci_f << '\n';
    return os.str();
}

}  // namespace jellium
