#include "jellium/core_model.hpp"

#include <algorithm>
#include <cmath>

#include "jellium/errors.hpp"

namespace jellium {

void StripParams::validate() const {
    if (k < 1) throw InvalidParams("k must be >= 1");
    if (!(beta > 0.0)) throw InvalidParams("beta must be positive");
    if (!(eta > 0.0 && eta < 0.25)) throw InvalidParams("eta must lie in (0, 1/4)");
    if (n_time < 2) throw InvalidParams("n_time must be >= 2");
}

BoxDomain::BoxDomain(long lo, long hi) : x_lo(lo), x_hi(hi) {
    if (lo >= hi) throw InvalidParams("BoxDomain requires x_lo < x_hi");
}

Bridge::Bridge(Point start, Eigen::MatrixXd increments) : start_(std::move(start)), inc_(std::move(increments)) {
    if (inc_.rows() < 2 || inc_.cols() != start_.size())
        throw InvalidParams("bridge increments must be n_time x (k+1)");
    if (!inc_.row(0).isZero(0.0) || !inc_.row(inc_.rows() - 1).isZero(0.0))
        throw InvalidParams("bridge must close: first and last increments are zero");
    for (int c = 1; c < start_.size(); ++c) start_(c) -= std::floor(start_(c));
}

Bridge Bridge::constant(Point start, int n_time) {
    const Eigen::Index d = start.size();
    return Bridge(std::move(start), Eigen::MatrixXd::Zero(n_time, d));
}

Point Bridge::node(int j) const {
    Point p = start_ + inc_.row(j).transpose();
    for (int c = 1; c < p.size(); ++c) p(c) -= std::floor(p(c));
    return p;
}

Bridge Bridge::translated(double dx) const {
    Point s = start_;
    s(0) += dx;
    return Bridge(std::move(s), inc_);
}

double psi(const Bridge& b) { return b.increments().col(0).cwiseAbs().maxCoeff(); }

double x_distance(const Bridge& b, double x0) {
    const double lo = b.x_min(), hi = b.x_max();
    if (x0 < lo) return lo - x0;
    if (x0 > hi) return x0 - hi;
    return 0.0;
}

namespace {

bool start_less(const Bridge& a, const Bridge& b) {
    const Point& p = a.start();
    const Point& q = b.start();
    for (int c = 0; c < p.size(); ++c) {
        if (p(c) < q(c)) return true;
        if (p(c) > q(c)) return false;
    }
    return false;
}

}  // namespace

Config::Config(int k, double beta, int n_time, std::vector<Bridge> bridges)
    : k_(k), beta_(beta), n_time_(n_time), bridges_(std::move(bridges)) {
    if (k < 1 || !(beta > 0.0) || n_time < 2) throw InvalidParams("invalid configuration parameters");
    for (const Bridge& b : bridges_) {
        if (b.k() != k || b.n_time() != n_time) throw InvalidParams("bridge shape does not match configuration");
    }
    std::sort(bridges_.begin(), bridges_.end(), start_less);
    for (std::size_t i = 1; i < bridges_.size(); ++i) {
        if (!start_less(bridges_[i - 1], bridges_[i]))
            throw InvalidParams("bridge starting points must be pairwise distinct");
    }
}

std::vector<Point> Config::positions(int j) const {
    std::vector<Point> out;
    out.reserve(bridges_.size());
    for (const Bridge& b : bridges_) out.push_back(b.node(j));
    return out;
}

Config shift(const Config& config, long j) {
    std::vector<Bridge> out;
    out.reserve(config.size());
    for (const Bridge& b : config) out.push_back(b.translated(-static_cast<double>(j)));
    return config.with_bridges(std::move(out));
}

Config project(const Config& config, const BoxDomain& dom) {
    return project_x(config, static_cast<double>(dom.x_lo), static_cast<double>(dom.x_hi));
}

Config project_x(const Config& config, double lo, double hi) {
    std::vector<Bridge> out;
    for (const Bridge& b : config) {
        const double x = b.start()(0);
        if (x >= lo && x < hi) out.push_back(b);
    }
    return config.with_bridges(std::move(out));
}

Config merge(const Config& a, const Config& b) {
    std::vector<Bridge> out = a.bridges();
    out.insert(out.end(), b.begin(), b.end());
    return a.with_bridges(std::move(out));
}

BoxDomain erode(const BoxDomain& dom) {
    const long c = static_cast<long>(std::ceil(std::pow(static_cast<double>(dom.length()), 0.875)));
    if (dom.x_hi - c <= dom.x_lo + c) throw EmptyErosion("erosion of [" + std::to_string(dom.x_lo) + ", " +
                                                         std::to_string(dom.x_hi) + "] is empty");
    return BoxDomain(dom.x_lo + c, dom.x_hi - c);
}

bool in_theta(const Config& config, const BoxDomain& K) {
    const BoxDomain km = erode(K);
    return in_theta(config, K, static_cast<double>(km.x_lo), static_cast<double>(km.x_hi));
}

bool in_theta(const Config& config, const BoxDomain& K, double eroded_lo, double eroded_hi) {
    for (const Bridge& b : config) {
        const double x = b.start()(0);
        if (x >= K.x_lo && x <= K.x_hi) continue;
        if (b.x_max() >= eroded_lo && b.x_min() <= eroded_hi) return false;
    }
    return true;
}

Eigen::MatrixXd sample_bridge_increments(Rng& rng, const StripParams& params) {
    const int n = params.n_time, d = params.k + 1;
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(n, d);
    const double dt = params.dt();
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int j = 0; j + 2 < n; ++j) {
        const double rem = params.beta - j * dt;
        const double a = 1.0 - dt / rem;
        const double sd = std::sqrt(std::max(0.0, dt * (rem - dt) / rem));
        for (int c = 0; c < d; ++c) inc(j + 1, c) = inc(j, c) * a + sd * gauss(rng);
    }
    return inc;
}

Point sample_start(Rng& rng, double x_lo, double x_hi, int k) {
    std::uniform_real_distribution<double> ux(x_lo, x_hi), uy(0.0, 1.0);
    Point p(k + 1);
    p(0) = ux(rng);
    for (int c = 1; c <= k; ++c) p(c) = uy(rng);
    return p;
}

namespace {

Config sample_uniform_bridges(Rng& rng, long count, double lo, double hi, const StripParams& params) {
    std::vector<Bridge> bridges;
    bridges.reserve(count);
    for (long i = 0; i < count; ++i) {
        Point s = sample_start(rng, lo, hi, params.k);
        bridges.emplace_back(std::move(s), sample_bridge_increments(rng, params));
    }
    return Config(params, std::move(bridges));
}

}  // namespace

Config sample_binomial(Rng& rng, long N, const StripParams& params) {
    params.validate();
    if (N < 1) throw InvalidParams("sample_binomial requires N >= 1");
    return sample_uniform_bridges(rng, N, 0.0, static_cast<double>(N), params);
}

Config sample_poisson(Rng& rng, const BoxDomain& dom, double intensity, const StripParams& params) {
    params.validate();
    if (!(intensity > 0.0)) throw InvalidParams("intensity must be positive");
    std::poisson_distribution<long> count(intensity * dom.length());
    const long n = count(rng);
    return sample_uniform_bridges(rng, n, dom.x_lo, dom.x_hi, params);
}

Config refine_time(const Config& config, int factor) {
    const int n = config.n_time(), m = (n - 1) * factor + 1;
    std::vector<Bridge> out;
    for (const Bridge& b : config) {
        Eigen::MatrixXd inc(m, b.k() + 1);
        for (int j = 0; j < m; ++j) {
            const int lo = j / factor, r = j % factor;
            if (r == 0) {
                inc.row(j) = b.increments().row(lo);
            } else {
                const double w = static_cast<double>(r) / factor;
                inc.row(j) = (1.0 - w) * b.increments().row(lo) + w * b.increments().row(lo + 1);
            }
        }
        out.emplace_back(b.start(), std::move(inc));
    }
    return Config(config.k(), config.beta(), m, std::move(out));
}

nlohmann::json to_json(const Config& config) {
    nlohmann::json bridges = nlohmann::json::array();
    for (const Bridge& b : config) {
        nlohmann::json inc = nlohmann::json::array();
        for (int j = 0; j < b.n_time(); ++j) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c <= b.k(); ++c) row.push_back(b.increments()(j, c));
            inc.push_back(std::move(row));
        }
        nlohmann::json start = nlohmann::json::array();
        for (int c = 0; c <= b.k(); ++c) start.push_back(b.start()(c));
        bridges.push_back({{"start", std::move(start)}, {"increments", std::move(inc)}});
    }
    return {{"k", config.k()}, {"beta", config.beta()}, {"n_time", config.n_time()}, {"bridges", std::move(bridges)}};
}

Config config_from_json(const nlohmann::json& j) {
    const int k = j.at("k").get<int>();
    const double beta = j.at("beta").get<double>();
    const int n_time = j.at("n_time").get<int>();
    std::vector<Bridge> bridges;
    for (const auto& jb : j.at("bridges")) {
        const auto& js = jb.at("start");
        Point s(k + 1);
        for (int c = 0; c <= k; ++c) s(c) = js.at(c).get<double>();
        const auto& ji = jb.at("increments");
        if (static_cast<int>(ji.size()) != n_time) throw InvalidParams("increments length must equal n_time");
        Eigen::MatrixXd inc(n_time, k + 1);
        for (int r = 0; r < n_time; ++r)
            for (int c = 0; c <= k; ++c) inc(r, c) = ji.at(r).at(c).get<double>();
        bridges.emplace_back(std::move(s), std::move(inc));
    }
    return Config(k, beta, n_time, std::move(bridges));
}

}  // namespace jellium
