#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace jellium {

using Rng = std::mt19937_64;
using Point = Eigen::VectorXd;  // (x, y_1, ..., y_k)

struct StripParams {
    int k = 1;
    double beta = 1.0;
    double eta = 0.125;
    int n_time = 16;

    void validate() const;
    double dt() const { return beta / (n_time - 1); }
};

// Lambda = [x_lo, x_hi] x D with integer endpoints.
struct BoxDomain {
    long x_lo = 0;
    long x_hi = 1;

    BoxDomain() = default;
    BoxDomain(long lo, long hi);
    long length() const { return x_hi - x_lo; }
    // Half-open membership used by projections.
    bool contains(double x) const { return x >= x_lo && x < x_hi; }
    friend bool operator==(const BoxDomain&, const BoxDomain&) = default;
};

class Bridge {
public:
    // increments: n_time x (k+1); first and last rows must be zero.
    Bridge(Point start, Eigen::MatrixXd increments);
    static Bridge constant(Point start, int n_time);

    const Point& start() const { return start_; }
    const Eigen::MatrixXd& increments() const { return inc_; }
    int n_time() const { return static_cast<int>(inc_.rows()); }
    int k() const { return static_cast<int>(start_.size()) - 1; }

    // Path node j with transverse coordinates reduced to [0, 1).
    Point node(int j) const;
    double x_at(int j) const { return start_(0) + inc_(j, 0); }
    double x_min() const { return start_(0) + inc_.col(0).minCoeff(); }
    double x_max() const { return start_(0) + inc_.col(0).maxCoeff(); }
    bool is_constant() const { return inc_.isZero(0.0); }

    Bridge translated(double dx) const;
    friend bool operator==(const Bridge& a, const Bridge& b) {
        return a.start_ == b.start_ && a.inc_ == b.inc_;
    }

private:
    Point start_;
    Eigen::MatrixXd inc_;
};

// psi(b) = max_t |b_x(t) - b_x(0)|; exact for piecewise-linear paths.
double psi(const Bridge& b);

// Infimum over t of |b_x(t) - x0| for the piecewise-linear path.
double x_distance(const Bridge& b, double x0);

// Finite configuration in canonical (start.x, start.y...) order.
class Config {
public:
    Config() = default;
    Config(int k, double beta, int n_time, std::vector<Bridge> bridges = {});
    Config(const StripParams& p, std::vector<Bridge> bridges = {})
        : Config(p.k, p.beta, p.n_time, std::move(bridges)) {}

    int k() const { return k_; }
    double beta() const { return beta_; }
    int n_time() const { return n_time_; }
    double time(int j) const { return beta_ * j / (n_time_ - 1); }
    std::size_t size() const { return bridges_.size(); }
    bool empty() const { return bridges_.empty(); }
    const std::vector<Bridge>& bridges() const { return bridges_; }
    const Bridge& operator[](std::size_t i) const { return bridges_[i]; }
    auto begin() const { return bridges_.begin(); }
    auto end() const { return bridges_.end(); }

    // Positions of all bridges at time node j.
    std::vector<Point> positions(int j) const;
    Config with_bridges(std::vector<Bridge> bridges) const {
        return Config(k_, beta_, n_time_, std::move(bridges));
    }

    friend bool operator==(const Config& a, const Config& b) {
        return a.k_ == b.k_ && a.beta_ == b.beta_ && a.n_time_ == b.n_time_ && a.bridges_ == b.bridges_;
    }

private:
    int k_ = 1;
    double beta_ = 1.0;
    int n_time_ = 2;
    std::vector<Bridge> bridges_;
};

Config shift(const Config& config, long j);
Config project(const Config& config, const BoxDomain& dom);
// Bridges with start.x in [lo, hi) for real endpoints.
Config project_x(const Config& config, double lo, double hi);
Config merge(const Config& a, const Config& b);

BoxDomain erode(const BoxDomain& dom);
bool in_theta(const Config& config, const BoxDomain& K);
// Variant with an explicit forbidden x-interval [lo, hi].
bool in_theta(const Config& config, const BoxDomain& K, double eroded_lo, double eroded_hi);

// Discretized standard Brownian bridge increments, n_time x (k+1).
Eigen::MatrixXd sample_bridge_increments(Rng& rng, const StripParams& params);
Point sample_start(Rng& rng, double x_lo, double x_hi, int k);
Config sample_binomial(Rng& rng, long N, const StripParams& params);
Config sample_poisson(Rng& rng, const BoxDomain& dom, double intensity, const StripParams& params);

// Time-refined copy: each interval split in `factor`, nodes linearly interpolated.
Config refine_time(const Config& config, int factor);

nlohmann::json to_json(const Config& config);
Config config_from_json(const nlohmann::json& j);

}  // namespace jellium
