#include "jellium/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <queue>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace jellium {

namespace {

GaussRule compute_gauss_legendre(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// err is floored at the round-off level of the rule (sum of |f| weights).
void gk15(const std::function<double(double)>& f, double a, double b, double& result, double& err, double& floor) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double rk = fc * kWgk[7], rg = fc * kWg[3], ra = std::abs(fc) * kWgk[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double f1 = f(c - dx), f2 = f(c + dx);
        rk += kWgk[j] * (f1 + f2);
        ra += kWgk[j] * (std::abs(f1) + std::abs(f2));
        if (j % 2 == 1) rg += kWg[j / 2] * (f1 + f2);
    }
    result = rk * h;
    err = std::abs((rk - rg) * h);
    // The absolute term stops refinement on cancellation noise where f is nearly 0.
    floor = 1000.0 * std::numeric_limits<double>::epsilon() * (ra + 1e-3) * std::abs(h);
}

struct Segment {
    double a, b, result, err, floor;
    bool operator<(const Segment& o) const { return err < o.err; }
};

Segment make_segment(const std::function<double(double)>& f, double a, double b) {
    Segment s{a, b, 0.0, 0.0, 0.0};
    gk15(f, a, b, s.result, s.err, s.floor);
    return s;
}

using i128 = __int128;

std::int64_t narrow(i128 v) {
    if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("Rational overflow");
    return static_cast<std::int64_t>(v);
}

i128 gcd128(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const i128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

Rational make(i128 n, i128 d) {
    if (d == 0) throw std::domain_error("Rational division by zero");
    if (d < 0) {
        n = -n;
        d = -d;
    }
    const i128 g = gcd128(n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    return Rational(narrow(n), narrow(d));
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::mutex m;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
    return it->second;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol,
                          int max_segments) {
    if (a == b) return 0.0;
    // Global bisection of the worst segment; the budget bounds the cost near
    // singular points that the caller did not list as breaks.
    const std::size_t budget = static_cast<std::size_t>(std::max(max_segments, 2));
    std::priority_queue<Segment> heap;
    heap.push(make_segment(f, a, b));
    double total_err = heap.top().err;
    std::vector<Segment> done;
    while (!heap.empty() && total_err > abs_tol && heap.size() + done.size() < budget) {
        const Segment s = heap.top();
        heap.pop();
        total_err -= s.err;
        const double m = 0.5 * (s.a + s.b);
        if (s.err <= s.floor || !(m > s.a && m < s.b)) {
            done.push_back(s);
            continue;
        }
        for (const Segment& c : {make_segment(f, s.a, m), make_segment(f, m, s.b)}) {
            total_err += c.err;
            heap.push(c);
        }
    }
    std::vector<double> parts;
    for (const Segment& s : done) parts.push_back(s.result);
    for (; !heap.empty(); heap.pop()) parts.push_back(heap.top().result);
    return pairwise_sum(parts);
}

double integrate_piecewise(const std::function<double(double)>& f, std::vector<double> breaks,
                           double abs_tol) {
    std::sort(breaks.begin(), breaks.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] > breaks[i]) sum += integrate_adaptive(f, breaks[i], breaks[i + 1], abs_tol);
    }
    return sum;
}

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) throw std::domain_error("Rational with zero denominator");
    i128 n = num, d = den;
    if (d < 0) {
        n = -n;
        d = -d;
    }
    const i128 g = gcd128(n, d);
    if (g > 1) {
        n /= g;
        d /= g;
    }
    num_ = narrow(n);
    den_ = narrow(d);
}

Rational Rational::from_dyadic(double v) {
    std::int64_t den = 1;
    double scaled = v;
    for (int i = 0; i < 40 && scaled != std::floor(scaled); ++i) {
        scaled *= 2.0;
        den *= 2;
    }
    if (scaled != std::floor(scaled)) throw std::domain_error("value is not a short dyadic rational");
    return Rational(static_cast<std::int64_t>(scaled), den);
}

std::string Rational::str() const { return std::to_string(num_) + "/" + std::to_string(den_); }

Rational Rational::floor() const {
    std::int64_t q = num_ / den_;
    if (num_ % den_ != 0 && num_ < 0) --q;
    return Rational(q, 1);
}

Rational operator+(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                static_cast<i128>(a.den_) * b.den_);
}
Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
Rational operator*(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}
Rational operator/(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}
bool operator<(const Rational& a, const Rational& b) {
    return static_cast<i128>(a.num_) * b.den_ < static_cast<i128>(b.num_) * a.den_;
}

double chi2_pvalue(double stat, int dof) {
    if (dof < 1) return 1.0;
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, std::max(stat, 0.0)));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double student_t_quantile(double p, int dof) {
    return boost::math::quantile(boost::math::students_t(dof), p);
}

std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t n, double z) {
    if (n <= 0) return {0.0, 1.0};
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

MeanCI batch_means(std::span<const double> xs, int batches, double level) {
    MeanCI out;
    if (xs.empty()) return out;
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
        out.mean = xs.front();
        return out;
    }
    out.mean = pairwise_sum(xs) / xs.size();
    batches = std::min<int>(batches, static_cast<int>(xs.size()));
    if (batches < 2) return out;
    std::vector<double> means;
    const std::size_t n = xs.size();
    for (int b = 0; b < batches; ++b) {
        const std::size_t lo = n * b / batches, hi = n * (b + 1) / batches;
        means.push_back(pairwise_sum(xs.subspan(lo, hi - lo)) / (hi - lo));
    }
    double var = 0.0;
    for (double m : means) var += (m - out.mean) * (m - out.mean);
    var /= (batches - 1);
    const double t = student_t_quantile(0.5 + 0.5 * level, batches - 1);
    out.half_width = t * std::sqrt(var / batches);
    return out;
}

double chi2_gof(std::span<const double> observed, std::span<const double> expected) {
    std::vector<double> o, e;
    double po = 0.0, pe = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        po += observed[i];
        pe += expected[i];
        if (pe >= 5.0) {
            o.push_back(po);
            e.push_back(pe);
            po = pe = 0.0;
        }
    }
    if (pe > 0.0 || po > 0.0) {
        if (e.empty()) {
            o.push_back(po);
            e.push_back(pe);
        } else {
            o.back() += po;
            e.back() += pe;
        }
    }
    double stat = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) stat += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    return chi2_pvalue(stat, static_cast<int>(o.size()) - 1);
}

double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) return std::accumulate(xs.begin(), xs.end(), 0.0);
    const std::size_t m = xs.size() / 2;
    return pairwise_sum(xs.first(m)) + pairwise_sum(xs.subspan(m));
}

}  // namespace jellium
