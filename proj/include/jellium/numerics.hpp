#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace jellium {

// Gauss-Legendre rule on [-1, 1]; results are cached per order.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int n);

// Integral of f over [a, b] with an n-point Gauss-Legendre rule.
template <typename F>
double gauss_integrate(F&& f, double a, double b, int n = 16) {
    const GaussRule& r = gauss_legendre(n);
    const double c = 0.5 * (a + b), s = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) sum += r.weights[i] * f(c + s * r.nodes[i]);
    return s * sum;
}

// Globally adaptive Gauss-Kronrod (7/15) quadrature to an absolute tolerance,
// with at most max_segments sub-intervals.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double abs_tol = 1e-13, int max_segments = 1000);

// Same, over consecutive sub-intervals given by sorted break points.
double integrate_piecewise(const std::function<double(double)>& f, std::vector<double> breaks,
                           double abs_tol = 1e-13);

// Exact rational arithmetic on 64-bit integers (128-bit intermediates).
class Rational {
public:
    Rational(std::int64_t num = 0, std::int64_t den = 1);
    // Exact conversion of a double whose value is p / 2^m with small m.
    static Rational from_dyadic(double v);
    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const;
    Rational floor() const;

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a) { return Rational(-a.num_, a.den_); }
    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator<(const Rational& a, const Rational& b);

private:
    std::int64_t num_, den_;
};

// Statistics helpers.
double chi2_pvalue(double stat, int dof);
double normal_quantile(double p);
double student_t_quantile(double p, int dof);
std::pair<double, double> wilson_interval(std::int64_t successes, std::int64_t n, double z = 2.576);

struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;
};
// Batch means: splits xs into `batches` contiguous groups, CI at the given two-sided level.
MeanCI batch_means(std::span<const double> xs, int batches = 10, double level = 0.99);

// Pearson chi-squared goodness of fit; expected counts below 5 are pooled into the
// last bin. Returns the p-value.
double chi2_gof(std::span<const double> observed, std::span<const double> expected);

// Pairwise summation in fixed order.
double pairwise_sum(std::span<const double> xs);

}  // namespace jellium
