#include "wrinkle/fourier.hpp"

#include <algorithm>
#include <cmath>

#include "wrinkle/parallel.hpp"

namespace wrinkle::spectral {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kSqrt2 = 1.41421356237309504880168872420969808;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
}  // namespace

Fft::Fft(std::size_t n) : n_(n), pow2_(is_pow2(n)) {
    if (n_ < 2 || n_ % 2 != 0) throw InvalidConfigError("Fft: size must be even and >= 2");
    if (pow2_) {
        twiddle_.resize(n_ / 2);
        for (std::size_t i = 0; i < n_ / 2; ++i) {
            const double ang = -2.0 * kPi * double(i) / double(n_);
            twiddle_[i] = {std::cos(ang), std::sin(ang)};
        }
    }
}

void Fft::transform(std::vector<std::complex<double>>& x, bool inv) const {
    if (x.size() != n_) throw DomainMismatchError("Fft: sample count mismatch");
    if (!pow2_) {
        std::vector<std::complex<double>> out(n_);
        const double sgn = inv ? 1.0 : -1.0;
        for (std::size_t m = 0; m < n_; ++m) {
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t j = 0; j < n_; ++j) {
                const double ang = sgn * 2.0 * kPi * double((m * j) % n_) / double(n_);
                acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            out[m] = acc;
        }
        x.swap(out);
        return;
    }
    // Iterative radix-2 with bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n_; ++i) {
        std::size_t bit = n_ >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t stride = n_ / len;
        for (std::size_t i = 0; i < n_; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                std::complex<double> w = twiddle_[j * stride];
                if (inv) w = std::conj(w);
                const std::complex<double> u = x[i + j];
                const std::complex<double> v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
            }
        }
    }
}

void Fft::forward(std::vector<std::complex<double>>& x) const { transform(x, false); }
void Fft::inverse(std::vector<std::complex<double>>& x) const { transform(x, true); }

double TrigSeries::frequency(std::size_t m) const { return 2.0 * kPi * double(m) / period; }

double TrigSeries::energy() const {
    double e = a0 * a0 + nyquist_c * nyquist_c;
    for (std::size_t i = 0; i < s.size(); ++i) e += s[i] * s[i] + c[i] * c[i];
    return e;
}

TrigSeries trig_forward(const std::vector<double>& samples, double period, const Fft& plan) {
    const std::size_t n = samples.size();
    if (plan.size() != n) throw DomainMismatchError("trig_forward: plan size mismatch");
    if (!(period > 0.0)) throw InvalidConfigError("trig_forward: period must be positive");
    std::vector<std::complex<double>> buf(n);
    for (std::size_t j = 0; j < n; ++j) buf[j] = samples[j];
    plan.forward(buf);
    TrigSeries out;
    out.period = period;
    out.nsamples = n;
    out.a0 = buf[0].real() / double(n);
    const std::size_t half = n / 2;
    out.s.resize(half - 1);
    out.c.resize(half - 1);
    for (std::size_t m = 1; m < half; ++m) {
        out.s[m - 1] = -kSqrt2 * buf[m].imag() / double(n);
        out.c[m - 1] = kSqrt2 * buf[m].real() / double(n);
    }
    out.nyquist_c = buf[half].real() / double(n);
    return out;
}

std::vector<double> trig_inverse(const TrigSeries& series, const Fft& plan) {
    const std::size_t n = series.nsamples;
    if (plan.size() != n) throw DomainMismatchError("trig_inverse: plan size mismatch");
    std::vector<std::complex<double>> buf(n, {0.0, 0.0});
    buf[0] = {series.a0 * double(n), 0.0};
    const std::size_t half = n / 2;
    for (std::size_t m = 1; m < half; ++m) {
        const double re = 0.5 * kSqrt2 * double(n) * series.c[m - 1];
        const double im = -0.5 * kSqrt2 * double(n) * series.s[m - 1];
        buf[m] = {re, im};
        buf[n - m] = {re, -im};
    }
    buf[half] = {series.nyquist_c * double(n), 0.0};
    plan.inverse(buf);
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = buf[j].real() / double(n);
    return out;
}

TrigSeries trig_derivative(const TrigSeries& series) {
    if (std::abs(series.nyquist_c) > 0.0)
        throw AliasingError("trig_derivative: Nyquist mode present, derivative not representable");
    TrigSeries out = series;
    out.a0 = 0.0;
    for (std::size_t m = 1; m <= series.harmonics(); ++m) {
        const double w = series.frequency(m);
        out.c[m - 1] = series.s[m - 1] * w;
        out.s[m - 1] = -series.c[m - 1] * w;
    }
    return out;
}

TrigSeries trig_antiderivative(const TrigSeries& series) {
    if (std::abs(series.a0) > 0.0 || std::abs(series.nyquist_c) > 0.0)
        throw InvalidConfigError("trig_antiderivative: input must be zero-mean and Nyquist-free");
    TrigSeries out = series;
    double at_zero = 0.0;
    for (std::size_t m = 1; m <= series.harmonics(); ++m) {
        const double w = series.frequency(m);
        out.s[m - 1] = series.c[m - 1] / w;
        out.c[m - 1] = -series.s[m - 1] / w;
        at_zero += out.c[m - 1];
    }
    out.a0 = -kSqrt2 * at_zero;  // value 0 at theta = 0
    return out;
}

double tail_energy_fraction(const TrigSeries& series, std::size_t m_cut) {
    double tail = series.nyquist_c * series.nyquist_c;
    double total = tail;
    for (std::size_t m = 1; m <= series.harmonics(); ++m) {
        const double e = series.s[m - 1] * series.s[m - 1] + series.c[m - 1] * series.c[m - 1];
        total += e;
        if (m > m_cut) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

std::size_t FourierField::find_k(double kq) const {
    for (std::size_t j = 0; j < k.size(); ++j)
        if (std::abs(k[j] - kq) <= 1e-12 * (1.0 + std::abs(kq))) return j;
    throw OutOfRangeError("FourierField: frequency not in k set");
}

FourierField fourier_forward(const Array2D& samples, double period, const RadialGrid& grid) {
    if (samples.rows() != grid.size()) throw DomainMismatchError("fourier_forward: grid/sample mismatch");
    const std::size_t n = samples.cols();
    if (n % 2 != 0) throw InvalidConfigError("fourier_forward: theta count must be even");
    const Fft plan(n);
    const std::size_t half = n / 2;
    FourierField field;
    field.grid = grid;
    field.period = period;
    field.k.push_back(0.0);
    const double w = 2.0 * kPi / period;
    for (std::size_t m = 1; m < half; ++m) {
        field.k.push_back(double(m) * w);
        field.k.push_back(-double(m) * w);
    }
    field.coef = Array2D(grid.size(), field.k.size());
    par::for_each_index(grid.size(), [&](std::size_t i) {
        std::vector<double> row(samples.row(i), samples.row(i) + n);
        const TrigSeries ts = trig_forward(row, period, plan);
        field.coef(i, 0) = ts.a0;
        for (std::size_t m = 1; m < half; ++m) {
            field.coef(i, 2 * m - 1) = ts.s[m - 1];
            field.coef(i, 2 * m) = ts.c[m - 1];
        }
    });
    return field;
}

Array2D fourier_inverse(const FourierField& field, std::size_t theta_count) {
    if (theta_count % 2 != 0) throw InvalidConfigError("fourier_inverse: theta count must be even");
    const Fft plan(theta_count);
    const std::size_t half = theta_count / 2;
    const std::size_t stored = (field.k.size() - 1) / 2;
    if (stored >= half)
        throw AliasingError("fourier_inverse: theta count below field bandwidth");
    Array2D out(field.grid.size(), theta_count);
    par::for_each_index(field.grid.size(), [&](std::size_t i) {
        TrigSeries ts;
        ts.period = field.period;
        ts.nsamples = theta_count;
        ts.s.assign(half - 1, 0.0);
        ts.c.assign(half - 1, 0.0);
        ts.a0 = field.coef(i, 0);
        for (std::size_t m = 1; m <= stored; ++m) {
            ts.s[m - 1] = field.coef(i, 2 * m - 1);
            ts.c[m - 1] = field.coef(i, 2 * m);
        }
        const auto row = trig_inverse(ts, plan);
        std::copy(row.begin(), row.end(), out.row(i));
    });
    return out;
}

}  // namespace wrinkle::spectral
