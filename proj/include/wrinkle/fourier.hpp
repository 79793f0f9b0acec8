#pragma once

#include <complex>
#include <vector>

#include "wrinkle/common.hpp"
#include "wrinkle/grid.hpp"

namespace wrinkle::spectral {

// Complex DFT plan. Power-of-two sizes use an iterative radix-2 transform;
// other sizes fall back to a direct evaluation (used only at test sizes).
class Fft {
  public:
    explicit Fft(std::size_t n);
    std::size_t size() const { return n_; }
    void forward(std::vector<std::complex<double>>& x) const;
    void inverse(std::vector<std::complex<double>>& x) const;  // unnormalized

  private:
    void transform(std::vector<std::complex<double>>& x, bool inv) const;
    std::size_t n_ = 0;
    bool pow2_ = false;
    std::vector<std::complex<double>> twiddle_;
};

// Real trigonometric series over one period with the sqrt(2) convention:
//   f(theta) = a0 + sum_m [ s[m-1] sqrt2 sin(m w theta) + c[m-1] sqrt2 cos(m w theta) ]
//            + nyquist_c * cos((n/2) w theta),            w = 2 pi / period.
// The mean of f^2 over the period is a0^2 + sum (s^2 + c^2) + nyquist_c^2.
struct TrigSeries {
    double period = 0.0;
    std::size_t nsamples = 0;
    double a0 = 0.0;
    std::vector<double> s, c;  // harmonics m = 1 .. nsamples/2 - 1
    double nyquist_c = 0.0;

    std::size_t harmonics() const { return s.size(); }
    double frequency(std::size_t m) const;  // m-th positive frequency m*w
    double energy() const;                  // mean of f^2
};

TrigSeries trig_forward(const std::vector<double>& samples, double period, const Fft& plan);
std::vector<double> trig_inverse(const TrigSeries& series, const Fft& plan);

// d/dtheta and the zero-mean primitive with value 0 at theta = 0.
TrigSeries trig_derivative(const TrigSeries& series);
TrigSeries trig_antiderivative(const TrigSeries& series);

// Fraction of non-mean energy carried by harmonics m > m_cut.
double tail_energy_fraction(const TrigSeries& series, std::size_t m_cut);

// Radially sampled Fourier data of a theta-periodic scalar field. Signed
// frequency convention: k > 0 rows are sine coefficients, k < 0 cosine,
// k = 0 the mean, matching the sqrt(2)-normalized series above.
struct FourierField {
    RadialGrid grid;
    double period = 0.0;
    std::vector<double> k;  // signed, ordered 0, +w, -w, +2w, -2w, ...
    Array2D coef;           // [radial node][k index]

    std::size_t find_k(double kq) const;  // index of signed frequency, throws if absent
};

// Row-by-row transforms between theta samples and coefficients.
FourierField fourier_forward(const Array2D& samples, double period, const RadialGrid& grid);
Array2D fourier_inverse(const FourierField& field, std::size_t theta_count);

}  // namespace wrinkle::spectral
