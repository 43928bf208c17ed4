#include <gtest/gtest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "pspline/simgen.hpp"

using namespace pspline;

TEST(Philox, KnownAnswers) {
    // reference values from numpy.random.Philox (counter preset one below)
    struct Case {
        Philox4x64Block ctr;
        Philox4x64Key key;
        Philox4x64Block expected;
    };
    const Case cases[] = {
        {{0, 0, 0, 0}, {0, 0},
         {0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL, 0x7e68b68aec7ba23bULL}},
        {{0x243f6a8885a308d3ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL, 0x082efa98ec4e6c89ULL},
         {0xa4093822299f31d0ULL, 0x082efa98ec4e6c89ULL},
         {0xfce6a8bfe859012cULL, 0x6be516c32423d059ULL, 0xab8e08a5250a0ee7ULL, 0xef2fe36f811c1805ULL}},
        {{5, 0, 0, 0}, {20240607, 3},
         {0x227f5ada15c59facULL, 0x3ac2feadd61c77dfULL, 0xa8403ec5f15b940fULL, 0xdf96660c74d24ef5ULL}},
    };
    for (const auto& c : cases) EXPECT_EQ(philox4x64_10(c.ctr, c.key), c.expected);
}

TEST(RandomStream, DeterministicAndStreamSeparated) {
    RandomStream a(11, 0), b(11, 0), c(11, 1), d(12, 0);
    int same_c = 0, same_d = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t va = a.next_u64();
        EXPECT_EQ(va, b.next_u64());
        same_c += va == c.next_u64();
        same_d += va == d.next_u64();
    }
    EXPECT_EQ(same_c, 0);
    EXPECT_EQ(same_d, 0);
    RandomStream e(20240607, 3);
    for (int i = 0; i < 20; ++i) e.next_u64();
    EXPECT_EQ(e.next_u64(), 0x227f5ada15c59facULL);  // block 5, word 0
}

TEST(NormalQuantile, MatchesBoost) {
    const boost::math::normal nd;
    for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.025, 0.2, 0.5, 0.6, 0.975, 0.999, 1.0 - 1e-12}) {
        const double ref = boost::math::quantile(nd, p);
        EXPECT_NEAR(normal_quantile(p), ref, 1e-14 * std::max(1.0, std::fabs(ref))) << p;
    }
    EXPECT_EQ(normal_quantile(0.5), 0.0);
    EXPECT_THROW(normal_quantile(0.0), InvalidArgument);
    EXPECT_THROW(normal_quantile(1.0), InvalidArgument);
}

TEST(RandomStream, NormalMoments) {
    RandomStream rng(3, 0);
    const int N = 1000000;
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    int below = 0;
    for (int i = 0; i < N; ++i) {
        const double z = rng.normal();
        s1 += z;
        s2 += z * z;
        s3 += z * z * z;
        s4 += z * z * z * z;
        below += z < -1.959964;
    }
    const double m = s1 / N;
    EXPECT_LT(std::fabs(m), 4.0 / std::sqrt(N));
    EXPECT_LT(std::fabs(s2 / N - 1.0), 4.0 * std::sqrt(2.0 / N));
    EXPECT_LT(std::fabs(s3 / N), 4.0 * std::sqrt(15.0 / N));
    EXPECT_LT(std::fabs(s4 / N - 3.0), 4.0 * std::sqrt(96.0 / N));
    EXPECT_LT(std::fabs(below / double(N) - 0.025), 4.0 * std::sqrt(0.025 * 0.975 / N));
}

TEST(RandomStream, UniformOpenInterval) {
    RandomStream rng(4, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(BrokenStick, Landmarks) {
    const BrokenStick f;
    EXPECT_NEAR(f(0.0), 0.0, 1e-15);
    EXPECT_NEAR(f(0.5), 0.05, 1e-15);
    EXPECT_NEAR(f.raw(1.0), 0.1, 1e-15);
    EXPECT_NEAR(f.raw(3.0), -0.1, 1e-15);
    EXPECT_NEAR(f(5.0), -0.1 + 0.5 * 2.0, 1e-14);
    // blend midpoint sits (s1 - s0) * h / 4 off the corner
    EXPECT_NEAR(f(1.0) - f.raw(1.0), (-0.1 - 0.1) * 0.2 / 4.0, 1e-15);
    EXPECT_NEAR(f(3.0) - f.raw(3.0), (0.5 + 0.1) * 0.2 / 4.0, 1e-15);
    EXPECT_NEAR(smoothed_broken_stick(0.5), 0.05, 1e-15);
    EXPECT_THROW(f(5.5), InvalidArgument);
}

TEST(BrokenStick, RawOutsideBlendWindows) {
    const BrokenStick f;
    for (int i = 0; i <= 500; ++i) {
        const double x = 0.01 * i;
        if (std::fabs(x - 1.0) > 0.2 + 1e-12 && std::fabs(x - 3.0) > 0.2 + 1e-12) {
            EXPECT_EQ(f(x), f.raw(x)) << x;
        }
    }
}

TEST(BrokenStick, ContinuouslyDifferentiable) {
    const BrokenStick f;
    const double eps = 1e-7;
    for (double c : {0.8, 1.2, 2.8, 3.2}) {
        EXPECT_NEAR(f(c - eps), f(c + eps), 1e-7);
        EXPECT_NEAR(f.derivative(c - 1e-12), f.derivative(c + 1e-12), 1e-9);
        const double left = (f(c) - f(c - eps)) / eps, right = (f(c + eps) - f(c)) / eps;
        EXPECT_NEAR(left, right, 1e-5) << c;
    }
    // second derivative inside a blend is (s1 - s0) / (2h)
    const double h = 1e-3, x = 1.05;
    EXPECT_NEAR((f(x + h) - 2 * f(x) + f(x - h)) / (h * h), -0.2 / 0.4, 1e-6);
}

TEST(BrokenStick, Validation) {
    BrokenStick f;
    f.half_width = 1.1;
    EXPECT_THROW(f.validate(), InvalidArgument);
    f = BrokenStick{};
    f.slopes = {0.1};
    EXPECT_THROW(f.validate(), InvalidArgument);
    f = BrokenStick{};
    f.corners = {1.0, 1.3};
    EXPECT_THROW(f.validate(), InvalidArgument);
    f = BrokenStick{};
    f.half_width = 0.0;
    EXPECT_NO_THROW(f.validate());
    EXPECT_EQ(f(1.0), f.raw(1.0));
}

TEST(Design, EquallySpaced) {
    const auto xs = sample_design(EquallySpaced{}, 0);
    ASSERT_EQ(xs.size(), 101u);
    EXPECT_EQ(xs.front(), 0.0);
    EXPECT_EQ(xs.back(), 5.0);
    for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_NEAR(xs[i] - xs[i - 1], 0.05, 1e-14);
    EXPECT_EQ(sample_design(EquallySpaced{}, 1), xs);
    EXPECT_THROW(sample_design(EquallySpaced{1, {0, 1}}, 0), InvalidArgument);
}

TEST(Design, ScaledBetaDistribution) {
    const ScaledBeta s{20000, 2.0, 5.0, 5.0};
    const auto xs = sample_design(s, 5);
    ASSERT_EQ(xs.size(), 20000u);
    EXPECT_TRUE(std::is_sorted(xs.begin(), xs.end()));
    double sum = 0;
    for (double x : xs) {
        ASSERT_GE(x, 0.0);
        ASSERT_LE(x, 5.0);
        sum += x;
    }
    const double mean = 5.0 * 2.0 / 7.0;
    const double sd = 5.0 * std::sqrt(2.0 * 5.0 / (49.0 * 8.0));
    EXPECT_LT(std::fabs(sum / xs.size() - mean), 4.0 * sd / std::sqrt(xs.size()));
    // Kolmogorov-Smirnov distance against the Beta CDF
    const boost::math::beta_distribution<> bd(2.0, 5.0);
    double ks = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double F = boost::math::cdf(bd, xs[i] / 5.0);
        ks = std::max({ks, std::fabs(F - double(i) / xs.size()), std::fabs(F - double(i + 1) / xs.size())});
    }
    EXPECT_LT(ks, 1.63 / std::sqrt(xs.size()));  // 1% critical value
    EXPECT_THROW(sample_design(ScaledBeta{10, 0.0, 1.0, 5.0}, 0), InvalidArgument);
}

TEST(Design, SizeCheck) {
    EXPECT_THROW(check_design_size(EquallySpaced{20, {0, 5}}, 28), InvalidArgument);
    EXPECT_NO_THROW(check_design_size(EquallySpaced{}, 28));
}

TEST(Noise, ResidualDistribution) {
    const int n = 200000;
    const Dataset d = generate_dataset(BrokenStick{}, ScaledBeta{n, 1.0, 1.0, 5.0}, LinearNoise{0.01, 0.075}, 8);
    double s1 = 0, s2 = 0;
    const BrokenStick f;
    for (int i = 0; i < n; ++i) {
        const double z = (d.ys[i] - f(d.xs[i])) / (0.01 * d.xs[i] + 0.075);
        s1 += z;
        s2 += z * z;
    }
    EXPECT_LT(std::fabs(s1 / n), 4.0 / std::sqrt(n));
    EXPECT_LT(std::fabs(s2 / n - 1.0), 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(noise_sd(LinearNoise{-0.01, 0.125}, 5.0), 0.075, 1e-15);
    EXPECT_THROW(generate_dataset(BrokenStick{}, EquallySpaced{}, LinearNoise{-0.1, 0.1}, 0), InvalidArgument);
    EXPECT_THROW(generate_dataset(BrokenStick{}, EquallySpaced{}, ConstantNoise{-1.0}, 0), InvalidArgument);
}

TEST(Noise, ZeroSigmaGivesTruth) {
    const Dataset d = generate_dataset(BrokenStick{}, EquallySpaced{}, ConstantNoise{0.0}, 9);
    for (std::size_t i = 0; i < d.xs.size(); ++i) EXPECT_EQ(d.ys[i], BrokenStick{}(d.xs[i]));
}

TEST(Generate, ReproducibleByStream) {
    const auto a = generate_dataset(BrokenStick{}, ScaledBeta{}, ConstantNoise{0.1}, 10, 4);
    const auto b = generate_dataset(BrokenStick{}, ScaledBeta{}, ConstantNoise{0.1}, 10, 4);
    const auto c = generate_dataset(BrokenStick{}, ScaledBeta{}, ConstantNoise{0.1}, 10, 5);
    EXPECT_EQ(a.xs, b.xs);
    EXPECT_EQ(a.ys, b.ys);
    EXPECT_NE(a.xs, c.xs);
}

TEST(Generate, CustomTarget) {
    const CustomTarget t{"sin", [](double x) { return std::sin(x); }, {0.0, 3.0}};
    const Dataset d = generate_dataset(t, EquallySpaced{31, {0.0, 3.0}}, ConstantNoise{0.0}, 0);
    for (std::size_t i = 0; i < d.xs.size(); ++i) EXPECT_EQ(d.ys[i], std::sin(d.xs[i]));
}
