#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "pspline/config.hpp"
#include "pspline/io.hpp"
#include "pspline/svg.hpp"

using namespace pspline;

namespace {

std::string source_path(const std::string& rel) { return std::string(PSPLINE_SOURCE_DIR) + "/" + rel; }

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

FitResult sample_fit() {
    const Dataset d = generate_dataset(BrokenStick{}, EquallySpaced{}, ConstantNoise{0.1}, 17);
    return fit(d, make_knots({0.0, 5.0}, 24, 4));
}

}  // namespace

TEST(Csv, QuotedFieldsAndLineNumbers) {
    std::istringstream in("a, b ,c\r\n\n1,\"x,y\",\"say \"\"hi\"\"\"\n2,3,4\n");
    const io::CsvTable t = io::read_csv(in);
    EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], "x,y");
    EXPECT_EQ(t.rows[0][2], "say \"hi\"");
    EXPECT_EQ(t.line_numbers, (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(io::numeric_column(t, "a")[1], 2.0);
}

TEST(Csv, MalformedInputNamesTheLine) {
    std::istringstream short_row("x,y\n1,2\n3\n");
    EXPECT_NE(error_of([&] { io::read_csv(short_row); }).find("line 3"), std::string::npos);
    std::istringstream bad_value("x,y\n1,2\n3,abc\n");
    const io::CsvTable t = io::read_csv(bad_value);
    const std::string msg = error_of([&] { io::numeric_column(t, "y"); });
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos);
    std::istringstream nan_value("x\nnan\n");
    const io::CsvTable tn = io::read_csv(nan_value);
    EXPECT_THROW(io::numeric_column(tn, "x"), ParseError);
    std::istringstream quote("x\n\"open\n");
    EXPECT_THROW(io::read_csv(quote), ParseError);
    std::istringstream empty("");
    EXPECT_THROW(io::read_csv(empty), ParseError);
    EXPECT_THROW(t.column("z"), ParseError);
    EXPECT_THROW(io::read_csv_file("/nonexistent/file.csv"), ParseError);
}

TEST(Csv, StandInDatasetLoads) {
    const Dataset d = io::read_dataset(source_path("data/fossil_standin.csv"), "age", "strontium.ratio");
    EXPECT_EQ(d.xs.size(), 106u);
    EXPECT_EQ(d.ys.size(), 106u);
}

TEST(Csv, BandRoundTripIsByteExact) {
    const FitResult f = sample_fit();
    const ConfidenceBand b = make_band(f, ThetaReduced{0.1}, EvalGrid(f.model->knots, f.model->xs));
    std::ostringstream first;
    io::write_band_csv(b, first);
    std::istringstream in(first.str());
    const ConfidenceBand loaded = io::read_band_csv(in);
    EXPECT_EQ(loaded.grid, b.grid);
    EXPECT_EQ(loaded.estimate, b.estimate);
    EXPECT_EQ(loaded.lower, b.lower);
    EXPECT_EQ(loaded.upper, b.upper);
    std::ostringstream second;
    io::write_band_csv(loaded, second);
    EXPECT_EQ(first.str(), second.str());
    std::istringstream wrong("x,est\n1,2\n");
    EXPECT_THROW(io::read_band_csv(wrong), ParseError);
}

TEST(Csv, FormatNumberRoundTrips) {
    RandomStream rng(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.normal() * std::pow(10.0, static_cast<int>(rng.next_u64() % 40) - 20);
        EXPECT_EQ(io::parse_double(format_number(v), "t"), v);
    }
}

TEST(Json, FitRoundTripReproducesTheFit) {
    const FitResult f = sample_fit();
    const io::json j = io::json::parse(io::fit_json(f).dump());
    EXPECT_EQ(j.at("n").get<int>(), 101);
    EXPECT_EQ(j.at("p").get<int>(), 28);
    const FitResult g = io::fit_from_json(j);
    EXPECT_EQ(g.alpha, f.alpha);
    EXPECT_EQ(g.model->knots.interior(), f.model->knots.interior());
    EXPECT_LT((g.beta_hat - f.beta_hat).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(g.sigma2_hat, f.sigma2_hat, 1e-14);
    EXPECT_EQ(g.reml_selected, f.reml_selected);
    EXPECT_EQ(io::fit_json(g).at("data").dump(), io::fit_json(f).at("data").dump());
    io::json broken = j;
    broken.erase("knots");
    EXPECT_THROW(io::fit_from_json(broken), ParseError);
}

TEST(Json, ZeroAlphaOmitsLog10) {
    FitOptions opt;
    opt.alpha = FixedAlpha{0.0};
    const Dataset d = generate_dataset(BrokenStick{}, EquallySpaced{}, ConstantNoise{0.1}, 3);
    const FitResult f = fit(d, make_knots({0.0, 5.0}, 24, 4), opt);
    const io::json j = io::fit_json(f);
    EXPECT_FALSE(j.contains("log10_alpha"));
    EXPECT_EQ(io::fit_from_json(j).alpha, 0.0);
}

TEST(Json, BandAndCoverageFields) {
    const FitResult f = sample_fit();
    const ConfidenceBand b = make_band(f, IterativeBC{5}, EvalGrid(f.model->knots, f.model->xs));
    const io::json j = io::band_json(b);
    EXPECT_EQ(j.at("method").at("tag"), "iter:5");
    EXPECT_EQ(j.at("method").at("n_bc"), 5);
    EXPECT_EQ(j.at("x").size(), 101u);
    ExperimentConfig c;
    c.replicates = 5;
    c.master_seed = 4;
    const CoverageReport r = run_experiment(c, 1);
    const io::json cj = io::coverage_json(r);
    EXPECT_EQ(cj.at("replicates"), 5);
    EXPECT_EQ(cj.at("methods").at(0).at("coverage").size(), 101u);
    EXPECT_EQ(cj.at("methods").at(0).at("singular_count"), 0);
    std::ostringstream csv;
    io::write_coverage_csv(r, r.methods[0], csv);
    std::istringstream back(csv.str());
    const io::CsvTable t = io::read_csv(back);
    EXPECT_EQ(t.rows.size(), 101u);
    EXPECT_EQ(io::numeric_column(t, "coverage"), r.methods[0].coverage);
}

TEST(Config, ShippedConfigsParseAndRoundTrip) {
    for (const char* name : {"reference", "bias_correction", "beta_design", "heteroskedastic_up",
                             "heteroskedastic_down", "smoke"}) {
        const config::RunSpec spec = config::parse(config::read_file(source_path(std::string("configs/") + name + ".cfg")));
        const std::string text = config::serialize(spec);
        EXPECT_EQ(config::serialize(config::parse(text)), text) << name;
    }
}

TEST(Config, DefaultsMatchTheReferenceExperiment) {
    const config::RunSpec spec = config::parse("run.seed = 1\n");
    const ExperimentConfig& c = spec.experiment;
    const auto& stick = std::get<BrokenStick>(c.target);
    EXPECT_EQ(stick.slopes, (std::vector<double>{0.1, -0.1, 0.5}));
    EXPECT_EQ(stick.corners, (std::vector<double>{1.0, 3.0}));
    EXPECT_EQ(std::get<EquallySpaced>(c.sampler).n, 101);
    EXPECT_EQ(std::get<ConstantNoise>(c.noise).sigma, 0.1);
    EXPECT_EQ(c.knots.n_interior, 24);
    EXPECT_EQ(c.replicates, 1000);
    EXPECT_EQ(c.level, 0.95);
}

TEST(Config, ParsesEveryKeyKind) {
    const std::string text =
        "# comment\n"
        "target.slopes = 0.1, -0.1, 0.2   # trailing\n"
        "sampler.kind = scaled_beta\nsampler.n = 80\nsampler.shape1 = 0.8\nsampler.shape2 = 0.8\n"
        "noise.kind = linear\nnoise.slope = 0.01\nnoise.intercept = 0.075\n"
        "knots.count = 26\nknots.count_includes_boundary = true\n"
        "run.seed = 18446744073709551615\nrun.replicates = 7\nrun.methods = theta=0.05, hodges, iter:500\n"
        "run.compare = theta=0.05 vs iter:5; hodges vs iter:1\nrun.sigma2_divisor = edf\n"
        "run.alpha_log10_range = -4, 6\nrun.alpha_grid_points = 21\n";
    const config::RunSpec spec = config::parse(text);
    const ExperimentConfig& c = spec.experiment;
    EXPECT_EQ(c.master_seed, 18446744073709551615ULL);
    EXPECT_EQ(c.replicates, 7);
    EXPECT_EQ(std::get<ScaledBeta>(c.sampler).n, 80);
    EXPECT_EQ(std::get<LinearNoise>(c.noise).slope, 0.01);
    EXPECT_TRUE(c.knots.count_includes_boundary);
    ASSERT_EQ(c.methods.size(), 3u);
    EXPECT_EQ(describe(c.methods[2]), "iter:500");
    ASSERT_EQ(spec.comparisons.size(), 2u);
    EXPECT_EQ(describe(spec.comparisons[1].second), "iter:1");
    EXPECT_EQ(c.sigma2_divisor, Sigma2Divisor::EffectiveDf);
    EXPECT_EQ(c.select.log10_lo, -4.0);
    EXPECT_EQ(c.select.grid_points, 21);
}

TEST(Config, ErrorsNameTheLine) {
    EXPECT_NE(error_of([] { config::parse("run.seed = 1\nrun.bogus = 3\n"); }).find("line 2"), std::string::npos);
    EXPECT_NE(error_of([] { config::parse("run.seed = 1\nrun.seed = 2\n"); }).find("duplicate"), std::string::npos);
    EXPECT_NE(error_of([] { config::parse("run.replicates = 10\n"); }).find("run.seed is required"), std::string::npos);
    EXPECT_NE(error_of([] { config::parse("run.seed = 1\n\nrun.replicates = ten\n"); }).find("line 3"), std::string::npos);
    EXPECT_THROW(config::parse("run.seed = 1\nrun.methods = theta=2\n"), ParseError);
    EXPECT_THROW(config::parse("run.seed = 1\nrun.compare = hodges iter:1\n"), ParseError);
    EXPECT_THROW(config::parse("run.seed = -1\n"), ParseError);
    EXPECT_THROW(config::parse("run.seed = 1\nknots.count_includes_boundary = maybe\n"), ParseError);
    EXPECT_THROW(config::parse("run.seed = 1\nnoise.kind = linear\nnoise.slope = -1\n"), ParseError);
    EXPECT_THROW(config::parse("just words\n"), ParseError);
    EXPECT_THROW(config::read_file("/nonexistent.cfg"), ParseError);
}

TEST(Svg, DeterministicAndWellFormed) {
    auto build = [] {
        svg::Figure fig(2);
        auto& p = fig.add_panel();
        p.title = "a & <b>";
        p.scatters.push_back({{0, 1, 2}, {1, 3, 2}});
        p.bands.push_back({{0, 1, 2}, {0, 2, 1}, {2, 4, 3}});
        p.lines.push_back({{0, 2}, {1, 2}, "#000000", 1.4, true, "fit"});
        p.hlines.push_back({2.5});
        fig.add_panel().lines.push_back({{0, 1}, {5, 5}});
        return fig.str();
    };
    const std::string a = build();
    EXPECT_EQ(a, build());
    EXPECT_EQ(a.rfind("<?xml", 0), 0u);
    EXPECT_NE(a.find("a &amp; &lt;b&gt;"), std::string::npos);
    EXPECT_NE(a.find("stroke-dasharray"), std::string::npos);
    EXPECT_NE(a.find(">fit</text>"), std::string::npos);
    EXPECT_EQ(a.substr(a.size() - 7), "</svg>\n");
    EXPECT_THROW(svg::Figure().str(), InvalidArgument);
}

TEST(Svg, NiceTicksCoverTheRange) {
    const auto t = svg::detail::nice_ticks(0.0, 5.0);
    EXPECT_EQ(t.front(), 0.0);
    EXPECT_NEAR(t.back(), 5.0, 1e-12);
    const auto u = svg::detail::nice_ticks(-0.13, 0.91);
    for (std::size_t i = 1; i < u.size(); ++i) EXPECT_NEAR(u[i] - u[i - 1], 0.2, 1e-12);
    EXPECT_EQ(svg::detail::tick_label(1e-15), "0");
    EXPECT_EQ(svg::detail::tick_label(0.25), "0.25");
}
