#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <json.hpp>

#include "oracles.hpp"
#include "ted/analytics.hpp"
#include "ted/errors.hpp"

using namespace ted;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::config;
}

double boost_p_value(double r, std::size_t n) {
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

ScoredFrame scored(int index, double ted, bool ok = true) {
    ScoredFrame f;
    f.frame_index = index;
    f.static_score = ted;
    f.ted_score = ted;
    f.tracking_ok = ok;
    return f;
}

SequenceRecord labeled(std::string subject, std::string seq, std::size_t n, std::vector<double> pspi, int vas,
                       Gender g = Gender::unspecified) {
    SequenceRecord r;
    r.subject_id = std::move(subject);
    r.sequence_id = std::move(seq);
    for (std::size_t i = 0; i < n; ++i) {
        FrameFeatures f;
        f.frame_index = static_cast<int>(i) + 1;
        r.frames.push_back(f);
    }
    r.pspi = std::move(pspi);
    r.labels = Labels{vas, 0, 0, vas / 2};
    r.gender = g;
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pearson

TEST(Pearson, Examples) {
    const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
    EXPECT_EQ(pearson(a, a), 1.0);
    EXPECT_EQ(pearson(a, b), -1.0);
    const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
    EXPECT_NEAR(pearson(x, y), 0.8, 1e-12);
}

TEST(Pearson, Errors) {
    const std::vector<double> a{1, 2, 3}, flat{2, 2, 2}, two{1, 2}, four{1, 2, 3, 4};
    EXPECT_EQ(kind_of([&] { pearson(a, flat); }), ErrorKind::undefined_correlation);
    EXPECT_EQ(kind_of([&] { pearson(two, two); }), ErrorKind::degenerate_input);
    EXPECT_EQ(kind_of([&] { pearson(a, four); }), ErrorKind::shape);
}

TEST(Pearson, AffineInvarianceAndSymmetry) {
    gen::Rng rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const auto n = static_cast<std::size_t>(gen::integer(rng, 3, 200));
        const auto x = gen::vector(rng, n, -10, 10);
        const auto y = gen::vector(rng, n, -10, 10);
        EXPECT_NEAR(pearson(x, y), pearson(y, x), 1e-15);
        EXPECT_NEAR(pearson(x, y), oracle::pearson(x, y), 1e-12);
        const double a = gen::uniform(rng, 0.1, 5.0), b = gen::uniform(rng, -5, 5);
        std::vector<double> up, down;
        for (double v : x) {
            up.push_back(a * v + b);
            down.push_back(-a * v + b);
        }
        EXPECT_NEAR(pearson(x, up), 1.0, 1e-12);
        EXPECT_NEAR(pearson(x, down), -1.0, 1e-12);
    }
}

// ---------------------------------------------------------------------------
// p-value

TEST(PValue, Examples) {
    EXPECT_EQ(pcc_p_value(0.0, 3), 1.0);
    EXPECT_EQ(pcc_p_value(0.0, 1000), 1.0);
    EXPECT_EQ(pcc_p_value(1.0, 10), 0.0);
    EXPECT_EQ(pcc_p_value(-1.0, 10), 0.0);
    EXPECT_LT(pcc_p_value(0.75, 100), 0.005);
    EXPECT_EQ(kind_of([] { pcc_p_value(0.5, 2); }), ErrorKind::degrees_of_freedom);
}

TEST(PValue, MatchesStudentTDistribution) {
    for (std::size_t n : {3u, 4u, 5u, 10u, 30u, 100u, 1000u, 5000u}) {
        for (double r : {-0.99, -0.6, -0.2, 0.01, 0.1, 0.3, 0.5, 0.75, 0.9, 0.999}) {
            EXPECT_NEAR(pcc_p_value(r, n), boost_p_value(r, n), 1e-12) << "r=" << r << " n=" << n;
        }
    }
}

TEST(PValue, MonotoneInAbsRAndN) {
    for (std::size_t n : {3u, 10u, 50u, 400u}) {
        double prev = 1.0;
        for (int i = 1; i < 100; ++i) {
            const double p = pcc_p_value(i / 100.0, n);
            EXPECT_LE(p, prev);
            EXPECT_EQ(p, pcc_p_value(-i / 100.0, n));
            prev = p;
        }
    }
    for (double r : {0.05, 0.3, 0.8}) {
        double prev = 1.0;
        for (std::size_t n = 3; n < 300; n += 7) {
            const double p = pcc_p_value(r, n);
            EXPECT_LE(p, prev);
            prev = p;
        }
    }
}

TEST(IncompleteBeta, KnownValues) {
    EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
    EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    // I_x(1, 1) = x and I_x(a, 1) = x^a.
    EXPECT_NEAR(regularized_incomplete_beta(1.0, 1.0, 0.37), 0.37, 1e-14);
    EXPECT_NEAR(regularized_incomplete_beta(3.0, 1.0, 0.5), 0.125, 1e-14);
}

// ---------------------------------------------------------------------------
// Per-subject evaluation

TEST(EvaluateSubject, Examples) {
    const std::vector<double> pspi{0, 1, 4, 2, 0, 3};
    std::vector<double> ted;
    for (double p : pspi) ted.push_back(6.0 + 2.5 * p);
    const auto r = evaluate_subject("S", ted, pspi);
    EXPECT_NEAR(r.pcc, 1.0, 1e-12);
    EXPECT_EQ(r.n_frames, 6u);
    const std::vector<double> flat(6, 6.0);
    EXPECT_EQ(kind_of([&] { evaluate_subject("S", flat, pspi); }), ErrorKind::undefined_correlation);
}

TEST(EvaluateSubject, RampWithNoiseCorrelatesStrongly) {
    gen::Rng rng(42);
    std::vector<double> pspi, ted;
    for (int i = 0; i < 300; ++i) {
        const double p = 8.0 * (1.0 + std::sin(i / 15.0));
        pspi.push_back(p);
        ted.push_back(6.0 + 10.0 * p + gen::uniform(rng, -5, 5));
    }
    EXPECT_GT(evaluate_subject("S", ted, pspi).pcc, 0.9);
}

TEST(SubjectSeries, ConcatenatesInSequenceOrderAndDropsFailedFrames) {
    std::vector<SequenceRecord> records{labeled("A", "2", 2, {5, 6}, 0), labeled("A", "1", 3, {1, 2, 3}, 0)};
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    scores[{"A", "1"}] = {scored(1, 10), scored(2, 20, false), scored(3, 30)};
    scores[{"A", "2"}] = {scored(1, 50), scored(2, 60)};
    const auto series = build_subject_series(records, scores);
    ASSERT_EQ(series.size(), 1u);
    EXPECT_EQ(series[0].ted, (std::vector<double>{10, 30, 50, 60}));
    EXPECT_EQ(series[0].pspi, (std::vector<double>{1, 3, 5, 6}));

    records[0].pspi.reset();
    try {
        build_subject_series(records, scores);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::manifest);
        EXPECT_NE(std::string(e.what()).find("A/2"), std::string::npos);
    }
}

TEST(EvaluateDataset, SkipsUndefinedSubjectsWithFinding) {
    std::vector<SequenceRecord> records{labeled("A", "1", 4, {0, 1, 2, 3}, 0), labeled("B", "1", 4, {0, 0, 0, 0}, 0)};
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    scores[{"A", "1"}] = {scored(1, 6), scored(2, 8), scored(3, 10), scored(4, 12)};
    scores[{"B", "1"}] = {scored(1, 6), scored(2, 8), scored(3, 10), scored(4, 12)};
    const auto rep = evaluate_dataset(records, scores, 10);
    ASSERT_EQ(rep.subjects.size(), 1u);
    EXPECT_NEAR(rep.subjects[0].pcc, 1.0, 1e-12);
    ASSERT_EQ(rep.skipped.size(), 1u);
    EXPECT_EQ(rep.skipped[0].subject_id, "B");
    EXPECT_EQ(rep.pcc.count, 1u);
}

// ---------------------------------------------------------------------------
// Quantiles and distribution statistics

TEST(Quantile, MatchesSortOracle) {
    gen::Rng rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        auto v = gen::vector(rng, static_cast<std::size_t>(gen::integer(rng, 1, 60)), -100, 100);
        const auto stats = describe_distribution(v);
        EXPECT_EQ(stats.q1, oracle::quantile(v, 0.25));
        EXPECT_EQ(stats.median, oracle::quantile(v, 0.5));
        EXPECT_EQ(stats.q3, oracle::quantile(v, 0.75));
        EXPECT_EQ(stats.min, oracle::quantile(v, 0.0));
        EXPECT_EQ(stats.max, oracle::quantile(v, 1.0));
        EXPECT_NEAR(stats.mean, oracle::mean(v), 1e-12);
        EXPECT_NEAR(stats.sd, oracle::sample_sd(v), 1e-9);
        EXPECT_LE(stats.min, stats.q1);
        EXPECT_LE(stats.q1, stats.median);
        EXPECT_LE(stats.median, stats.q3);
        EXPECT_LE(stats.q3, stats.max);
    }
    const std::vector<double> sorted{1, 2, 3, 4};
    EXPECT_EQ(quantile_type7(sorted, 0.25), 1.75);
    EXPECT_EQ(describe_distribution({7.0}).sd, 0.0);
}

// ---------------------------------------------------------------------------
// Summary

TEST(Summarize, NeutralPlateauLogMedian) {
    std::vector<SequenceRecord> records{labeled("A", "1", 5, {0, 0, 0, 0, 0}, 0)};
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    for (int i = 1; i <= 5; ++i) scores[{"A", "1"}].push_back(scored(i, 6.0));
    const auto rep = summarize(records, scores, LabelScale::vas, ScoreTransform::log);
    ASSERT_EQ(rep.groups.size(), 1u);
    EXPECT_EQ(rep.groups[0].label, 0);
    EXPECT_NEAR(rep.groups[0].stats.median, 1.791759469228055, 1e-12);
}

TEST(Summarize, GendersFormSeparateGroups) {
    std::vector<SequenceRecord> records{labeled("A", "1", 3, {0, 0, 0}, 4, Gender::male),
                                        labeled("B", "1", 3, {0, 0, 0}, 4, Gender::female)};
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    for (int i = 1; i <= 3; ++i) {
        scores[{"A", "1"}].push_back(scored(i, 10.0));
        scores[{"B", "1"}].push_back(scored(i, 20.0));
    }
    const auto rep = summarize(records, scores, LabelScale::vas, ScoreTransform::none);
    ASSERT_EQ(rep.groups.size(), 2u);
    EXPECT_NE(rep.groups[0].stats.median, rep.groups[1].stats.median);
    ASSERT_EQ(rep.label_totals.size(), 1u);
    EXPECT_EQ(rep.label_totals[0].gender, "all");
    EXPECT_EQ(rep.label_totals[0].stats.count, 6u);
}

TEST(Summarize, RawScoresMatchGroupByOracle) {
    gen::Rng rng(44);
    std::vector<SequenceRecord> records;
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    std::map<std::pair<int, std::string>, std::vector<double>> expected;
    std::size_t total = 0;
    for (int s = 0; s < 12; ++s) {
        const int vas = gen::integer(rng, 0, 10);
        const Gender g = s % 3 == 0 ? Gender::male : s % 3 == 1 ? Gender::female : Gender::unspecified;
        const auto n = static_cast<std::size_t>(gen::integer(rng, 1, 30));
        auto rec = labeled("S" + std::to_string(s), "1", n, std::vector<double>(n, 0.0), vas, g);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = gen::uniform(rng, 6, 500);
            scores[{rec.subject_id, "1"}].push_back(scored(static_cast<int>(i) + 1, v));
            expected[{vas, std::string(to_string(g))}].push_back(v);
        }
        total += n;
        records.push_back(std::move(rec));
    }
    const auto rep = summarize(records, scores, LabelScale::vas, ScoreTransform::none);
    EXPECT_EQ(rep.total_frames, total);
    std::size_t counted = 0;
    ASSERT_EQ(rep.groups.size(), expected.size());
    for (const auto& g : rep.groups) {
        const auto& values = expected.at({g.label, g.gender});
        EXPECT_EQ(g.stats.count, values.size());
        EXPECT_EQ(g.stats.median, oracle::quantile(values, 0.5));
        EXPECT_EQ(g.stats.q1, oracle::quantile(values, 0.25));
        EXPECT_EQ(g.stats.q3, oracle::quantile(values, 0.75));
        counted += g.stats.count;
    }
    EXPECT_EQ(counted, total);
    std::size_t pooled = 0;
    for (const auto& g : rep.label_totals) pooled += g.stats.count;
    EXPECT_EQ(pooled, total);
}

TEST(Summarize, MissingLabelIsLabelingError) {
    auto rec = labeled("A", "1", 1, {0}, 0);
    rec.labels.reset();
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    scores[{"A", "1"}] = {scored(1, 6)};
    EXPECT_EQ(kind_of([&] { summarize({rec}, scores, LabelScale::opi, ScoreTransform::log); }), ErrorKind::labeling);
}

TEST(Summarize, LogOfNonPositiveScoreIsDomainError) {
    auto rec = labeled("A", "1", 1, {0}, 0);
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    scores[{"A", "1"}] = {scored(1, -2.0)};
    EXPECT_EQ(kind_of([&] { summarize({rec}, scores, LabelScale::vas, ScoreTransform::log); }), ErrorKind::domain);
}

// ---------------------------------------------------------------------------
// Window ablation

namespace {

std::vector<SequenceRecord> random_dataset(gen::Rng& rng, int subjects, int sequences, std::size_t frames) {
    std::vector<SequenceRecord> out;
    for (int s = 0; s < subjects; ++s) {
        for (int q = 0; q < sequences; ++q) {
            SequenceRecord r;
            r.subject_id = "S" + std::to_string(s);
            r.sequence_id = std::to_string(q);
            r.frames = gen::sequence(rng, frames, 3);
            std::vector<double> pspi;
            for (const auto& f : r.frames) pspi.push_back(f.au_intensities.at(4) + f.au_intensities.at(43));
            r.pspi = pspi;
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace

TEST(WindowAblation, SingleWindowSingleSubject) {
    gen::Rng rng(45);
    const auto records = random_dataset(rng, 1, 2, 40);
    const auto rep = window_ablation(records, TedConfig{}, {3});
    ASSERT_EQ(rep.windows.size(), 1u);
    EXPECT_EQ(rep.windows[0].window, 3);
    EXPECT_EQ(rep.windows[0].subjects.size(), 1u);
    EXPECT_EQ(rep.best_window, 3);
}

TEST(WindowAblation, MatchesPerWindowEvaluation) {
    gen::Rng rng(46);
    const auto records = random_dataset(rng, 3, 2, 60);
    const auto rep = window_ablation(records, TedConfig{}, kDefaultAblationWindows);
    ASSERT_EQ(rep.windows.size(), kDefaultAblationWindows.size());
    for (std::size_t i = 0; i < kDefaultAblationWindows.size(); ++i) {
        TedConfig cfg;
        cfg.window = kDefaultAblationWindows[i];
        const auto ds = score_dataset(records, cfg);
        EXPECT_EQ(rep.windows[i], evaluate_dataset(records, ds.scores, cfg.window));
    }
    double best = -2.0;
    int best_w = 0;
    for (const auto& w : rep.windows) {
        if (w.pcc.mean > best) {
            best = w.pcc.mean;
            best_w = w.window;
        }
    }
    EXPECT_EQ(rep.best_window, best_w);
}

TEST(WindowAblation, DeterministicAcrossRunsAndJobs) {
    gen::Rng rng(47);
    const auto records = random_dataset(rng, 4, 2, 50);
    const auto a = window_ablation(records, TedConfig{}, {3, 10, 20}, 1);
    const auto b = window_ablation(records, TedConfig{}, {3, 10, 20}, 1);
    const auto c = window_ablation(records, TedConfig{}, {3, 10, 20}, 6);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_EQ(to_json(a), to_json(c));
}

TEST(WindowAblation, Errors) {
    gen::Rng rng(48);
    auto records = random_dataset(rng, 1, 1, 10);
    EXPECT_EQ(kind_of([&] { window_ablation(records, TedConfig{}, {}); }), ErrorKind::config);
    EXPECT_EQ(kind_of([&] { window_ablation(records, TedConfig{}, {0}); }), ErrorKind::config);
    records[0].pspi.reset();
    EXPECT_EQ(kind_of([&] { window_ablation(records, TedConfig{}, {5}); }), ErrorKind::manifest);
}

// ---------------------------------------------------------------------------
// Serialization

TEST(Reports, JsonAndCsvShapes) {
    gen::Rng rng(49);
    const auto records = random_dataset(rng, 2, 1, 30);
    const auto rep = window_ablation(records, TedConfig{}, {3, 5});
    const auto j = nlohmann::json::parse(to_json(rep));
    EXPECT_EQ(j["best_window"], rep.best_window);
    EXPECT_EQ(j["windows"].size(), 2u);
    const std::string plot = to_plot_csv(rep);
    EXPECT_EQ(plot.substr(0, plot.find('\n')), "window,count,min,q1,median,q3,max,mean,sd");
    EXPECT_EQ(std::count(plot.begin(), plot.end(), '\n'), 3);
    EXPECT_NE(to_text(rep).find("best window"), std::string::npos);
}
