#include "ted/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <locale>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ted/errors.hpp"
#include "ted/parallel.hpp"
#include "ted/text_io.hpp"

namespace ted {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Correlation

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(ErrorKind::shape, "correlation series differ in length (" + std::to_string(x.size()) + " vs " +
                                          std::to_string(y.size()) + ")");
    }
    if (x.size() < 3) {
        throw Error(ErrorKind::degenerate_input, "correlation needs at least 3 points, got " + std::to_string(x.size()));
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::undefined_correlation, "constant series has no correlation");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Continued fraction for the incomplete beta, modified Lentz method.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIterations = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    return h;
}

// Stirling-series remainder of ln Gamma(z), z >= 10.
double stirling_correction(double z) {
    const double z2 = z * z;
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * z2)) / z2) / z2) / z2) / z;
}

// ln Gamma(x + d) - ln Gamma(x). For large x the two lgamma values are big
// and close, so the difference is expanded instead of subtracted.
double lgamma_shift(double x, double d) {
    if (x < 10.0) return std::lgamma(x + d) - std::lgamma(x);
    return (x - 0.5) * std::log1p(d / x) + d * std::log(x + d) - d + stirling_correction(x + d) -
           stirling_correction(x);
}

double log_beta(double a, double b) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    return std::lgamma(lo) - lgamma_shift(hi, lo);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw Error(ErrorKind::domain, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::domain, "incomplete beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double pcc_p_value(double r, std::size_t n) {
    if (n < 3) {
        throw Error(ErrorKind::degrees_of_freedom, "p-value needs n >= 3, got " + std::to_string(n));
    }
    if (!(std::abs(r) <= 1.0)) throw Error(ErrorKind::domain, "correlation outside [-1, 1]");
    if (std::abs(r) == 1.0) return 0.0;
    if (r == 0.0) return 1.0;
    const double df = static_cast<double>(n - 2);
    // P(|T| > |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2), and with
    // t^2 = r^2 df / (1 - r^2) the argument reduces to 1 - r^2.
    const double p = regularized_incomplete_beta(df / 2.0, 0.5, 1.0 - r * r);
    return std::clamp(p, 0.0, 1.0);
}

SubjectCorrelation evaluate_subject(const std::string& subject_id, std::span<const double> ted_scores,
                                    std::span<const double> pspi) {
    SubjectCorrelation out;
    out.subject_id = subject_id;
    out.pcc = pearson(ted_scores, pspi);
    out.n_frames = ted_scores.size();
    out.p_value = pcc_p_value(out.pcc, out.n_frames);
    return out;
}

std::vector<SubjectSeries> build_subject_series(const std::vector<SequenceRecord>& records,
                                                const std::map<SequenceKey, std::vector<ScoredFrame>>& scores) {
    std::map<std::string, std::vector<const SequenceRecord*>> by_subject;
    for (const auto& r : records) by_subject[r.subject_id].push_back(&r);

    std::vector<SubjectSeries> out;
    for (auto& [subject, seqs] : by_subject) {
        std::sort(seqs.begin(), seqs.end(),
                  [](const SequenceRecord* a, const SequenceRecord* b) { return a->sequence_id < b->sequence_id; });
        SubjectSeries series;
        series.subject_id = subject;
        for (const SequenceRecord* rec : seqs) {
            const std::string name = rec->subject_id + "/" + rec->sequence_id;
            if (!rec->pspi) throw Error(ErrorKind::manifest, name + ": sequence has no PSPI labels");
            auto it = scores.find({rec->subject_id, rec->sequence_id});
            if (it == scores.end()) throw Error(ErrorKind::shape, name + ": sequence was not scored");
            const auto& frames = it->second;
            if (frames.size() != rec->pspi->size()) {
                throw Error(ErrorKind::shape, name + ": PSPI length does not match the scored frames");
            }
            for (std::size_t i = 0; i < frames.size(); ++i) {
                if (!frames[i].tracking_ok) continue;
                series.ted.push_back(frames[i].ted_score);
                series.pspi.push_back((*rec->pspi)[i]);
            }
        }
        out.push_back(std::move(series));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

double quantile_type7(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorKind::degenerate_input, "quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

DistributionStats describe_distribution(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorKind::degenerate_input, "statistics of an empty sample");
    std::sort(values.begin(), values.end());
    DistributionStats s;
    s.count = values.size();
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_type7(values, 0.25);
    s.median = quantile_type7(values, 0.5);
    s.q3 = quantile_type7(values, 0.75);
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Evaluation and ablation

namespace {

struct SubjectOutcome {
    std::optional<SubjectCorrelation> result;
    std::optional<Finding> skipped;
};

SubjectOutcome evaluate_series(const SubjectSeries& s) {
    SubjectOutcome out;
    try {
        out.result = evaluate_subject(s.subject_id, s.ted, s.pspi);
    } catch (const Error& e) {
        if (e.category() != ErrorCategory::compute) throw;
        out.skipped = Finding{s.subject_id, "", std::nullopt, "pcc", e.what()};
    }
    return out;
}

CorrelationReport assemble(int window, std::vector<SubjectOutcome> outcomes) {
    CorrelationReport report;
    report.window = window;
    std::vector<double> pccs;
    for (auto& o : outcomes) {
        if (o.result) {
            pccs.push_back(o.result->pcc);
            report.subjects.push_back(std::move(*o.result));
        } else if (o.skipped) {
            report.skipped.push_back(std::move(*o.skipped));
        }
    }
    if (!pccs.empty()) report.pcc = describe_distribution(std::move(pccs));
    return report;
}

}  // namespace

CorrelationReport evaluate_dataset(const std::vector<SequenceRecord>& records,
                                   const std::map<SequenceKey, std::vector<ScoredFrame>>& scores, int window,
                                   int jobs) {
    const auto series = build_subject_series(records, scores);
    std::vector<SubjectOutcome> outcomes(series.size());
    parallel_for(series.size(), jobs, [&](std::size_t i) { outcomes[i] = evaluate_series(series[i]); });
    return assemble(window, std::move(outcomes));
}

AblationReport window_ablation(const std::vector<SequenceRecord>& records, const TedConfig& base,
                               const std::vector<int>& windows, int jobs) {
    if (windows.empty()) throw Error(ErrorKind::config, "window sweep set is empty");
    std::vector<TedConfig> configs;
    for (int w : windows) {
        TedConfig cfg = base;
        cfg.window = w;
        cfg.validate();
        configs.push_back(std::move(cfg));
    }

    // Score every (window, sequence) pair.
    const std::size_t n_seq = records.size();
    std::vector<std::vector<ScoredFrame>> scored(configs.size() * n_seq);
    parallel_for(scored.size(), jobs, [&](std::size_t t) {
        const SequenceRecord& rec = records[t % n_seq];
        try {
            scored[t] = score_sequence(rec, configs[t / n_seq]);
        } catch (const Error& e) {
            throw Error(e.kind(), rec.subject_id + "/" + rec.sequence_id + ": " + e.what());
        }
    });

    std::vector<std::vector<SubjectSeries>> series(configs.size());
    for (std::size_t wi = 0; wi < configs.size(); ++wi) {
        std::map<SequenceKey, std::vector<ScoredFrame>> scores;
        for (std::size_t s = 0; s < n_seq; ++s) {
            scores.emplace(SequenceKey{records[s].subject_id, records[s].sequence_id},
                           std::move(scored[wi * n_seq + s]));
        }
        series[wi] = build_subject_series(records, scores);
    }

    // Evaluate every (window, subject) pair.
    const std::size_t n_subj = series.empty() ? 0 : series.front().size();
    std::vector<SubjectOutcome> outcomes(configs.size() * n_subj);
    parallel_for(outcomes.size(), jobs,
                 [&](std::size_t t) { outcomes[t] = evaluate_series(series[t / n_subj][t % n_subj]); });

    AblationReport report;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t wi = 0; wi < configs.size(); ++wi) {
        std::vector<SubjectOutcome> mine(std::make_move_iterator(outcomes.begin() + static_cast<std::ptrdiff_t>(wi * n_subj)),
                                         std::make_move_iterator(outcomes.begin() + static_cast<std::ptrdiff_t>((wi + 1) * n_subj)));
        auto r = assemble(configs[wi].window, std::move(mine));
        if (r.pcc.count > 0 && (r.pcc.mean > best_mean ||
                                (r.pcc.mean == best_mean && r.window < report.best_window))) {
            best_mean = r.pcc.mean;
            report.best_window = r.window;
        }
        report.windows.push_back(std::move(r));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Summary

std::string_view to_string(LabelScale s) { return s == LabelScale::vas ? "VAS" : "OPI"; }

std::optional<LabelScale> parse_label_scale(std::string_view s) {
    if (s == "VAS" || s == "vas") return LabelScale::vas;
    if (s == "OPI" || s == "opi") return LabelScale::opi;
    return std::nullopt;
}

SummaryReport summarize(const std::vector<SequenceRecord>& records,
                        const std::map<SequenceKey, std::vector<ScoredFrame>>& scores, LabelScale scale,
                        ScoreTransform transform) {
    std::map<std::pair<int, std::string>, std::vector<double>> grouped;
    std::map<int, std::vector<double>> pooled;
    SummaryReport report;
    report.scale = scale;
    report.transform = transform;

    for (const auto& rec : records) {
        const std::string name = rec.subject_id + "/" + rec.sequence_id;
        if (!rec.labels) throw Error(ErrorKind::labeling, name + ": sequence has no " + std::string(to_string(scale)) + " label");
        auto it = scores.find({rec.subject_id, rec.sequence_id});
        if (it == scores.end()) throw Error(ErrorKind::shape, name + ": sequence was not scored");
        const int label = scale == LabelScale::vas ? rec.labels->vas : rec.labels->opi;
        auto& group = grouped[{label, std::string(to_string(rec.gender))}];
        auto& all = pooled[label];
        for (const ScoredFrame& f : it->second) {
            double v = f.ted_score;
            if (transform == ScoreTransform::log) {
                if (!(v > 0.0)) {
                    throw Error(ErrorKind::domain, name + ": frame " + std::to_string(f.frame_index) +
                                                       ": log of non-positive TED score");
                }
                v = std::log(v);
            }
            group.push_back(v);
            all.push_back(v);
            ++report.total_frames;
        }
    }
    for (auto& [key, values] : grouped) {
        if (values.empty()) continue;
        report.groups.push_back(SummaryGroup{key.first, key.second, describe_distribution(std::move(values))});
    }
    for (auto& [label, values] : pooled) {
        if (values.empty()) continue;
        report.label_totals.push_back(SummaryGroup{label, "all", describe_distribution(std::move(values))});
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json stats_json(const DistributionStats& s) {
    ordered_json j;
    j["count"] = s.count;
    j["min"] = s.min;
    j["q1"] = s.q1;
    j["median"] = s.median;
    j["q3"] = s.q3;
    j["max"] = s.max;
    j["mean"] = s.mean;
    j["sd"] = s.sd;
    return j;
}

ordered_json report_json(const CorrelationReport& r) {
    ordered_json j;
    j["window"] = r.window;
    ordered_json subjects = ordered_json::array();
    for (const auto& s : r.subjects) {
        subjects.push_back({{"subject_id", s.subject_id}, {"pcc", s.pcc}, {"p_value", s.p_value}, {"n_frames", s.n_frames}});
    }
    j["subjects"] = std::move(subjects);
    ordered_json skipped = ordered_json::array();
    for (const auto& f : r.skipped) skipped.push_back({{"subject_id", f.subject_id}, {"reason", f.message}});
    j["skipped"] = std::move(skipped);
    j["pcc_summary"] = stats_json(r.pcc);
    return j;
}

ordered_json group_json(const SummaryGroup& g) {
    ordered_json j;
    j["label"] = g.label;
    j["gender"] = g.gender;
    j["stats"] = stats_json(g.stats);
    return j;
}

std::ostringstream make_stream() {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::fixed << std::setprecision(4);
    return os;
}

void stats_row(std::ostringstream& os, const DistributionStats& s) {
    os << std::setw(7) << s.count;
    for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.mean, s.sd}) os << std::setw(11) << v;
    os << '\n';
}

const char* kStatsHeader = "  count        min         q1     median         q3        max       mean         sd\n";

std::string stats_csv(const DistributionStats& s) {
    std::string out = std::to_string(s.count);
    for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.mean, s.sd}) out += "," + text::format_double(v);
    return out;
}

}  // namespace

std::string to_json(const CorrelationReport& r) { return report_json(r).dump(2) + "\n"; }

std::string to_json(const AblationReport& r) {
    ordered_json j;
    j["best_window"] = r.best_window;
    ordered_json windows = ordered_json::array();
    for (const auto& w : r.windows) windows.push_back(report_json(w));
    j["windows"] = std::move(windows);
    return j.dump(2) + "\n";
}

std::string to_json(const SummaryReport& r) {
    ordered_json j;
    j["scale"] = std::string(to_string(r.scale));
    j["transform"] = r.transform == ScoreTransform::log ? "log" : "none";
    j["total_frames"] = r.total_frames;
    ordered_json groups = ordered_json::array();
    for (const auto& g : r.groups) groups.push_back(group_json(g));
    j["groups"] = std::move(groups);
    ordered_json totals = ordered_json::array();
    for (const auto& g : r.label_totals) totals.push_back(group_json(g));
    j["label_totals"] = std::move(totals);
    return j.dump(2) + "\n";
}

std::string to_text(const CorrelationReport& r) {
    auto os = make_stream();
    os << "window " << r.window << "\n";
    os << std::left << std::setw(16) << "subject" << std::right << std::setw(10) << "pcc" << std::setw(14)
       << "p_value" << std::setw(10) << "frames" << '\n';
    for (const auto& s : r.subjects) {
        os << std::left << std::setw(16) << s.subject_id << std::right << std::setw(10) << s.pcc
           << std::setw(14) << std::scientific << std::setprecision(3) << s.p_value << std::fixed
           << std::setprecision(4) << std::setw(10) << s.n_frames << '\n';
    }
    for (const auto& f : r.skipped) os << "skipped " << f.subject_id << ": " << f.message << '\n';
    os << "pcc across subjects\n" << kStatsHeader;
    stats_row(os, r.pcc);
    return os.str();
}

std::string to_text(const AblationReport& r) {
    auto os = make_stream();
    os << std::setw(7) << "window" << kStatsHeader;
    for (const auto& w : r.windows) {
        os << std::setw(7) << w.window;
        stats_row(os, w.pcc);
    }
    os << "best window (mean pcc): " << r.best_window << '\n';
    return os.str();
}

std::string to_text(const SummaryReport& r) {
    auto os = make_stream();
    os << "scale " << to_string(r.scale) << ", " << (r.transform == ScoreTransform::log ? "log TED" : "TED")
       << ", " << r.total_frames << " frames\n";
    os << std::setw(6) << "label" << std::setw(13) << "gender" << kStatsHeader;
    for (const auto* list : {&r.groups, &r.label_totals}) {
        for (const auto& g : *list) {
            os << std::setw(6) << g.label << std::setw(13) << g.gender;
            stats_row(os, g.stats);
        }
    }
    return os.str();
}

std::string to_csv(const CorrelationReport& r) {
    std::string out = "window,subject,pcc,p_value,n_frames\n";
    for (const auto& s : r.subjects) {
        out += std::to_string(r.window) + "," + s.subject_id + "," + text::format_double(s.pcc) + "," +
               text::format_double(s.p_value) + "," + std::to_string(s.n_frames) + "\n";
    }
    return out;
}

std::string to_plot_csv(const AblationReport& r) {
    std::string out = "window,count,min,q1,median,q3,max,mean,sd\n";
    for (const auto& w : r.windows) out += std::to_string(w.window) + "," + stats_csv(w.pcc) + "\n";
    return out;
}

std::string to_plot_csv(const SummaryReport& r) {
    std::string out = "label,gender,count,min,q1,median,q3,max,mean,sd\n";
    for (const auto* list : {&r.groups, &r.label_totals}) {
        for (const auto& g : *list) out += std::to_string(g.label) + "," + g.gender + "," + stats_csv(g.stats) + "\n";
    }
    return out;
}

}  // namespace ted
