#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ted/core_model.hpp"
#include "ted/ted_engine.hpp"

namespace ted {

// ---------------------------------------------------------------------------
// Correlation

/// Sample Pearson coefficient, clamped to [-1, 1]. Throws on unequal lengths
/// (shape), fewer than 3 points (degenerate_input) or a constant series
/// (undefined_correlation).
double pearson(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Pearson coefficient r over n points, from
/// t = r * sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of freedom.
double pcc_p_value(double r, std::size_t n);

struct SubjectCorrelation {
    std::string subject_id;
    double pcc = 0.0;
    double p_value = 1.0;
    std::size_t n_frames = 0;

    bool operator==(const SubjectCorrelation&) const = default;
};

SubjectCorrelation evaluate_subject(const std::string& subject_id, std::span<const double> ted_scores,
                                    std::span<const double> pspi);

/// One subject's frames from all its sequences, concatenated in
/// (sequence, frame) order; frames whose tracking failed are dropped.
struct SubjectSeries {
    std::string subject_id;
    std::vector<double> ted;
    std::vector<double> pspi;
};

/// Throws Error(manifest) naming the sequence when a record has no PSPI,
/// and Error(shape) when a record has no scores or mismatched lengths.
std::vector<SubjectSeries> build_subject_series(const std::vector<SequenceRecord>& records,
                                                const std::map<SequenceKey, std::vector<ScoredFrame>>& scores);

// ---------------------------------------------------------------------------
// Descriptive statistics

/// Linear interpolation between closest ranks (R type 7). `sorted` must be
/// ascending and non-empty; p in [0, 1].
double quantile_type7(std::span<const double> sorted, double p);

struct DistributionStats {
    std::size_t count = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation; 0 for a single value

    bool operator==(const DistributionStats&) const = default;
};

DistributionStats describe_distribution(std::vector<double> values);

// ---------------------------------------------------------------------------
// Per-subject evaluation and window ablation

struct CorrelationReport {
    int window = 0;
    std::vector<SubjectCorrelation> subjects;  // ordered by subject id
    std::vector<Finding> skipped;              // subjects whose correlation is undefined
    DistributionStats pcc;                     // across evaluated subjects

    bool operator==(const CorrelationReport&) const = default;
};

CorrelationReport evaluate_dataset(const std::vector<SequenceRecord>& records,
                                   const std::map<SequenceKey, std::vector<ScoredFrame>>& scores, int window,
                                   int jobs = 1);

inline const std::vector<int> kDefaultAblationWindows = {3, 5, 10, 20, 40, 60, 75};

struct AblationReport {
    std::vector<CorrelationReport> windows;  // in the requested order
    int best_window = 0;                     // highest mean PCC; ties go to the smaller window

    bool operator==(const AblationReport&) const = default;
};

/// Re-scores the dataset for every window and evaluates every subject.
AblationReport window_ablation(const std::vector<SequenceRecord>& records, const TedConfig& base,
                               const std::vector<int>& windows, int jobs = 1);

// ---------------------------------------------------------------------------
// Label-grouped summary

enum class LabelScale { vas, opi };
enum class ScoreTransform { log, none };

std::string_view to_string(LabelScale s);
std::optional<LabelScale> parse_label_scale(std::string_view s);

struct SummaryGroup {
    int label = 0;
    std::string gender;  // "male" / "female" / "unspecified", or "all" in label totals
    DistributionStats stats;

    bool operator==(const SummaryGroup&) const = default;
};

struct SummaryReport {
    LabelScale scale = LabelScale::vas;
    ScoreTransform transform = ScoreTransform::log;
    std::vector<SummaryGroup> groups;        // by (label, gender)
    std::vector<SummaryGroup> label_totals;  // by label, genders pooled
    std::size_t total_frames = 0;

    bool operator==(const SummaryReport&) const = default;
};

/// Groups every scored frame by its sequence's label on `scale` and by
/// gender. Throws Error(labeling) naming a sequence without labels.
SummaryReport summarize(const std::vector<SequenceRecord>& records,
                        const std::map<SequenceKey, std::vector<ScoredFrame>>& scores, LabelScale scale,
                        ScoreTransform transform);

// ---------------------------------------------------------------------------
// Report serialization

std::string to_json(const CorrelationReport& r);
std::string to_json(const AblationReport& r);
std::string to_json(const SummaryReport& r);
std::string to_text(const CorrelationReport& r);
std::string to_text(const AblationReport& r);
std::string to_text(const SummaryReport& r);
std::string to_csv(const CorrelationReport& r);
/// window,count,min,q1,median,q3,max,mean,sd per window (box-plot series).
std::string to_plot_csv(const AblationReport& r);
/// label,gender,count,min,q1,median,q3,max,mean,sd per group.
std::string to_plot_csv(const SummaryReport& r);

}  // namespace ted
