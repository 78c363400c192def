#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ted/core_model.hpp"

namespace ted {

/// S = sum of e^level over the profile AUs. `au_levels` holds one level per
/// profile AU, in profile order.
double static_score(std::span<const double> au_levels, const AuProfile& profile);

/// Unbiased sample variance over the components of v (n - 1 denominator).
double sample_variance(std::span<const double> v);

/// Relative change between consecutive feature vectors:
/// var(next - prev) / (var(prev) + var(next)), or 0 when both variances are 0.
double relative_change(std::span<const double> prev, std::span<const double> next);

/// +1 when the summed displacement next - prev is >= 0, else -1.
int direction_sign(std::span<const double> prev, std::span<const double> next);

/// Mean of the last `window` pushed values. Values are summed oldest to
/// newest on every query, so the result is bit-identical to re-averaging
/// the same slice of the full history.
class MovingAverage {
public:
    explicit MovingAverage(std::size_t window);

    double push(double value);
    double mean() const;
    std::size_t size() const { return count_; }
    std::size_t window() const { return buffer_.size(); }

private:
    std::vector<double> buffer_;
    std::size_t head_ = 0;  // slot of the oldest value
    std::size_t count_ = 0;
};

/// Per-feature-set product windows plus the previous frame's feature
/// vectors the next pair is measured against.
class DynamicsState {
public:
    explicit DynamicsState(int window);

    /// Appends P for the feature set and returns the windowed mean M.
    double push_product(FeatureSet fs, double product);
    std::size_t buffered(FeatureSet fs) const { return averages_[index_of(fs)].size(); }

    const std::optional<FeatureVector>& previous(FeatureSet fs) const { return previous_[index_of(fs)]; }
    void set_previous(FeatureSet fs, FeatureVector v) { previous_[index_of(fs)] = std::move(v); }

private:
    std::array<MovingAverage, kFeatureSetCount> averages_;
    std::array<std::optional<FeatureVector>, kFeatureSetCount> previous_;
};

/// Causal (trailing-window) scorer: one ScoredFrame per pushed frame with
/// no latency. Frames whose tracking failed reuse the last valid feature
/// vectors, so they contribute zero change.
class StreamingScorer {
public:
    explicit StreamingScorer(TedConfig cfg);

    ScoredFrame push(const FrameFeatures& frame);
    std::size_t frames_seen() const { return frames_seen_; }

private:
    TedConfig cfg_;
    DynamicsState state_;
    std::size_t frames_seen_ = 0;
};

/// Scores every frame of the sequence (trailing or forward window per cfg).
/// Errors from the sub-operations are rethrown annotated with the frame.
std::vector<ScoredFrame> score_sequence(const SequenceRecord& seq, const TedConfig& cfg);

using SequenceKey = std::pair<std::string, std::string>;  // (subject, sequence)

struct SequenceError {
    SequenceKey key;
    std::string message;
};

struct DatasetScores {
    std::map<SequenceKey, std::vector<ScoredFrame>> scores;
    std::vector<SequenceError> errors;  // in input order
};

/// Scores sequences independently (on up to `jobs` threads); a failing
/// sequence becomes an error entry instead of aborting the others.
DatasetScores score_dataset(const std::vector<SequenceRecord>& records, const TedConfig& cfg, int jobs = 1);

/// subject,sequence,frame,S,M_L,M_Ho,M_Hr,M_Gl,M_Gr,M_I,ted_score,tracking_ok
std::string serialize_scored_csv(const std::map<SequenceKey, std::vector<ScoredFrame>>& scores);
/// Inverse of serialize_scored_csv. relative_change and direction are not
/// part of the file and come back at their defaults.
std::map<SequenceKey, std::vector<ScoredFrame>> parse_scored_csv(std::string_view text,
                                                                 const std::string& source = "<memory>");

}  // namespace ted
