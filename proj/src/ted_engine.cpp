#include "ted/ted_engine.hpp"

#include <cmath>
#include <numeric>

#include "ted/errors.hpp"
#include "ted/parallel.hpp"
#include "ted/text_io.hpp"

namespace ted {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::shape, "feature vectors differ in length (" + std::to_string(a.size()) + " vs " +
                                          std::to_string(b.size()) + ")");
    }
}

std::vector<double> profile_levels(const FrameFeatures& frame, const AuProfile& profile) {
    return feature_vector(frame, FeatureSet::au_intensity, profile);
}

[[noreturn]] void rethrow_at_frame(const Error& e, int frame_index) {
    throw Error(e.kind(), "frame " + std::to_string(frame_index) + ": " + e.what());
}

// Per-set vectors that enter the dynamics for this frame. Tracking failures
// reuse the previous frame's vectors (zero change); if no earlier frame
// exists the frame's own values are used with non-finite entries zeroed.
std::array<FeatureVector, kFeatureSetCount> dynamics_vectors(const FrameFeatures& frame, const TedConfig& cfg,
                                                             const DynamicsState& state) {
    std::array<FeatureVector, kFeatureSetCount> out;
    for (FeatureSet fs : kAllFeatureSets) {
        if (!cfg.enabled(fs)) continue;
        const auto& prev = state.previous(fs);
        if (!frame.tracking_ok && prev) {
            out[index_of(fs)] = *prev;
            continue;
        }
        FeatureVector v = feature_vector(frame, fs, cfg.profile);
        if (!frame.tracking_ok) {
            for (double& x : v) {
                if (!std::isfinite(x)) x = 0.0;
            }
        }
        out[index_of(fs)] = std::move(v);
    }
    return out;
}

double combine(double static_part, const std::array<double, kFeatureSetCount>& dynamics) {
    double product = 1.0;
    for (double m : dynamics) product *= m;
    return static_part * (1.0 + product);
}

// Relative change, direction and product for every enabled set of one frame
// pair; advances the state's previous vectors. Disabled sets keep their
// neutral values (change 0, direction +1).
std::array<double, kFeatureSetCount> measure_pair(const FrameFeatures& frame, const TedConfig& cfg,
                                                  DynamicsState& state, ScoredFrame& sf) {
    auto vectors = dynamics_vectors(frame, cfg, state);
    std::array<double, kFeatureSetCount> products{};
    for (FeatureSet fs : kAllFeatureSets) {
        if (!cfg.enabled(fs)) continue;
        const std::size_t k = index_of(fs);
        const auto& prev = state.previous(fs);
        if (prev) {
            sf.relative_change[k] = relative_change(*prev, vectors[k]);
            sf.direction[k] = direction_sign(*prev, vectors[k]);
            products[k] = sf.direction[k] * sf.relative_change[k];
        }
        state.set_previous(fs, std::move(vectors[k]));
    }
    return products;
}

ScoredFrame start_frame(const FrameFeatures& frame, const TedConfig& cfg) {
    ScoredFrame sf;
    sf.frame_index = frame.frame_index;
    sf.tracking_ok = frame.tracking_ok;
    sf.static_score = static_score(profile_levels(frame, cfg.profile), cfg.profile);
    for (FeatureSet fs : kAllFeatureSets) {
        sf.dynamics[index_of(fs)] = cfg.enabled(fs) ? 0.0 : 1.0;
    }
    return sf;
}

std::vector<ScoredFrame> score_forward(const SequenceRecord& seq, const TedConfig& cfg) {
    const std::size_t n = seq.frames.size();
    const auto w = static_cast<std::size_t>(cfg.window);
    std::vector<ScoredFrame> out;
    out.reserve(n);
    std::vector<std::array<double, kFeatureSetCount>> products(n);

    DynamicsState state(cfg.window);
    for (std::size_t i = 0; i < n; ++i) {
        const FrameFeatures& frame = seq.frames[i];
        try {
            ScoredFrame sf = start_frame(frame, cfg);
            products[i] = measure_pair(frame, cfg, state, sf);
            out.push_back(sf);
        } catch (const Error& e) {
            rethrow_at_frame(e, frame.frame_index);
        }
    }

    // M at frame i averages the products of pairs i .. i+w-1 (those that
    // exist); the reference frame keeps M = 0.
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t end = std::min(n, i + w);
        for (FeatureSet fs : kAllFeatureSets) {
            if (!cfg.enabled(fs)) continue;
            const std::size_t k = index_of(fs);
            double sum = 0.0;
            for (std::size_t j = i; j < end; ++j) sum += products[j][k];
            out[i].dynamics[k] = sum / static_cast<double>(end - i);
        }
        out[i].ted_score = combine(out[i].static_score, out[i].dynamics);
    }
    if (n > 0) out[0].ted_score = out[0].static_score;
    return out;
}

}  // namespace

double static_score(std::span<const double> au_levels, const AuProfile& profile) {
    if (au_levels.size() != profile.size()) {
        throw Error(ErrorKind::shape, "expected " + std::to_string(profile.size()) + " AU levels for profile '" +
                                          profile.name + "', got " + std::to_string(au_levels.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < au_levels.size(); ++i) {
        const double v = au_levels[i];
        if (!(v >= kMinAuLevel && v <= kMaxAuLevel)) {
            throw Error(ErrorKind::domain, "AU" + std::to_string(profile.au_ids[i]) + " level " +
                                               text::format_double(v) + " outside [0, 5]");
        }
        s += std::exp(v);
    }
    return s;
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) {
        throw Error(ErrorKind::degenerate_input, "variance needs at least 2 components, got " + std::to_string(v.size()));
    }
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / (n - 1.0);
}

double relative_change(std::span<const double> prev, std::span<const double> next) {
    require_same_length(prev, next);
    if (prev.size() < 2) {
        throw Error(ErrorKind::degenerate_input,
                    "relative change needs vectors of length >= 2, got " + std::to_string(prev.size()));
    }
    const double denom = sample_variance(prev) + sample_variance(next);
    if (denom == 0.0) return 0.0;
    std::vector<double> diff(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) diff[i] = next[i] - prev[i];
    return sample_variance(diff) / denom;
}

int direction_sign(std::span<const double> prev, std::span<const double> next) {
    require_same_length(prev, next);
    double sum = 0.0;
    for (std::size_t i = 0; i < prev.size(); ++i) sum += next[i] - prev[i];
    return sum >= 0.0 ? 1 : -1;
}

MovingAverage::MovingAverage(std::size_t window) : buffer_(window) {
    if (window == 0) throw Error(ErrorKind::config, "moving-average window must be >= 1");
}

double MovingAverage::push(double value) {
    if (count_ < buffer_.size()) {
        buffer_[(head_ + count_) % buffer_.size()] = value;
        ++count_;
    } else {
        buffer_[head_] = value;
        head_ = (head_ + 1) % buffer_.size();
    }
    return mean();
}

double MovingAverage::mean() const {
    if (count_ == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < count_; ++i) sum += buffer_[(head_ + i) % buffer_.size()];
    return sum / static_cast<double>(count_);
}

namespace {
std::array<MovingAverage, kFeatureSetCount> make_averages(int window) {
    if (window < 1) throw Error(ErrorKind::config, "window must be >= 1, got " + std::to_string(window));
    const auto w = static_cast<std::size_t>(window);
    return {MovingAverage(w), MovingAverage(w), MovingAverage(w),
            MovingAverage(w), MovingAverage(w), MovingAverage(w)};
}
}  // namespace

DynamicsState::DynamicsState(int window) : averages_(make_averages(window)) {}

double DynamicsState::push_product(FeatureSet fs, double product) {
    return averages_[index_of(fs)].push(product);
}

StreamingScorer::StreamingScorer(TedConfig cfg) : cfg_(std::move(cfg)), state_((cfg_.validate(), cfg_.window)) {}

ScoredFrame StreamingScorer::push(const FrameFeatures& frame) {
    try {
        ScoredFrame sf = start_frame(frame, cfg_);
        const bool reference = frames_seen_ == 0;
        auto products = measure_pair(frame, cfg_, state_, sf);
        if (!reference) {
            for (FeatureSet fs : kAllFeatureSets) {
                if (cfg_.enabled(fs)) sf.dynamics[index_of(fs)] = state_.push_product(fs, products[index_of(fs)]);
            }
        }
        sf.ted_score = reference ? sf.static_score : combine(sf.static_score, sf.dynamics);
        ++frames_seen_;
        return sf;
    } catch (const Error& e) {
        rethrow_at_frame(e, frame.frame_index);
    }
}

std::vector<ScoredFrame> score_sequence(const SequenceRecord& seq, const TedConfig& cfg) {
    cfg.validate();
    if (cfg.window_orientation == WindowOrientation::forward) return score_forward(seq, cfg);
    StreamingScorer scorer(cfg);
    std::vector<ScoredFrame> out;
    out.reserve(seq.frames.size());
    for (const auto& frame : seq.frames) out.push_back(scorer.push(frame));
    return out;
}

DatasetScores score_dataset(const std::vector<SequenceRecord>& records, const TedConfig& cfg, int jobs) {
    cfg.validate();
    std::vector<std::optional<std::vector<ScoredFrame>>> results(records.size());
    std::vector<std::string> messages(records.size());
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        try {
            results[i] = score_sequence(records[i], cfg);
        } catch (const Error& e) {
            messages[i] = e.what();
        }
    });

    DatasetScores out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        SequenceKey key{records[i].subject_id, records[i].sequence_id};
        if (results[i]) {
            out.scores.emplace(std::move(key), std::move(*results[i]));
        } else {
            out.errors.push_back(SequenceError{std::move(key), std::move(messages[i])});
        }
    }
    return out;
}

std::string serialize_scored_csv(const std::map<SequenceKey, std::vector<ScoredFrame>>& scores) {
    std::string out = "subject,sequence,frame,S";
    for (FeatureSet fs : kAllFeatureSets) {
        out += ",M_";
        out += short_name(fs);
    }
    out += ",ted_score,tracking_ok\n";
    for (const auto& [key, frames] : scores) {
        for (const ScoredFrame& f : frames) {
            out += key.first + ',' + key.second + ',' + std::to_string(f.frame_index) + ',' +
                   text::format_double(f.static_score);
            for (double m : f.dynamics) out += ',' + text::format_double(m);
            out += ',' + text::format_double(f.ted_score) + (f.tracking_ok ? ",1\n" : ",0\n");
        }
    }
    return out;
}

std::map<SequenceKey, std::vector<ScoredFrame>> parse_scored_csv(std::string_view body, const std::string& source) {
    const auto lines = text::split_lines(body);
    if (lines.empty() || text::trim(lines[0]).empty()) {
        throw Error(ErrorKind::empty_input, source + ": empty scored CSV");
    }
    constexpr std::size_t kColumns = 4 + kFeatureSetCount + 2;
    if (text::split_csv_line(lines[0]).size() != kColumns) {
        throw Error(ErrorKind::schema, source + ": unexpected scored CSV header");
    }
    std::map<SequenceKey, std::vector<ScoredFrame>> out;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (text::trim(lines[ln]).empty()) continue;
        const auto cells = text::split_csv_line(lines[ln]);
        const std::string where = source + ": row " + std::to_string(ln + 1);
        if (cells.size() != kColumns) throw Error(ErrorKind::parse, where + ": wrong number of cells");
        auto num = [&](std::size_t c) {
            auto v = text::parse_double(cells[c]);
            if (!v) throw Error(ErrorKind::parse, where + ": non-numeric cell " + std::to_string(c + 1));
            return *v;
        };
        ScoredFrame f;
        auto idx = text::parse_int(cells[2]);
        if (!idx) throw Error(ErrorKind::parse, where + ": bad frame index");
        f.frame_index = static_cast<int>(*idx);
        f.static_score = num(3);
        for (std::size_t k = 0; k < kFeatureSetCount; ++k) f.dynamics[k] = num(4 + k);
        f.ted_score = num(4 + kFeatureSetCount);
        f.tracking_ok = num(5 + kFeatureSetCount) != 0.0;
        out[{cells[0], cells[1]}].push_back(f);
    }
    return out;
}

}  // namespace ted
