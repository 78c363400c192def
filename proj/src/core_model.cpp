#include "ted/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ted/errors.hpp"

namespace ted {

namespace {

bool all_finite(const Vec3& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void append(FeatureVector& out, const Vec3& v) { out.insert(out.end(), v.begin(), v.end()); }

}  // namespace

std::string_view short_name(FeatureSet fs) {
    switch (fs) {
        case FeatureSet::landmarks: return "L";
        case FeatureSet::head_translation: return "Ho";
        case FeatureSet::head_rotation: return "Hr";
        case FeatureSet::gaze_left: return "Gl";
        case FeatureSet::gaze_right: return "Gr";
        case FeatureSet::au_intensity: return "I";
    }
    return "?";
}

std::optional<FeatureSet> parse_feature_set(std::string_view tag) {
    for (FeatureSet fs : kAllFeatureSets) {
        if (short_name(fs) == tag) return fs;
    }
    return std::nullopt;
}

AuIntensity AuIntensity::make(int au_id, double level) {
    if (au_id < kMinAuId || au_id > kMaxAuId) {
        throw Error(ErrorKind::domain, "AU id " + std::to_string(au_id) + " outside FACS range 1..64");
    }
    if (!(level >= kMinAuLevel && level <= kMaxAuLevel)) {
        std::ostringstream os;
        os << "AU" << au_id << " level " << level << " outside [0, 5]";
        throw Error(ErrorKind::domain, os.str());
    }
    return AuIntensity{au_id, level};
}

FeatureVector feature_vector(const FrameFeatures& frame, FeatureSet fs, const AuProfile& profile) {
    FeatureVector out;
    switch (fs) {
        case FeatureSet::landmarks:
            out.reserve(frame.landmarks.size() * 2);
            for (const Point2& p : frame.landmarks) {
                out.push_back(p.x);
                out.push_back(p.y);
            }
            break;
        case FeatureSet::head_translation: append(out, frame.head_translation); break;
        case FeatureSet::head_rotation: append(out, frame.head_rotation); break;
        case FeatureSet::gaze_left: append(out, frame.gaze_left); break;
        case FeatureSet::gaze_right: append(out, frame.gaze_right); break;
        case FeatureSet::au_intensity:
            out.reserve(profile.size());
            for (int id : profile.au_ids) {
                auto it = frame.au_intensities.find(id);
                if (it == frame.au_intensities.end()) {
                    throw Error(ErrorKind::domain, "frame " + std::to_string(frame.frame_index) +
                                                       " has no intensity for profile AU" +
                                                       std::to_string(id));
                }
                out.push_back(it->second);
            }
            break;
    }
    return out;
}

AuProfile AuProfile::make(std::string name, std::vector<int> au_ids) {
    if (au_ids.empty()) throw Error(ErrorKind::config, "AU profile '" + name + "' is empty");
    std::sort(au_ids.begin(), au_ids.end());
    if (std::adjacent_find(au_ids.begin(), au_ids.end()) != au_ids.end()) {
        throw Error(ErrorKind::config, "AU profile '" + name + "' lists an AU twice");
    }
    if (au_ids.front() < kMinAuId || au_ids.back() > kMaxAuId) {
        throw Error(ErrorKind::config, "AU profile '" + name + "' has an id outside 1..64");
    }
    return AuProfile{std::move(name), std::move(au_ids)};
}

AuProfile AuProfile::pain() { return make("pain", {4, 6, 9, 10, 25, 43}); }
AuProfile AuProfile::pain_predicted() { return make("pain_predicted", {4, 6, 9, 10, 25}); }
AuProfile AuProfile::happy() { return make("happy", {6, 7, 12, 25, 26}); }

AuProfile AuProfile::overall(const std::vector<FrameFeatures>& frames) {
    std::set<int> ids;
    for (const auto& f : frames) {
        for (const auto& [id, level] : f.au_intensities) ids.insert(id);
    }
    return make("overall", {ids.begin(), ids.end()});
}

bool AuProfile::contains(int au_id) const {
    return std::binary_search(au_ids.begin(), au_ids.end(), au_id);
}

std::string_view to_string(WindowOrientation o) {
    return o == WindowOrientation::trailing ? "trailing" : "forward";
}

std::string_view to_string(AuSource s) { return s == AuSource::manual ? "manual" : "predicted"; }

std::optional<WindowOrientation> parse_window_orientation(std::string_view s) {
    if (s == "trailing") return WindowOrientation::trailing;
    if (s == "forward") return WindowOrientation::forward;
    return std::nullopt;
}

std::optional<AuSource> parse_au_source(std::string_view s) {
    if (s == "manual") return AuSource::manual;
    if (s == "predicted") return AuSource::predicted;
    return std::nullopt;
}

void TedConfig::validate() const {
    if (window < 1) {
        throw Error(ErrorKind::config, "window must be >= 1, got " + std::to_string(window));
    }
    if (profile.au_ids.empty()) throw Error(ErrorKind::config, "AU profile is empty");
    if (au_source == AuSource::predicted && profile.contains(43)) {
        throw Error(ErrorKind::config,
                    "profile '" + profile.name + "' contains AU43, which trackers do not predict");
    }
}

std::string_view to_string(Gender g) {
    switch (g) {
        case Gender::male: return "male";
        case Gender::female: return "female";
        case Gender::unspecified: return "unspecified";
    }
    return "unspecified";
}

std::optional<Gender> parse_gender(std::string_view s) {
    if (s == "male" || s == "m" || s == "M") return Gender::male;
    if (s == "female" || s == "f" || s == "F") return Gender::female;
    if (s == "unspecified" || s.empty()) return Gender::unspecified;
    return std::nullopt;
}

std::string describe(const Finding& f) {
    std::ostringstream os;
    if (!f.subject_id.empty() || !f.sequence_id.empty()) {
        os << f.subject_id << '/' << f.sequence_id << ": ";
    }
    if (f.frame_index) os << "frame " << *f.frame_index << ": ";
    os << f.field << ": " << f.message;
    return os.str();
}

std::vector<Finding> validate_sequence(const SequenceRecord& seq) {
    std::vector<Finding> out;
    auto add = [&](std::optional<int> frame, std::string field, std::string msg) {
        out.push_back(Finding{seq.subject_id, seq.sequence_id, frame, std::move(field), std::move(msg)});
    };

    if (seq.frames.empty()) {
        add(std::nullopt, "frames", "sequence has no frames");
    }

    const std::size_t landmark_count = seq.frames.empty() ? 0 : seq.frames.front().landmarks.size();
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const FrameFeatures& f = seq.frames[i];
        if (i > 0 && f.frame_index <= seq.frames[i - 1].frame_index) {
            add(f.frame_index, "frame_index", "frame index not strictly increasing");
        }
        if (f.landmarks.size() != landmark_count) {
            add(f.frame_index, "landmarks",
                "expected " + std::to_string(landmark_count) + " landmarks, found " +
                    std::to_string(f.landmarks.size()));
        }
        for (const auto& [id, level] : f.au_intensities) {
            if (id < kMinAuId || id > kMaxAuId) {
                add(f.frame_index, "au_intensities", "AU id " + std::to_string(id) + " outside 1..64");
            }
            if (std::isfinite(level) && (level < kMinAuLevel || level > kMaxAuLevel)) {
                add(f.frame_index, "au_intensities",
                    "AU" + std::to_string(id) + " level outside [0, 5]");
            }
        }
        if (f.tracking_ok) {
            bool finite = all_finite(f.head_translation) && all_finite(f.head_rotation) &&
                          all_finite(f.gaze_left) && all_finite(f.gaze_right);
            for (const Point2& p : f.landmarks) finite = finite && std::isfinite(p.x) && std::isfinite(p.y);
            for (const auto& [id, level] : f.au_intensities) finite = finite && std::isfinite(level);
            if (!finite) add(f.frame_index, "features", "non-finite value in a tracked frame");
        }
    }

    if (seq.pspi) {
        if (seq.pspi->size() != seq.frames.size()) {
            add(std::nullopt, "pspi",
                "pspi has " + std::to_string(seq.pspi->size()) + " values for " +
                    std::to_string(seq.frames.size()) + " frames");
        }
        for (std::size_t i = 0; i < seq.pspi->size(); ++i) {
            double v = (*seq.pspi)[i];
            if (!(v >= 0.0 && v <= kMaxPspi)) {
                std::optional<int> frame;
                if (i < seq.frames.size()) frame = seq.frames[i].frame_index;
                add(frame, "pspi", "value outside [0, 16]");
            }
        }
    }

    if (seq.labels) {
        const Labels& l = *seq.labels;
        auto check = [&](int v, int hi, const char* name) {
            if (v < 0 || v > hi) add(std::nullopt, std::string("labels.") + name, "value outside [0, " + std::to_string(hi) + "]");
        };
        check(l.vas, 10, "vas");
        check(l.sen, 10, "sen");
        check(l.aff, 10, "aff");
        check(l.opi, 5, "opi");
    }
    return out;
}

}  // namespace ted
