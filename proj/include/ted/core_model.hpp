#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ted {

using FeatureVector = std::vector<double>;
using Vec3 = std::array<double, 3>;

/// The six feature streams whose frame-to-frame dynamics enter the score.
enum class FeatureSet : std::size_t {
    landmarks = 0,         // L
    head_translation = 1,  // Ho
    head_rotation = 2,     // Hr
    gaze_left = 3,         // Gl
    gaze_right = 4,        // Gr
    au_intensity = 5,      // I
};

inline constexpr std::size_t kFeatureSetCount = 6;

inline constexpr std::array<FeatureSet, kFeatureSetCount> kAllFeatureSets = {
    FeatureSet::landmarks,  FeatureSet::head_translation, FeatureSet::head_rotation,
    FeatureSet::gaze_left,  FeatureSet::gaze_right,       FeatureSet::au_intensity,
};

constexpr std::size_t index_of(FeatureSet fs) { return static_cast<std::size_t>(fs); }

/// Short tag used in flags and column names: L, Ho, Hr, Gl, Gr, I.
std::string_view short_name(FeatureSet fs);
std::optional<FeatureSet> parse_feature_set(std::string_view tag);

/// FACS action unit number and its intensity on the 0..5 scale.
struct AuIntensity {
    int au_id = 0;
    double level = 0.0;

    /// Throws Error(domain) when au_id is outside 1..64 or level outside [0, 5].
    static AuIntensity make(int au_id, double level);

    bool operator==(const AuIntensity&) const = default;
};

inline constexpr int kMinAuId = 1;
inline constexpr int kMaxAuId = 64;
inline constexpr double kMinAuLevel = 0.0;
inline constexpr double kMaxAuLevel = 5.0;

using AuLevels = std::map<int, double>;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point2&) const = default;
};

struct AuProfile;

struct FrameFeatures {
    int frame_index = 1;
    std::vector<Point2> landmarks;
    Vec3 head_translation{};
    Vec3 head_rotation{};
    Vec3 gaze_left{};
    Vec3 gaze_right{};
    AuLevels au_intensities;
    bool tracking_ok = true;

    bool operator==(const FrameFeatures&) const = default;
};

/// Flattened layout of one feature set: L is x0,y0,x1,y1,...; I is the
/// profile AU levels in ascending au_id order. Throws Error(domain) if a
/// profile AU is absent from the frame.
FeatureVector feature_vector(const FrameFeatures& frame, FeatureSet fs, const AuProfile& profile);

struct AuProfile {
    std::string name;
    std::vector<int> au_ids;  // ascending, unique

    /// Sorts ids; throws Error(config) on empty, duplicate or out-of-range ids.
    static AuProfile make(std::string name, std::vector<int> au_ids);

    static AuProfile pain();            // {4, 6, 9, 10, 25, 43}
    static AuProfile pain_predicted();  // {4, 6, 9, 10, 25}
    static AuProfile happy();           // {6, 7, 12, 25, 26}
    /// Union of every AU present in the frames.
    static AuProfile overall(const std::vector<FrameFeatures>& frames);

    bool contains(int au_id) const;
    std::size_t size() const { return au_ids.size(); }

    bool operator==(const AuProfile&) const = default;
};

enum class WindowOrientation { trailing, forward };
enum class AuSource { manual, predicted };

std::string_view to_string(WindowOrientation o);
std::string_view to_string(AuSource s);
std::optional<WindowOrientation> parse_window_orientation(std::string_view s);
std::optional<AuSource> parse_au_source(std::string_view s);

struct TedConfig {
    int window = 10;
    WindowOrientation window_orientation = WindowOrientation::trailing;
    AuProfile profile = AuProfile::pain();
    AuSource au_source = AuSource::manual;
    std::set<FeatureSet> feature_sets{kAllFeatureSets.begin(), kAllFeatureSets.end()};

    /// Throws Error(config) when window < 1 or a predicted-AU run asks for AU 43.
    void validate() const;

    bool enabled(FeatureSet fs) const { return feature_sets.count(fs) != 0; }
};

struct ScoredFrame {
    int frame_index = 0;
    double static_score = 0.0;
    // Indexed by index_of(FeatureSet). A disabled set reports the factor it
    // contributes to the product (1) with zero change and +1 direction.
    std::array<double, kFeatureSetCount> dynamics{};
    std::array<double, kFeatureSetCount> relative_change{};
    std::array<int, kFeatureSetCount> direction{1, 1, 1, 1, 1, 1};
    double ted_score = 0.0;
    bool tracking_ok = true;

    bool operator==(const ScoredFrame&) const = default;
};

struct Labels {
    int vas = 0;  // 0..10
    int sen = 0;  // 0..10
    int aff = 0;  // 0..10
    int opi = 0;  // 0..5
    bool operator==(const Labels&) const = default;
};

enum class Gender { male, female, unspecified };
std::string_view to_string(Gender g);
std::optional<Gender> parse_gender(std::string_view s);

inline constexpr double kMaxPspi = 16.0;

struct SequenceRecord {
    std::string subject_id;
    std::string sequence_id;
    std::vector<FrameFeatures> frames;
    std::optional<std::vector<double>> pspi;
    std::optional<Labels> labels;
    Gender gender = Gender::unspecified;

    bool operator==(const SequenceRecord&) const = default;
};

struct ManifestEntry {
    std::string subject_id;
    std::string sequence_id;
    std::filesystem::path feature_file_path;
    std::optional<std::filesystem::path> pspi_file_path;
    std::optional<std::filesystem::path> manual_au_file_path;
    std::optional<Labels> labels;
    Gender gender = Gender::unspecified;

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    /// Directory relative entry paths resolve against.
    std::filesystem::path base_dir;

    bool operator==(const DatasetManifest&) const = default;
};

struct Finding {
    std::string subject_id;
    std::string sequence_id;
    std::optional<int> frame_index;
    std::string field;
    std::string message;

    bool operator==(const Finding&) const = default;
};

std::string describe(const Finding& f);

/// Checks every type invariant of the record; empty result means valid.
std::vector<Finding> validate_sequence(const SequenceRecord& seq);

}  // namespace ted
