#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ted/core_model.hpp"

namespace ted {

/// Binds semantic fields to column names of a per-frame feature CSV.
struct FeatureCsvSchema {
    std::string frame = "frame";
    std::string success = "success";  // empty: every row counts as tracked
    std::vector<std::string> landmark_x;
    std::vector<std::string> landmark_y;
    std::array<std::string, 3> pose_translation{"pose_Tx", "pose_Ty", "pose_Tz"};
    std::array<std::string, 3> pose_rotation{"pose_Rx", "pose_Ry", "pose_Rz"};
    std::array<std::string, 3> gaze_left{"gaze_0_x", "gaze_0_y", "gaze_0_z"};
    std::array<std::string, 3> gaze_right{"gaze_1_x", "gaze_1_y", "gaze_1_z"};
    /// au_id -> column. When unset, every header cell of the form AU<nn>_r is bound.
    std::optional<std::map<int, std::string>> au_columns;

    /// Facial-behavior-toolkit 2.x export layout with 68 landmarks.
    static FeatureCsvSchema openface(std::size_t landmark_count = 68);

    /// Starts from openface() and overrides whatever keys the JSON file sets:
    /// frame, success, landmark_x, landmark_y, pose_translation, pose_rotation,
    /// gaze_left, gaze_right, au_columns ({"4": "AU04_r", ...}).
    static FeatureCsvSchema from_json_file(const std::filesystem::path& path);
};

std::vector<FrameFeatures> parse_feature_csv(const std::filesystem::path& path,
                                             const FeatureCsvSchema& schema);
std::vector<FrameFeatures> parse_feature_csv_text(std::string_view text, const FeatureCsvSchema& schema,
                                                  const std::string& source = "<memory>");

/// Writes frames in the default export layout (AU columns AU<nn>_r for every
/// AU seen). Reals use 17 significant digits, so parsing the result back
/// with FeatureCsvSchema::openface(n) reproduces the frames exactly.
std::string serialize_feature_csv(const std::vector<FrameFeatures>& frames);

using ManualAuMap = std::map<int, AuLevels>;  // frame_index -> au_id -> level

/// FACS letter grade to level: A..E -> 1..5. Digits 0..5 pass through.
std::optional<double> decode_facs_level(std::string_view cell);

ManualAuMap parse_manual_au_file(const std::filesystem::path& path);
ManualAuMap parse_manual_au_text(std::string_view text, const std::string& source = "<memory>");

/// Manual mode overwrites every profile AU of every frame with the manual
/// value (0 when the frame lists no entry for that AU). Predicted mode is
/// the identity.
std::vector<FrameFeatures> merge_au_source(const std::vector<FrameFeatures>& frames,
                                           const ManualAuMap& manual, AuSource mode,
                                           const AuProfile& profile);

std::vector<double> parse_pspi_file(const std::filesystem::path& path);
std::vector<double> parse_pspi_text(std::string_view text, const std::string& source = "<memory>");

/// Prkachin-Solomon intensity: AU4 + max(AU6, AU7) + max(AU9, AU10) + AU43.
double compute_pspi(const FrameFeatures& frame);

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest_json(std::string_view json_text, const std::filesystem::path& base_dir,
                                    const std::string& source = "<memory>");
std::string serialize_manifest_json(const DatasetManifest& manifest);

struct LoadOptions {
    AuSource au_source = AuSource::manual;
    AuProfile profile = AuProfile::pain();
    std::optional<std::filesystem::path> schema_path;
    int jobs = 1;
};

struct LoadedDataset {
    std::vector<SequenceRecord> records;  // manifest order
    std::vector<Finding> findings;        // aggregated validate_sequence output
};

/// Parses every referenced file. Hard parse errors propagate; invariant
/// violations are collected as findings.
LoadedDataset load_dataset(const DatasetManifest& manifest, const LoadOptions& options);

}  // namespace ted
