#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "ted/errors.hpp"
#include "ted/ingestion.hpp"
#include "ted/text_io.hpp"

using namespace ted;

namespace {

ErrorKind kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
    try {
        fn();
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorKind::config;
}

std::string zero_csv(std::size_t rows, std::size_t landmarks = 68) {
    std::vector<FrameFeatures> frames;
    for (std::size_t i = 0; i < rows; ++i) {
        FrameFeatures f;
        f.frame_index = static_cast<int>(i) + 1;
        f.landmarks.assign(landmarks, Point2{});
        f.au_intensities = {{4, 0.0}, {6, 0.0}};
        frames.push_back(f);
    }
    return serialize_feature_csv(frames);
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

}  // namespace

TEST(FeatureCsv, AllZeroRows) {
    const auto frames = parse_feature_csv_text(zero_csv(2), FeatureCsvSchema::openface());
    ASSERT_EQ(frames.size(), 2u);
    for (const auto& f : frames) {
        EXPECT_TRUE(f.tracking_ok);
        EXPECT_EQ(f.landmarks.size(), 68u);
        for (const auto& p : f.landmarks) EXPECT_EQ(p, Point2{});
        EXPECT_EQ(f.head_translation, (Vec3{0, 0, 0}));
        EXPECT_EQ(f.au_intensities.at(4), 0.0);
    }
    EXPECT_EQ(frames[1].frame_index, 2);
}

TEST(FeatureCsv, ClampsAuIntensity) {
    std::string csv = zero_csv(1);
    const auto header_end = csv.find('\n');
    // AU04_r is the second-to-last column; rewrite its value.
    const auto last_row = csv.substr(header_end + 1);
    auto cells = text::split_csv_line(last_row.substr(0, last_row.size() - 1));
    cells[cells.size() - 2] = "5.3";
    cells[cells.size() - 1] = "-0.2";
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) row += (i ? "," : "") + cells[i];
    csv = csv.substr(0, header_end + 1) + row + "\n";
    const auto frames = parse_feature_csv_text(csv, FeatureCsvSchema::openface());
    EXPECT_EQ(frames[0].au_intensities.at(4), 5.0);
    EXPECT_EQ(frames[0].au_intensities.at(6), 0.0);
}

TEST(FeatureCsv, MissingColumnIsSchemaErrorNamingIt) {
    const std::string csv = replace_all(zero_csv(2), "gaze_0_x", "gaze_zero_x");
    std::string msg;
    EXPECT_EQ(kind_of([&] { parse_feature_csv_text(csv, FeatureCsvSchema::openface()); }, &msg), ErrorKind::schema);
    EXPECT_NE(msg.find("gaze_0_x"), std::string::npos);
}

TEST(FeatureCsv, DuplicatedBoundColumnIsSchemaError) {
    const std::string csv = replace_all(zero_csv(1), "pose_Ty", "pose_Tx");
    EXPECT_EQ(kind_of([&] { parse_feature_csv_text(csv, FeatureCsvSchema::openface()); }), ErrorKind::schema);
}

TEST(FeatureCsv, NonNumericCellNamesRowAndColumn) {
    std::string csv = zero_csv(2);
    const auto pos = csv.rfind("\n2,1,0,");
    csv.replace(pos, 7, "\n2,1,abc,");
    std::string msg;
    EXPECT_EQ(kind_of([&] { parse_feature_csv_text(csv, FeatureCsvSchema::openface()); }, &msg), ErrorKind::parse);
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x_0"), std::string::npos) << msg;
}

TEST(FeatureCsv, EmptyInput) {
    EXPECT_EQ(kind_of([] { parse_feature_csv_text("", FeatureCsvSchema::openface()); }), ErrorKind::empty_input);
    const std::string one_row = zero_csv(1);
    const std::string header_only = one_row.substr(0, one_row.find('\n') + 1);
    EXPECT_EQ(kind_of([&] { parse_feature_csv_text(header_only, FeatureCsvSchema::openface()); }),
              ErrorKind::empty_input);
}

TEST(FeatureCsv, FailedTrackingRowsAreKept) {
    std::string csv = zero_csv(2);
    const auto pos = csv.rfind("\n2,1,");
    csv.replace(pos, 5, "\n2,0,");
    const auto frames = parse_feature_csv_text(csv, FeatureCsvSchema::openface());
    ASSERT_EQ(frames.size(), 2u);
    EXPECT_TRUE(frames[0].tracking_ok);
    EXPECT_FALSE(frames[1].tracking_ok);
}

TEST(FeatureCsv, SerializeParseRoundTrip) {
    gen::Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t landmarks = static_cast<std::size_t>(gen::integer(rng, 1, 68));
        auto frames = gen::sequence(rng, 15, landmarks, 0.0);
        const auto schema = FeatureCsvSchema::openface(landmarks);
        const std::string once = serialize_feature_csv(frames);
        const auto parsed = parse_feature_csv_text(once, schema);
        EXPECT_EQ(parsed, frames);
        EXPECT_EQ(serialize_feature_csv(parsed), once);
    }
}

TEST(FeatureCsv, SchemaFromJsonOverridesColumns) {
    TempDir dir("schema");
    text::write_file(dir / "schema.json", R"({"frame": "idx", "success": "", "landmark_x": ["px"],
        "landmark_y": ["py"], "pose_translation": ["a","b","c"], "au_columns": {"4": "brow"}})");
    const auto schema = FeatureCsvSchema::from_json_file(dir / "schema.json");
    const std::string csv =
        "idx,px,py,a,b,c,pose_Rx,pose_Ry,pose_Rz,gaze_0_x,gaze_0_y,gaze_0_z,gaze_1_x,gaze_1_y,gaze_1_z,brow,AU06_r\n"
        "7,1,2,3,4,5,0,0,0,0,0,0,0,0,0,2.5,4\n";
    const auto frames = parse_feature_csv_text(csv, schema);
    ASSERT_EQ(frames.size(), 1u);
    EXPECT_EQ(frames[0].frame_index, 7);
    EXPECT_EQ(frames[0].landmarks, (std::vector<Point2>{{1, 2}}));
    EXPECT_EQ(frames[0].head_translation, (Vec3{3, 4, 5}));
    EXPECT_EQ(frames[0].au_intensities, (AuLevels{{4, 2.5}}));
}

TEST(ManualAu, LetterAndDigitCodes) {
    const auto m = parse_manual_au_text("frame,au,level\n10,4,C\n10,43,0\n11,6,E\n");
    EXPECT_EQ(m.at(10).at(4), 3.0);
    EXPECT_EQ(m.at(10).at(43), 0.0);
    EXPECT_EQ(m.at(11).at(6), 5.0);
    EXPECT_EQ(decode_facs_level("A"), 1.0);
    EXPECT_FALSE(decode_facs_level("F"));
}

TEST(ManualAu, Errors) {
    EXPECT_EQ(kind_of([] { parse_manual_au_text("frame,au,level\n5,6,A\n5,6,B\n"); }), ErrorKind::duplicate_entry);
    EXPECT_EQ(kind_of([] { parse_manual_au_text("frame,au,level\n5,6,G\n"); }), ErrorKind::parse);
    EXPECT_EQ(kind_of([] { parse_manual_au_text("frame,level\n5,A\n"); }), ErrorKind::schema);
}

TEST(MergeAuSource, ManualSubstitutesAndDefaultsToZero) {
    FrameFeatures f;
    f.frame_index = 1;
    f.au_intensities = {{4, 1.7}, {6, 2.2}, {12, 3.0}};
    const ManualAuMap manual{{1, {{4, 3.0}}}};
    const auto out = merge_au_source({f}, manual, AuSource::manual, AuProfile::pain());
    EXPECT_EQ(out[0].au_intensities.at(4), 3.0);
    EXPECT_EQ(out[0].au_intensities.at(6), 0.0);   // profile AU absent from the coding
    EXPECT_EQ(out[0].au_intensities.at(43), 0.0);
    EXPECT_EQ(out[0].au_intensities.at(12), 3.0);  // non-profile AU untouched
}

TEST(MergeAuSource, PredictedIsIdentity) {
    gen::Rng rng(5);
    const auto frames = gen::sequence(rng, 10, 4, 0.0);  // NaN never compares equal
    EXPECT_EQ(merge_au_source(frames, {}, AuSource::predicted, AuProfile::pain()), frames);
}

TEST(MergeAuSource, MissingFrameIsCoverageError) {
    std::vector<FrameFeatures> frames(10);
    ManualAuMap manual;
    for (int i = 1; i <= 10; ++i) {
        frames[static_cast<std::size_t>(i - 1)].frame_index = i;
        if (i != 7) manual[i][4] = 1.0;
    }
    std::string msg;
    EXPECT_EQ(kind_of([&] { merge_au_source(frames, manual, AuSource::manual, AuProfile::pain()); }, &msg),
              ErrorKind::coverage);
    EXPECT_NE(msg.find("frame 7"), std::string::npos);
}

TEST(MergeAuSource, Idempotent) {
    gen::Rng rng(6);
    const auto frames = gen::sequence(rng, 12, 3, 0.0);
    ManualAuMap manual;
    for (const auto& f : frames) manual[f.frame_index] = {{4, gen::integer(rng, 0, 5)}, {9, 1.0}};
    const auto once = merge_au_source(frames, manual, AuSource::manual, AuProfile::pain());
    EXPECT_EQ(merge_au_source(once, manual, AuSource::manual, AuProfile::pain()), once);
}

TEST(Pspi, ParseExamples) {
    EXPECT_EQ(parse_pspi_text("0\n3\n16"), (std::vector<double>{0, 3, 16}));
    EXPECT_EQ(parse_pspi_text("frame,pspi\n1,2\n2,0.5\n"), (std::vector<double>{2, 0.5}));
    std::string msg;
    EXPECT_EQ(kind_of([&] { parse_pspi_text("0\n17\n"); }, &msg), ErrorKind::range);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
    EXPECT_EQ(kind_of([] { parse_pspi_text(""); }), ErrorKind::empty_input);
}

TEST(Pspi, ComputeFromAus) {
    FrameFeatures f;
    f.au_intensities = {{4, 0}, {6, 0}, {7, 0}, {9, 0}, {10, 0}, {43, 0}};
    EXPECT_EQ(compute_pspi(f), 0.0);
    f.au_intensities = {{4, 5}, {6, 5}, {7, 2}, {9, 5}, {10, 1}, {43, 1}};
    EXPECT_EQ(compute_pspi(f), 16.0);
    f.au_intensities = {{4, 1}, {6, 0}, {7, 2}, {9, 0}, {10, 0}, {43, 0}};
    EXPECT_EQ(compute_pspi(f), 3.0);
    f.au_intensities.erase(9);
    std::string msg;
    EXPECT_EQ(kind_of([&] { compute_pspi(f); }, &msg), ErrorKind::missing_au);
    EXPECT_NE(msg.find("AU9"), std::string::npos);
}

namespace {

void write_entry(const TempDir& dir, const std::string& stem) {
    text::write_file(dir / (stem + ".csv"), zero_csv(3));
    text::write_file(dir / (stem + "_au.csv"), "frame,au,level\n1,4,B\n2,4,C\n3,4,0\n");
    text::write_file(dir / (stem + "_pspi.txt"), "0\n2\n3\n");
}

std::string entry_json(const std::string& subject, const std::string& sequence, const std::string& stem) {
    return R"({"subject_id": ")" + subject + R"(", "sequence_id": ")" + sequence + R"(", "feature_file_path": ")" +
           stem + R"(.csv", "manual_au_file_path": ")" + stem + R"(_au.csv", "pspi_file_path": ")" + stem +
           R"(_pspi.txt", "labels": {"vas": 4, "sen": 3, "aff": 2, "opi": 1}, "gender": "female"})";
}

}  // namespace

TEST(Manifest, LoadsOneEntry) {
    TempDir dir("manifest");
    write_entry(dir, "a");
    text::write_file(dir / "m.json", R"({"entries": [)" + entry_json("S1", "s1", "a") + "]}");
    const auto m = load_manifest(dir / "m.json");
    ASSERT_EQ(m.entries.size(), 1u);
    const auto data = load_dataset(m, LoadOptions{});
    ASSERT_EQ(data.records.size(), 1u);
    const auto& r = data.records[0];
    EXPECT_EQ(r.subject_id, "S1");
    EXPECT_EQ(r.frames.size(), 3u);
    EXPECT_EQ(r.frames[1].au_intensities.at(4), 3.0);
    EXPECT_EQ(*r.pspi, (std::vector<double>{0, 2, 3}));
    EXPECT_EQ(r.labels->vas, 4);
    EXPECT_EQ(r.gender, Gender::female);
    EXPECT_TRUE(data.findings.empty());
}

TEST(Manifest, DuplicateKeysRejected) {
    const std::string body = R"({"entries": [)" + entry_json("S1", "s1", "a") + "," + entry_json("S1", "s1", "b") + "]}";
    EXPECT_EQ(kind_of([&] { parse_manifest_json(body, "."); }), ErrorKind::manifest);
}

TEST(Manifest, MissingFileIsIoErrorNamingPath) {
    TempDir dir("manifest_missing");
    text::write_file(dir / "m.json", R"({"entries": [)" + entry_json("S1", "s1", "nowhere") + "]}");
    const auto m = load_manifest(dir / "m.json");
    std::string msg;
    EXPECT_EQ(kind_of([&] { load_dataset(m, LoadOptions{}); }, &msg), ErrorKind::io);
    EXPECT_NE(msg.find("nowhere.csv"), std::string::npos);
    EXPECT_EQ(kind_of([&] { load_manifest(dir / "absent.json"); }), ErrorKind::io);
}

TEST(Manifest, SerializeParseRoundTrip) {
    const std::string body = R"({"entries": [)" + entry_json("S1", "s1", "a") + "," + entry_json("S2", "s1", "b") + "]}";
    const auto m = parse_manifest_json(body, "base");
    EXPECT_EQ(parse_manifest_json(serialize_manifest_json(m), "base"), m);
}

TEST(Manifest, FindingsAreCollectedNotThrown) {
    TempDir dir("manifest_findings");
    write_entry(dir, "a");
    text::write_file(dir / "a_pspi.txt", "0\n2\n");  // one value short
    text::write_file(dir / "m.json", R"({"entries": [)" + entry_json("S1", "s1", "a") + "]}");
    const auto data = load_dataset(load_manifest(dir / "m.json"), LoadOptions{});
    ASSERT_EQ(data.findings.size(), 1u);
    EXPECT_EQ(data.findings[0].field, "pspi");
}

TEST(Manifest, ParallelLoadMatchesSerial) {
    TempDir dir("manifest_jobs");
    std::string entries;
    for (int i = 0; i < 6; ++i) {
        const std::string stem = "e" + std::to_string(i);
        write_entry(dir, stem);
        entries += (i ? "," : "") + entry_json("S" + std::to_string(i), "q", stem);
    }
    text::write_file(dir / "m.json", R"({"entries": [)" + entries + "]}");
    const auto m = load_manifest(dir / "m.json");
    LoadOptions serial, parallel;
    parallel.jobs = 4;
    EXPECT_EQ(load_dataset(m, serial).records, load_dataset(m, parallel).records);
}
