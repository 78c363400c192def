#include "ted/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ted/errors.hpp"
#include "ted/parallel.hpp"
#include "ted/text_io.hpp"

namespace ted {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string au_column_name(int au_id) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "AU%02d_r", au_id);
    return buf;
}

// "AU04_r" -> 4
std::optional<int> au_id_from_column(std::string_view name) {
    if (name.size() < 5 || name.substr(0, 2) != "AU" || name.substr(name.size() - 2) != "_r") {
        return std::nullopt;
    }
    std::string_view digits = name.substr(2, name.size() - 4);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return std::nullopt;
    }
    auto id = text::parse_int(digits);
    if (!id || *id < kMinAuId || *id > kMaxAuId) return std::nullopt;
    return static_cast<int>(*id);
}

bool is_blank(std::string_view line) { return text::trim(line).empty(); }

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& column,
                             const std::string& what) {
    std::ostringstream os;
    os << source << ": row " << line;
    if (!column.empty()) os << ", column '" << column << "'";
    os << ": " << what;
    throw Error(ErrorKind::parse, os.str());
}

class HeaderIndex {
public:
    HeaderIndex(const std::vector<std::string>& header, const std::string& source) : source_(source) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            auto [it, inserted] = index_.emplace(header[i], i);
            if (!inserted) duplicated_.insert(header[i]);
        }
    }

    std::size_t require(const std::string& column) const {
        auto it = index_.find(column);
        if (it == index_.end()) {
            throw Error(ErrorKind::schema, source_ + ": missing bound column '" + column + "'");
        }
        if (duplicated_.count(column)) {
            throw Error(ErrorKind::schema, source_ + ": bound column '" + column + "' appears more than once");
        }
        return it->second;
    }

    std::optional<std::size_t> find(const std::string& column) const {
        auto it = index_.find(column);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::string source_;
    std::unordered_map<std::string, std::size_t> index_;
    std::set<std::string> duplicated_;
};

template <std::size_t N>
std::array<std::string, N> string_array(const json& j, const char* key) {
    if (!j.is_array() || j.size() != N) {
        throw Error(ErrorKind::schema, std::string("schema key '") + key + "' must be an array of " +
                                           std::to_string(N) + " column names");
    }
    std::array<std::string, N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<std::string>();
    return out;
}

std::string id_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(ErrorKind::manifest, where + ": missing '" + key + "'");
    const json& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw Error(ErrorKind::manifest, where + ": '" + key + "' must be a string or integer");
}

int label_value(const json& labels, const char* key, int hi, const std::string& where) {
    if (!labels.contains(key)) {
        throw Error(ErrorKind::manifest, where + ": labels missing '" + key + "'");
    }
    const json& v = labels.at(key);
    if (!v.is_number_integer()) {
        throw Error(ErrorKind::manifest, where + ": label '" + key + "' must be an integer");
    }
    long long x = v.get<long long>();
    if (x < 0 || x > hi) {
        throw Error(ErrorKind::manifest, where + ": label '" + key + "' = " + std::to_string(x) +
                                             " outside [0, " + std::to_string(hi) + "]");
    }
    return static_cast<int>(x);
}

std::string with_context(const ManifestEntry& e, const std::string& msg) {
    return e.subject_id + "/" + e.sequence_id + ": " + msg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Feature CSV

FeatureCsvSchema FeatureCsvSchema::openface(std::size_t landmark_count) {
    FeatureCsvSchema s;
    s.landmark_x.reserve(landmark_count);
    s.landmark_y.reserve(landmark_count);
    for (std::size_t i = 0; i < landmark_count; ++i) {
        s.landmark_x.push_back("x_" + std::to_string(i));
        s.landmark_y.push_back("y_" + std::to_string(i));
    }
    return s;
}

FeatureCsvSchema FeatureCsvSchema::from_json_file(const fs::path& path) {
    const std::string body = text::read_file(path);
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, path.string() + ": invalid schema JSON: " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::schema, path.string() + ": schema must be a JSON object");

    FeatureCsvSchema s = openface();
    try {
        if (j.contains("frame")) s.frame = j.at("frame").get<std::string>();
        if (j.contains("success")) s.success = j.at("success").get<std::string>();
        if (j.contains("landmark_x")) s.landmark_x = j.at("landmark_x").get<std::vector<std::string>>();
        if (j.contains("landmark_y")) s.landmark_y = j.at("landmark_y").get<std::vector<std::string>>();
        if (j.contains("pose_translation")) s.pose_translation = string_array<3>(j.at("pose_translation"), "pose_translation");
        if (j.contains("pose_rotation")) s.pose_rotation = string_array<3>(j.at("pose_rotation"), "pose_rotation");
        if (j.contains("gaze_left")) s.gaze_left = string_array<3>(j.at("gaze_left"), "gaze_left");
        if (j.contains("gaze_right")) s.gaze_right = string_array<3>(j.at("gaze_right"), "gaze_right");
        if (j.contains("au_columns")) {
            std::map<int, std::string> cols;
            for (const auto& [key, value] : j.at("au_columns").items()) {
                auto id = text::parse_int(key);
                if (!id || *id < kMinAuId || *id > kMaxAuId) {
                    throw Error(ErrorKind::schema, path.string() + ": au_columns key '" + key + "' is not an AU id");
                }
                cols[static_cast<int>(*id)] = value.get<std::string>();
            }
            s.au_columns = std::move(cols);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::schema, path.string() + ": " + e.what());
    }
    if (s.landmark_x.size() != s.landmark_y.size()) {
        throw Error(ErrorKind::schema, path.string() + ": landmark_x and landmark_y differ in length");
    }
    return s;
}

std::vector<FrameFeatures> parse_feature_csv(const fs::path& path, const FeatureCsvSchema& schema) {
    return parse_feature_csv_text(text::read_file(path), schema, path.string());
}

std::vector<FrameFeatures> parse_feature_csv_text(std::string_view body, const FeatureCsvSchema& schema,
                                                  const std::string& source) {
    const auto lines = text::split_lines(body);
    std::size_t header_line = 0;
    while (header_line < lines.size() && is_blank(lines[header_line])) ++header_line;
    if (header_line == lines.size()) throw Error(ErrorKind::empty_input, source + ": empty feature file");

    const auto header = text::split_csv_line(lines[header_line]);
    const HeaderIndex index(header, source);

    const std::size_t frame_col = index.require(schema.frame);
    std::optional<std::size_t> success_col;
    if (!schema.success.empty()) success_col = index.require(schema.success);

    if (schema.landmark_x.size() != schema.landmark_y.size()) {
        throw Error(ErrorKind::schema, source + ": landmark x/y column lists differ in length");
    }
    std::vector<std::size_t> lx, ly;
    for (const auto& c : schema.landmark_x) lx.push_back(index.require(c));
    for (const auto& c : schema.landmark_y) ly.push_back(index.require(c));

    auto bind3 = [&](const std::array<std::string, 3>& cols) {
        return std::array<std::size_t, 3>{index.require(cols[0]), index.require(cols[1]), index.require(cols[2])};
    };
    const auto pose_t = bind3(schema.pose_translation);
    const auto pose_r = bind3(schema.pose_rotation);
    const auto gaze_l = bind3(schema.gaze_left);
    const auto gaze_r = bind3(schema.gaze_right);

    std::vector<std::pair<int, std::size_t>> au_cols;
    if (schema.au_columns) {
        for (const auto& [id, col] : *schema.au_columns) au_cols.emplace_back(id, index.require(col));
    } else {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (auto id = au_id_from_column(header[i])) au_cols.emplace_back(*id, index.require(header[i]));
        }
    }

    std::vector<FrameFeatures> frames;
    for (std::size_t ln = header_line + 1; ln < lines.size(); ++ln) {
        if (is_blank(lines[ln])) continue;
        const std::size_t row = ln + 1;
        const auto cells = text::split_csv_line(lines[ln]);
        if (cells.size() != header.size()) {
            parse_fail(source, row, "", "expected " + std::to_string(header.size()) + " cells, found " +
                                            std::to_string(cells.size()));
        }
        auto num = [&](std::size_t col) {
            auto v = text::parse_double(cells[col]);
            if (!v) parse_fail(source, row, header[col], "non-numeric value '" + cells[col] + "'");
            return *v;
        };
        auto vec3 = [&](const std::array<std::size_t, 3>& cols) {
            return Vec3{num(cols[0]), num(cols[1]), num(cols[2])};
        };

        FrameFeatures f;
        auto idx = text::parse_int(cells[frame_col]);
        if (!idx) parse_fail(source, row, header[frame_col], "frame index is not an integer");
        f.frame_index = static_cast<int>(*idx);
        f.tracking_ok = success_col ? num(*success_col) != 0.0 : true;
        f.landmarks.resize(lx.size());
        for (std::size_t i = 0; i < lx.size(); ++i) f.landmarks[i] = Point2{num(lx[i]), num(ly[i])};
        f.head_translation = vec3(pose_t);
        f.head_rotation = vec3(pose_r);
        f.gaze_left = vec3(gaze_l);
        f.gaze_right = vec3(gaze_r);
        for (const auto& [id, col] : au_cols) {
            double v = num(col);
            if (std::isfinite(v)) v = std::clamp(v, kMinAuLevel, kMaxAuLevel);
            f.au_intensities[id] = v;
        }
        frames.push_back(std::move(f));
    }
    if (frames.empty()) throw Error(ErrorKind::empty_input, source + ": feature file has no data rows");
    return frames;
}

std::string serialize_feature_csv(const std::vector<FrameFeatures>& frames) {
    const std::size_t n_landmarks = frames.empty() ? 0 : frames.front().landmarks.size();
    std::set<int> au_ids;
    for (const auto& f : frames) {
        for (const auto& [id, level] : f.au_intensities) au_ids.insert(id);
    }

    std::string out = "frame,success";
    for (std::size_t i = 0; i < n_landmarks; ++i) out += ",x_" + std::to_string(i);
    for (std::size_t i = 0; i < n_landmarks; ++i) out += ",y_" + std::to_string(i);
    out += ",pose_Tx,pose_Ty,pose_Tz,pose_Rx,pose_Ry,pose_Rz";
    out += ",gaze_0_x,gaze_0_y,gaze_0_z,gaze_1_x,gaze_1_y,gaze_1_z";
    for (int id : au_ids) out += "," + au_column_name(id);
    out += '\n';

    auto put = [&](double v) {
        out += ',';
        out += text::format_double(v);
    };
    for (const auto& f : frames) {
        out += std::to_string(f.frame_index);
        out += f.tracking_ok ? ",1" : ",0";
        for (std::size_t i = 0; i < n_landmarks; ++i) put(i < f.landmarks.size() ? f.landmarks[i].x : 0.0);
        for (std::size_t i = 0; i < n_landmarks; ++i) put(i < f.landmarks.size() ? f.landmarks[i].y : 0.0);
        for (const Vec3* v : {&f.head_translation, &f.head_rotation, &f.gaze_left, &f.gaze_right}) {
            for (double x : *v) put(x);
        }
        for (int id : au_ids) {
            auto it = f.au_intensities.find(id);
            put(it == f.au_intensities.end() ? 0.0 : it->second);
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manual FACS coding

std::optional<double> decode_facs_level(std::string_view cell) {
    cell = text::trim(cell);
    if (cell.size() == 1 && cell[0] >= 'A' && cell[0] <= 'E') return static_cast<double>(cell[0] - 'A' + 1);
    auto v = text::parse_int(cell);
    if (v && *v >= 0 && *v <= 5) return static_cast<double>(*v);
    return std::nullopt;
}

ManualAuMap parse_manual_au_file(const fs::path& path) {
    return parse_manual_au_text(text::read_file(path), path.string());
}

ManualAuMap parse_manual_au_text(std::string_view body, const std::string& source) {
    const auto lines = text::split_lines(body);
    std::size_t header_line = 0;
    while (header_line < lines.size() && is_blank(lines[header_line])) ++header_line;
    if (header_line == lines.size()) throw Error(ErrorKind::empty_input, source + ": empty manual AU file");

    const auto header = text::split_csv_line(lines[header_line]);
    const HeaderIndex index(header, source);
    const std::size_t frame_col = index.require("frame");
    const std::size_t au_col = index.require("au");
    const std::size_t level_col = index.require("level");

    ManualAuMap out;
    for (std::size_t ln = header_line + 1; ln < lines.size(); ++ln) {
        if (is_blank(lines[ln])) continue;
        const std::size_t row = ln + 1;
        const auto cells = text::split_csv_line(lines[ln]);
        if (cells.size() != header.size()) parse_fail(source, row, "", "wrong number of cells");

        auto frame = text::parse_int(cells[frame_col]);
        if (!frame) parse_fail(source, row, "frame", "not an integer: '" + cells[frame_col] + "'");
        auto au = text::parse_int(cells[au_col]);
        if (!au || *au < kMinAuId || *au > kMaxAuId) {
            parse_fail(source, row, "au", "not a FACS AU number: '" + cells[au_col] + "'");
        }
        auto level = decode_facs_level(cells[level_col]);
        if (!level) parse_fail(source, row, "level", "unknown intensity code '" + cells[level_col] + "'");

        auto& levels = out[static_cast<int>(*frame)];
        auto [it, inserted] = levels.emplace(static_cast<int>(*au), *level);
        if (!inserted) {
            throw Error(ErrorKind::duplicate_entry, source + ": row " + std::to_string(row) +
                                                        ": duplicate entry for frame " + std::to_string(*frame) +
                                                        ", AU" + std::to_string(*au));
        }
    }
    return out;
}

std::vector<FrameFeatures> merge_au_source(const std::vector<FrameFeatures>& frames, const ManualAuMap& manual,
                                           AuSource mode, const AuProfile& profile) {
    if (mode == AuSource::predicted) return frames;
    std::vector<FrameFeatures> out = frames;
    for (auto& f : out) {
        auto it = manual.find(f.frame_index);
        if (it == manual.end()) {
            throw Error(ErrorKind::coverage,
                        "manual AU coding has no entry for frame " + std::to_string(f.frame_index));
        }
        for (int id : profile.au_ids) {
            auto lv = it->second.find(id);
            f.au_intensities[id] = lv == it->second.end() ? 0.0 : lv->second;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PSPI

std::vector<double> parse_pspi_file(const fs::path& path) {
    return parse_pspi_text(text::read_file(path), path.string());
}

std::vector<double> parse_pspi_text(std::string_view body, const std::string& source) {
    const auto lines = text::split_lines(body);
    std::optional<std::size_t> column;  // set when a CSV header with a "pspi" column is present
    std::vector<double> values;
    bool first = true;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (is_blank(lines[ln])) continue;
        const std::size_t row = ln + 1;
        auto cells = text::split_csv_line(lines[ln]);
        if (first) {
            first = false;
            auto it = std::find(cells.begin(), cells.end(), "pspi");
            if (it != cells.end()) {
                column = static_cast<std::size_t>(it - cells.begin());
                continue;
            }
        }
        const std::size_t col = column.value_or(0);
        if (!column && cells.size() != 1) parse_fail(source, row, "", "expected one value per line");
        if (col >= cells.size()) parse_fail(source, row, "pspi", "missing value");
        auto v = text::parse_double(cells[col]);
        if (!v) parse_fail(source, row, "pspi", "non-numeric value '" + cells[col] + "'");
        if (!(*v >= 0.0 && *v <= kMaxPspi)) {
            throw Error(ErrorKind::range, source + ": line " + std::to_string(row) + ": PSPI value " +
                                              text::format_double(*v) + " outside [0, 16]");
        }
        values.push_back(*v);
    }
    if (values.empty()) throw Error(ErrorKind::empty_input, source + ": empty PSPI file");
    return values;
}

double compute_pspi(const FrameFeatures& frame) {
    auto level = [&](int id) {
        auto it = frame.au_intensities.find(id);
        if (it == frame.au_intensities.end()) {
            throw Error(ErrorKind::missing_au, "frame " + std::to_string(frame.frame_index) +
                                                   ": PSPI needs AU" + std::to_string(id));
        }
        return it->second;
    };
    const double au43 = level(43);
    if (au43 != 0.0 && au43 != 1.0) {
        throw Error(ErrorKind::domain, "frame " + std::to_string(frame.frame_index) + ": AU43 must be 0 or 1");
    }
    return level(4) + std::max(level(6), level(7)) + std::max(level(9), level(10)) + au43;
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest load_manifest(const fs::path& path) {
    const std::string body = text::read_file(path);
    fs::path base = path.parent_path();
    return parse_manifest_json(body, base, path.string());
}

DatasetManifest parse_manifest_json(std::string_view json_text, const fs::path& base_dir,
                                    const std::string& source) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::manifest, source + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array()) {
        throw Error(ErrorKind::manifest, source + ": expected an object with an 'entries' array");
    }

    DatasetManifest m;
    m.base_dir = base_dir;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t i = 0;
    for (const json& e : j.at("entries")) {
        const std::string where = source + ": entries[" + std::to_string(i++) + "]";
        if (!e.is_object()) throw Error(ErrorKind::manifest, where + ": entry must be an object");
        ManifestEntry entry;
        entry.subject_id = id_string(e, "subject_id", where);
        entry.sequence_id = id_string(e, "sequence_id", where);
        auto path_field = [&](const char* key) -> std::optional<fs::path> {
            if (!e.contains(key) || e.at(key).is_null()) return std::nullopt;
            if (!e.at(key).is_string()) throw Error(ErrorKind::manifest, where + ": '" + key + "' must be a string");
            return fs::path(e.at(key).get<std::string>());
        };
        auto feature = path_field("feature_file_path");
        if (!feature) throw Error(ErrorKind::manifest, where + ": missing 'feature_file_path'");
        entry.feature_file_path = *feature;
        entry.pspi_file_path = path_field("pspi_file_path");
        entry.manual_au_file_path = path_field("manual_au_file_path");
        if (e.contains("labels") && !e.at("labels").is_null()) {
            const json& l = e.at("labels");
            if (!l.is_object()) throw Error(ErrorKind::manifest, where + ": 'labels' must be an object");
            entry.labels = Labels{label_value(l, "vas", 10, where), label_value(l, "sen", 10, where),
                                  label_value(l, "aff", 10, where), label_value(l, "opi", 5, where)};
        }
        if (e.contains("gender") && !e.at("gender").is_null()) {
            auto g = e.at("gender").is_string() ? parse_gender(e.at("gender").get<std::string>()) : std::nullopt;
            if (!g) throw Error(ErrorKind::manifest, where + ": unknown gender");
            entry.gender = *g;
        }
        if (!seen.emplace(entry.subject_id, entry.sequence_id).second) {
            throw Error(ErrorKind::manifest, where + ": duplicate (subject, sequence) pair (" + entry.subject_id +
                                                 ", " + entry.sequence_id + ")");
        }
        m.entries.push_back(std::move(entry));
    }
    return m;
}

std::string serialize_manifest_json(const DatasetManifest& manifest) {
    json entries = json::array();
    for (const auto& e : manifest.entries) {
        json j;
        j["subject_id"] = e.subject_id;
        j["sequence_id"] = e.sequence_id;
        j["feature_file_path"] = e.feature_file_path.generic_string();
        if (e.pspi_file_path) j["pspi_file_path"] = e.pspi_file_path->generic_string();
        if (e.manual_au_file_path) j["manual_au_file_path"] = e.manual_au_file_path->generic_string();
        if (e.labels) {
            j["labels"] = {{"vas", e.labels->vas}, {"sen", e.labels->sen}, {"aff", e.labels->aff}, {"opi", e.labels->opi}};
        }
        j["gender"] = std::string(to_string(e.gender));
        entries.push_back(std::move(j));
    }
    json root;
    root["entries"] = std::move(entries);
    return root.dump(2) + "\n";
}

LoadedDataset load_dataset(const DatasetManifest& manifest, const LoadOptions& options) {
    const FeatureCsvSchema schema =
        options.schema_path ? FeatureCsvSchema::from_json_file(*options.schema_path) : FeatureCsvSchema::openface();
    auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : manifest.base_dir / p; };

    std::vector<SequenceRecord> records(manifest.entries.size());
    parallel_for(records.size(), options.jobs, [&](std::size_t i) {
        const ManifestEntry& e = manifest.entries[i];
        SequenceRecord rec;
        rec.subject_id = e.subject_id;
        rec.sequence_id = e.sequence_id;
        rec.labels = e.labels;
        rec.gender = e.gender;
        try {
            auto frames = parse_feature_csv(resolve(e.feature_file_path), schema);
            if (options.au_source == AuSource::manual) {
                if (!e.manual_au_file_path) {
                    throw Error(ErrorKind::manifest, "manual AU source requested but no manual_au_file_path given");
                }
                frames = merge_au_source(frames, parse_manual_au_file(resolve(*e.manual_au_file_path)),
                                         AuSource::manual, options.profile);
            }
            rec.frames = std::move(frames);
            if (e.pspi_file_path) rec.pspi = parse_pspi_file(resolve(*e.pspi_file_path));
        } catch (const Error& err) {
            throw Error(err.kind(), with_context(e, err.what()));
        }
        records[i] = std::move(rec);
    });

    LoadedDataset out;
    for (const auto& rec : records) {
        auto f = validate_sequence(rec);
        out.findings.insert(out.findings.end(), f.begin(), f.end());
    }
    out.records = std::move(records);
    return out;
}

}  // namespace ted
