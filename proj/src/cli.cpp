#include "ted/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ted/analytics.hpp"
#include "ted/errors.hpp"
#include "ted/ingestion.hpp"
#include "ted/interpret.hpp"
#include "ted/ted_engine.hpp"
#include "ted/text_io.hpp"

namespace ted::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

enum class Format { json, csv, text };

struct CommonOptions {
    std::string manifest;
    int window = 10;
    std::string orientation = "trailing";
    std::string profile = "pain";
    std::string au_source = "manual";
    std::string feature_sets = "L,Ho,Hr,Gl,Gr,I";
    std::string out;
    std::string format = "json";
    std::string schema;
    int jobs = 1;
};

struct SweepOptions {
    std::vector<int> windows = kDefaultAblationWindows;
    bool plot_data = false;
};

struct SummarizeOptions {
    std::string scale = "VAS";
    bool log = true;
    bool plot_data = false;
};

struct InterpretOptions {
    std::uint64_t seed = 7;
    double pspi_threshold = 0.0;
    ForestParams forest;
    AgreementThresholds thresholds;
    std::string predictions;
    std::string model;
    bool save_model = false;
};

/// Everything resolved from the flags, validated before any input is read.
struct RunConfig {
    std::string subcommand;
    fs::path manifest;
    TedConfig ted;
    bool overall_profile = false;
    fs::path out_dir;
    Format format = Format::json;
    std::optional<fs::path> schema;
    int jobs = 1;
};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::config, msg); }

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
    sub->add_option("--w", o.window, "Moving-average window length in frames")->capture_default_str();
    sub->add_option("--window-orientation", o.orientation, "trailing | forward")->capture_default_str();
    sub->add_option("--profile", o.profile, "AU profile: pain | pain_predicted | happy | overall")
        ->capture_default_str();
    sub->add_option("--au-source", o.au_source, "manual | predicted")->capture_default_str();
    sub->add_option("--feature-sets", o.feature_sets,
                    "Comma-separated dynamics sets among L,Ho,Hr,Gl,Gr,I (empty: no dynamics; every set contributes factor 1)")
        ->capture_default_str();
    sub->add_option("--out", o.out, "Output directory (falls back to $TED_OUTPUT_DIR, then ./ted_output)");
    sub->add_option("--format", o.format, "Report format: json | csv | text")->capture_default_str();
    sub->add_option("--schema", o.schema, "JSON column mapping for the feature CSVs (default: OpenFace 2.x names)");
    sub->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")->capture_default_str();
}

AuProfile builtin_profile(const std::string& name) {
    if (name == "pain") return AuProfile::pain();
    if (name == "pain_predicted") return AuProfile::pain_predicted();
    if (name == "happy") return AuProfile::happy();
    config_error("unknown profile '" + name + "' (expected pain, pain_predicted, happy or overall)");
}

RunConfig resolve(const std::string& subcommand, const CommonOptions& o) {
    RunConfig rc;
    rc.subcommand = subcommand;
    rc.manifest = o.manifest;
    rc.ted.window = o.window;
    auto orient = parse_window_orientation(o.orientation);
    if (!orient) config_error("unknown window orientation '" + o.orientation + "'");
    rc.ted.window_orientation = *orient;
    auto source = parse_au_source(o.au_source);
    if (!source) config_error("unknown AU source '" + o.au_source + "'");
    rc.ted.au_source = *source;
    if (o.profile == "overall") {
        rc.overall_profile = true;
        rc.ted.profile = AuProfile::make("overall", {1});  // placeholder until the input is read
    } else {
        rc.ted.profile = builtin_profile(o.profile);
    }
    rc.ted.feature_sets.clear();
    std::string list = o.feature_sets;
    std::stringstream ss(list);
    for (std::string tag; std::getline(ss, tag, ',');) {
        tag = std::string(text::trim(tag));
        if (tag.empty()) continue;
        auto fs_ = parse_feature_set(tag);
        if (!fs_) config_error("unknown feature set '" + tag + "' (expected L, Ho, Hr, Gl, Gr or I)");
        rc.ted.feature_sets.insert(*fs_);
    }
    if (o.format == "json") rc.format = Format::json;
    else if (o.format == "csv") rc.format = Format::csv;
    else if (o.format == "text") rc.format = Format::text;
    else config_error("unknown format '" + o.format + "' (expected json, csv or text)");
    if (o.jobs < 1) config_error("--jobs must be at least 1");
    rc.jobs = o.jobs;
    if (!o.schema.empty()) rc.schema = o.schema;
    if (!o.out.empty()) {
        rc.out_dir = o.out;
    } else if (const char* env = std::getenv("TED_OUTPUT_DIR"); env && *env) {
        rc.out_dir = env;
    } else {
        rc.out_dir = "ted_output";
    }
    rc.ted.validate();
    return rc;
}

// ---------------------------------------------------------------------------
// Input loading and provenance

std::string sha256_hex(const fs::path& path) {
    const std::string body = text::read_file(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(body.data(), body.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::io, path.string() + ": digest computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

struct Inputs {
    DatasetManifest manifest;
    LoadedDataset data;
    std::vector<std::pair<std::string, fs::path>> files;  // (recorded name, resolved path)
};

AuProfile overall_from_manual(const DatasetManifest& m) {
    std::set<int> ids;
    for (const auto& e : m.entries) {
        if (!e.manual_au_file_path) continue;
        const fs::path p = e.manual_au_file_path->is_absolute() ? *e.manual_au_file_path
                                                                : m.base_dir / *e.manual_au_file_path;
        for (const auto& [frame, levels] : parse_manual_au_file(p)) {
            for (const auto& [id, level] : levels) ids.insert(id);
        }
    }
    if (ids.empty()) throw Error(ErrorKind::empty_input, "overall profile: the manual AU files list no AUs");
    return AuProfile::make("overall", {ids.begin(), ids.end()});
}

Inputs load_inputs(RunConfig& rc, std::ostream& err) {
    Inputs in;
    in.manifest = load_manifest(rc.manifest);
    LoadOptions opts;
    opts.au_source = rc.ted.au_source;
    opts.schema_path = rc.schema;
    opts.jobs = rc.jobs;
    if (rc.overall_profile && rc.ted.au_source == AuSource::manual) {
        rc.ted.profile = overall_from_manual(in.manifest);
    }
    opts.profile = rc.ted.profile;
    in.data = load_dataset(in.manifest, opts);
    if (rc.overall_profile && rc.ted.au_source == AuSource::predicted) {
        std::vector<FrameFeatures> all;
        for (const auto& r : in.data.records) all.insert(all.end(), r.frames.begin(), r.frames.end());
        rc.ted.profile = AuProfile::overall(all);
    }
    rc.ted.validate();

    in.files.emplace_back(rc.manifest.string(), rc.manifest);
    if (rc.schema) in.files.emplace_back(rc.schema->string(), *rc.schema);
    auto add = [&](const fs::path& p) {
        in.files.emplace_back(p.generic_string(), p.is_absolute() ? p : in.manifest.base_dir / p);
    };
    for (const auto& e : in.manifest.entries) {
        add(e.feature_file_path);
        if (rc.ted.au_source == AuSource::manual && e.manual_au_file_path) add(*e.manual_au_file_path);
        if (e.pspi_file_path) add(*e.pspi_file_path);
    }
    for (const auto& f : in.data.findings) err << "warning: " << describe(f) << "\n";
    return in;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json config_json(const RunConfig& rc) {
    ordered_json j;
    j["window"] = rc.ted.window;
    j["window_orientation"] = std::string(to_string(rc.ted.window_orientation));
    j["profile"] = {{"name", rc.ted.profile.name}, {"au_ids", rc.ted.profile.au_ids}};
    j["au_source"] = std::string(to_string(rc.ted.au_source));
    ordered_json sets = ordered_json::array();
    for (FeatureSet fs_ : kAllFeatureSets) {
        if (rc.ted.enabled(fs_)) sets.push_back(std::string(short_name(fs_)));
    }
    j["feature_sets"] = sets;
    j["format"] = rc.format == Format::json ? "json" : rc.format == Format::csv ? "csv" : "text";
    j["schema"] = rc.schema ? ordered_json(rc.schema->string()) : ordered_json(nullptr);
    return j;
}

void write_output(const RunConfig& rc, const std::string& name, const std::string& body,
                  std::vector<std::string>& written) {
    text::write_file(rc.out_dir / name, body);
    written.push_back(name);
}

std::string metadata_name(const RunConfig& rc) { return "run_metadata_" + rc.subcommand + ".json"; }

void write_metadata(const RunConfig& rc, const Inputs& in, ordered_json extra, const std::vector<std::string>& outputs) {
    ordered_json j;
    j["tool"] = "ted";
    j["version"] = TED_VERSION;
    j["subcommand"] = rc.subcommand;
    j["config"] = config_json(rc);
    if (!extra.is_null()) j["analysis"] = std::move(extra);
    ordered_json inputs = ordered_json::array();
    for (const auto& [name, path] : in.files) inputs.push_back({{"path", name}, {"sha256", sha256_hex(path)}});
    j["inputs"] = inputs;
    ordered_json findings = ordered_json::array();
    for (const auto& f : in.data.findings) findings.push_back(describe(f));
    j["findings"] = findings;
    j["outputs"] = outputs;
    j["created_at"] = utc_timestamp();
    text::write_file(rc.out_dir / metadata_name(rc), j.dump(2) + "\n");
}

const char* extension(Format f) { return f == Format::json ? ".json" : f == Format::csv ? ".csv" : ".txt"; }

DatasetScores score_all(const RunConfig& rc, const Inputs& in) {
    return score_dataset(in.data.records, rc.ted, rc.jobs);
}

/// Scoring failures are reported together; the first one decides the exit.
void require_scored(const DatasetScores& ds) {
    if (ds.errors.empty()) return;
    std::string msg;
    for (const auto& e : ds.errors) {
        if (!msg.empty()) msg += "\n";
        msg += e.key.first + "/" + e.key.second + ": " + e.message;
    }
    throw Error(ErrorKind::domain, msg);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_score(RunConfig rc, std::ostream& out, std::ostream& err) {
    Inputs in = load_inputs(rc, err);
    DatasetScores ds = score_all(rc, in);
    fs::create_directories(rc.out_dir);
    std::vector<std::string> written;
    write_output(rc, "scores.csv", serialize_scored_csv(ds.scores), written);
    write_metadata(rc, in, nullptr, written);
    require_scored(ds);
    out << "scored " << ds.scores.size() << " sequences -> " << (rc.out_dir / "scores.csv").string() << "\n";
    return kExitOk;
}

int cmd_sweep(RunConfig rc, const SweepOptions& so, std::ostream& out, std::ostream& err) {
    if (so.windows.empty()) config_error("--windows needs at least one window");
    for (int w : so.windows) {
        if (w < 1) config_error("window lengths must be at least 1, got " + std::to_string(w));
    }
    Inputs in = load_inputs(rc, err);
    AblationReport rep = window_ablation(in.data.records, rc.ted, so.windows, rc.jobs);
    fs::create_directories(rc.out_dir);
    std::vector<std::string> written;
    std::string body;
    switch (rc.format) {
        case Format::json: body = to_json(rep); break;
        case Format::text: body = to_text(rep); break;
        case Format::csv: body = to_plot_csv(rep); break;
    }
    write_output(rc, std::string("ablation") + extension(rc.format), body, written);
    if (so.plot_data) write_output(rc, "ablation_plot.csv", to_plot_csv(rep), written);
    write_metadata(rc, in, {{"windows", so.windows}}, written);
    out << to_text(rep);
    return kExitOk;
}

int cmd_evaluate(RunConfig rc, std::ostream& out, std::ostream& err) {
    Inputs in = load_inputs(rc, err);
    DatasetScores ds = score_all(rc, in);
    require_scored(ds);
    CorrelationReport rep = evaluate_dataset(in.data.records, ds.scores, rc.ted.window, rc.jobs);
    fs::create_directories(rc.out_dir);
    std::vector<std::string> written;
    std::string body;
    switch (rc.format) {
        case Format::json: body = to_json(rep); break;
        case Format::text: body = to_text(rep); break;
        case Format::csv: body = to_csv(rep); break;
    }
    write_output(rc, std::string("correlations") + extension(rc.format), body, written);
    write_metadata(rc, in, nullptr, written);
    out << to_text(rep);
    return kExitOk;
}

int cmd_summarize(RunConfig rc, const SummarizeOptions& so, std::ostream& out, std::ostream& err) {
    auto scale = parse_label_scale(so.scale);
    if (!scale) config_error("unknown scale '" + so.scale + "' (expected VAS or OPI)");
    const ScoreTransform transform = so.log ? ScoreTransform::log : ScoreTransform::none;
    Inputs in = load_inputs(rc, err);
    DatasetScores ds = score_all(rc, in);
    require_scored(ds);
    SummaryReport rep = summarize(in.data.records, ds.scores, *scale, transform);
    fs::create_directories(rc.out_dir);
    const std::string stem = "summary_" + std::string(to_string(*scale));
    std::vector<std::string> written;
    std::string body;
    switch (rc.format) {
        case Format::json: body = to_json(rep); break;
        case Format::text: body = to_text(rep); break;
        case Format::csv: body = to_plot_csv(rep); break;
    }
    write_output(rc, stem + extension(rc.format), body, written);
    if (so.plot_data) write_output(rc, stem + "_plot.csv", to_plot_csv(rep), written);
    write_metadata(rc, in, {{"scale", std::string(to_string(*scale))}, {"log", so.log}}, written);
    out << to_text(rep);
    return kExitOk;
}

std::string subject_f1_csv(const InterpretReport& r) {
    std::string s = "subject,tp,fp,fn,tn,f1,n_frames\n";
    for (const auto& sub : r.subjects) {
        const auto& c = sub.confusion;
        s += sub.subject_id + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.fn) +
             "," + std::to_string(c.tn) + "," + text::format_double(sub.f1) + "," + std::to_string(sub.n_frames) +
             "\n";
    }
    return s;
}

int cmd_interpret(RunConfig rc, const InterpretOptions& io, std::ostream& out, std::ostream& err) {
    const auto& fp = io.forest;
    if (fp.n_trees < 1) config_error("--trees must be at least 1");
    if (fp.max_depth < 0) config_error("--max-depth must be non-negative");
    if (fp.min_samples_leaf < 1) config_error("--min-samples-leaf must be at least 1");
    if (fp.max_features < 0) config_error("--max-features must be non-negative");
    if (!io.predictions.empty() && !io.model.empty()) config_error("--predictions and --model are exclusive");

    Inputs in = load_inputs(rc, err);
    DatasetScores ds = score_all(rc, in);
    require_scored(ds);
    const std::vector<LabeledRow> rows = build_frame_rows(in.data.records, rc.ted.profile, io.pspi_threshold);

    LosoResult result;
    std::string mode;
    if (!io.predictions.empty()) {
        mode = "external";
        in.files.emplace_back(io.predictions, io.predictions);
        result = score_predictions(rows, parse_predictions_csv(text::read_file(io.predictions), io.predictions));
    } else if (!io.model.empty()) {
        mode = "model";
        in.files.emplace_back(io.model, io.model);
        const ForestModel model = parse_model_json(text::read_file(io.model), io.model);
        std::vector<Prediction> preds;
        for (const auto& rec : in.data.records) {
            for (const auto& f : rec.frames) {
                preds.push_back(predict(model, FrameKey{rec.subject_id, rec.sequence_id, f.frame_index},
                                        f.au_intensities));
            }
        }
        result = score_predictions(rows, std::move(preds));
    } else {
        mode = "loso";
        result = loso_validate(rows, rc.ted.profile.au_ids, fp, io.seed, rc.jobs);
    }

    std::map<FrameKey, PainClass> labels;
    for (const auto& r : rows) labels.emplace(r.key, r.label);
    std::map<FrameKey, double> ted_scores;
    for (const auto& [key, frames] : ds.scores) {
        for (const auto& f : frames) ted_scores.emplace(FrameKey{key.first, key.second, f.frame_index}, f.ted_score);
    }
    const ScenarioBuckets buckets = scenario_partition(result.predictions, labels);
    AgreementResult agreement = agreement_analysis(buckets, ted_scores, io.thresholds);

    InterpretReport rep;
    rep.subjects = result.subjects;
    rep.mean_f1 = result.mean_f1;
    rep.scenarios = std::move(agreement.scenarios);
    rep.flagged = std::move(agreement.flagged);
    rep.findings = result.findings;
    rep.findings.insert(rep.findings.end(), agreement.findings.begin(), agreement.findings.end());

    fs::create_directories(rc.out_dir);
    std::vector<std::string> written;
    std::string body;
    switch (rc.format) {
        case Format::json: body = to_json(rep); break;
        case Format::text: body = to_text(rep); break;
        case Format::csv: body = subject_f1_csv(rep); break;
    }
    write_output(rc, std::string("interpret") + extension(rc.format), body, written);
    write_output(rc, "predictions.csv", serialize_predictions_csv(result.predictions), written);
    if (io.save_model) {
        const ForestModel model = train_forest(rows, rc.ted.profile.au_ids, fp, io.seed, rc.jobs);
        write_output(rc, "model.json", serialize_model_json(model), written);
    }
    ordered_json extra;
    extra["mode"] = mode;
    extra["seed"] = io.seed;
    extra["pspi_threshold"] = io.pspi_threshold;
    extra["forest"] = {{"n_trees", fp.n_trees},
                       {"max_depth", fp.max_depth},
                       {"min_samples_leaf", fp.min_samples_leaf},
                       {"max_features", fp.max_features},
                       {"balanced_bootstrap", fp.balanced_bootstrap}};
    extra["agreement"] = {{"high_ted", io.thresholds.high_ted},
                          {"low_confidence", io.thresholds.low_confidence},
                          {"low_ted", io.thresholds.low_ted},
                          {"high_confidence", io.thresholds.high_confidence}};
    write_metadata(rc, in, extra, written);
    out << to_text(rep);
    return kExitOk;
}

int exit_code_for(const Error& e) {
    switch (e.category()) {
        case ErrorCategory::config: return kExitConfig;
        case ErrorCategory::parse: return kExitParse;
        case ErrorCategory::compute: return kExitCompute;
    }
    return kExitCompute;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Temporal expressiveness dynamics (TED) scoring and analyses", "ted"};
    app.set_version_flag("--version", std::string(TED_VERSION));
    app.require_subcommand(1, 1);

    CommonOptions common;
    SweepOptions sweep;
    SummarizeOptions summ;
    InterpretOptions interp;

    auto* score = app.add_subcommand("score", "Per-frame TED scores (scores.csv)");
    add_common(score, common);

    auto* sw = app.add_subcommand("sweep", "Window ablation of mean per-subject PCC against PSPI");
    add_common(sw, common);
    sw->add_option("--windows", sweep.windows, "Window lengths to evaluate")->delimiter(',')->capture_default_str();
    sw->add_flag("--plot-data", sweep.plot_data, "Also write box-plot series (ablation_plot.csv)");

    auto* ev = app.add_subcommand("evaluate", "Per-subject PCC and p-value of TED against PSPI");
    add_common(ev, common);

    auto* su = app.add_subcommand("summarize", "Score distribution grouped by label and gender");
    add_common(su, common);
    su->add_option("--scale", summ.scale, "Grouping label: VAS | OPI")->capture_default_str();
    su->add_flag("--log,!--no-log", summ.log, "Natural log of the scores before summarizing")->capture_default_str();
    su->add_flag("--plot-data", summ.plot_data, "Also write box-plot series (summary_<scale>_plot.csv)");

    auto* in = app.add_subcommand("interpret", "Random-forest pain classification and TED agreement");
    add_common(in, common);
    in->add_option("--seed", interp.seed, "Forest seed")->capture_default_str();
    in->add_option("--pspi-threshold", interp.pspi_threshold, "A frame is pain when PSPI exceeds this")
        ->capture_default_str();
    in->add_option("--trees", interp.forest.n_trees, "Trees per forest")->capture_default_str();
    in->add_option("--max-depth", interp.forest.max_depth, "Maximum tree depth (0: unlimited)")
        ->capture_default_str();
    in->add_option("--min-samples-leaf", interp.forest.min_samples_leaf, "Minimum samples per leaf")
        ->capture_default_str();
    in->add_option("--max-features", interp.forest.max_features, "Features tried per split (0: floor(sqrt(n)))")
        ->capture_default_str();
    in->add_flag("--balanced-bootstrap", interp.forest.balanced_bootstrap,
                 "Draw bootstrap samples equally from both classes");
    in->add_option("--high-ted", interp.thresholds.high_ted, "Flag frames with TED at least this...")
        ->capture_default_str();
    in->add_option("--low-confidence", interp.thresholds.low_confidence, "...and pain confidence at most this")
        ->capture_default_str();
    in->add_option("--low-ted", interp.thresholds.low_ted, "Flag frames with TED at most this...")
        ->capture_default_str();
    in->add_option("--high-confidence", interp.thresholds.high_confidence, "...and pain confidence at least this")
        ->capture_default_str();
    in->add_option("--predictions", interp.predictions, "Use an existing predictions CSV instead of LOSO");
    in->add_option("--model", interp.model, "Predict every frame with a saved model instead of LOSO");
    in->add_flag("--save-model", interp.save_model, "Also train on all frames and write model.json");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << TED_VERSION << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        RunConfig rc = resolve(name, common);
        if (name == "score") return cmd_score(std::move(rc), out, err);
        if (name == "sweep") return cmd_sweep(std::move(rc), sweep, out, err);
        if (name == "evaluate") return cmd_evaluate(std::move(rc), out, err);
        if (name == "summarize") return cmd_summarize(std::move(rc), summ, out, err);
        return cmd_interpret(std::move(rc), interp, out, err);
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "error (io): " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitCompute;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace ted::cli
