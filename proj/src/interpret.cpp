#include "ted/interpret.hpp"

#include <algorithm>
#include <iomanip>
#include <locale>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ted/analytics.hpp"
#include "ted/errors.hpp"
#include "ted/parallel.hpp"
#include "ted/text_io.hpp"

namespace ted {

using nlohmann::ordered_json;

std::string_view to_string(PainClass c) { return c == PainClass::pain ? "pain" : "neutral"; }

std::string_view to_string(Scenario s) {
    switch (s) {
        case Scenario::true_positive: return "true_positive";
        case Scenario::true_negative: return "true_negative";
        case Scenario::type1: return "type1_error";
        case Scenario::type2: return "type2_error";
    }
    return "?";
}

std::vector<LabeledRow> build_frame_rows(const std::vector<SequenceRecord>& records, const AuProfile& profile,
                                         double pspi_threshold) {
    std::vector<LabeledRow> rows;
    for (const auto& rec : records) {
        const std::string name = rec.subject_id + "/" + rec.sequence_id;
        if (!rec.pspi) throw Error(ErrorKind::manifest, name + ": sequence has no PSPI labels");
        if (rec.pspi->size() != rec.frames.size()) {
            throw Error(ErrorKind::shape, name + ": PSPI length does not match the frame count");
        }
        for (std::size_t i = 0; i < rec.frames.size(); ++i) {
            const FrameFeatures& f = rec.frames[i];
            LabeledRow row;
            row.key = FrameKey{rec.subject_id, rec.sequence_id, f.frame_index};
            try {
                row.features = feature_vector(f, FeatureSet::au_intensity, profile);
            } catch (const Error& e) {
                throw Error(e.kind(), name + ": " + e.what());
            }
            row.label = (*rec.pspi)[i] > pspi_threshold ? PainClass::pain : PainClass::neutral;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::optional<double> f1_score(const Confusion& c) {
    const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    if (denom == 0.0) return std::nullopt;
    return 2.0 * static_cast<double>(c.tp) / denom;
}

namespace {

std::map<std::string, std::vector<std::size_t>> rows_by_subject(const std::vector<LabeledRow>& rows) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i].key.subject_id].push_back(i);
    return out;
}

// Per-subject confusion and F1; undefined F1 becomes a finding.
void fill_f1(const std::vector<LabeledRow>& rows, const std::map<std::string, std::vector<std::size_t>>& subjects,
             const std::vector<std::optional<Prediction>>& by_row, LosoResult& out) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& [subject, idx] : subjects) {
        SubjectF1 s;
        s.subject_id = subject;
        for (std::size_t i : idx) {
            if (!by_row[i]) continue;
            ++s.n_frames;
            const bool truth = rows[i].label == PainClass::pain;
            const bool said = by_row[i]->predicted == PainClass::pain;
            if (truth && said) ++s.confusion.tp;
            else if (!truth && said) ++s.confusion.fp;
            else if (truth && !said) ++s.confusion.fn;
            else ++s.confusion.tn;
        }
        if (s.n_frames == 0) continue;
        auto f1 = f1_score(s.confusion);
        if (!f1) {
            out.findings.push_back(Finding{subject, "", std::nullopt, "f1",
                                           "no pain frames and no pain predictions; F1 undefined"});
            continue;
        }
        s.f1 = *f1;
        sum += s.f1;
        ++counted;
        out.subjects.push_back(s);
    }
    out.mean_f1 = counted ? sum / static_cast<double>(counted) : 0.0;
}

}  // namespace

LosoResult loso_validate(const std::vector<LabeledRow>& rows, const std::vector<int>& feature_au_ids,
                         const ForestParams& params, std::uint64_t seed, int jobs) {
    const auto subjects = rows_by_subject(rows);
    if (subjects.size() < 2) throw Error(ErrorKind::degenerate_input, "leave-one-subject-out needs at least 2 subjects");
    const bool has_pain = std::any_of(rows.begin(), rows.end(), [](const LabeledRow& r) { return r.label == PainClass::pain; });
    const bool has_neutral =
        std::any_of(rows.begin(), rows.end(), [](const LabeledRow& r) { return r.label == PainClass::neutral; });
    if (!has_pain || !has_neutral) {
        throw Error(ErrorKind::degenerate_labels, std::string("every frame is labeled ") +
                                                      (has_pain ? "pain" : "neutral") + "; the classifier needs both classes");
    }

    std::vector<std::string> names;
    for (const auto& [s, idx] : subjects) names.push_back(s);

    std::vector<std::optional<Prediction>> by_row(rows.size());
    std::vector<std::optional<Finding>> fold_findings(names.size());
    parallel_for(names.size(), jobs, [&](std::size_t k) {
        const auto& held_out = subjects.at(names[k]);
        std::vector<std::vector<double>> x;
        std::vector<PainClass> y;
        x.reserve(rows.size() - held_out.size());
        for (const auto& r : rows) {
            if (r.key.subject_id == names[k]) continue;
            x.push_back(r.features);
            y.push_back(r.label);
        }
        ForestModel model;
        try {
            model = train_forest(x, y, feature_au_ids, params, seed, 1);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::degenerate_labels) throw;
            fold_findings[k] = Finding{names[k], "", std::nullopt, "fold", std::string("skipped: ") + e.what()};
            return;
        }
        for (std::size_t i : held_out) {
            by_row[i] = make_prediction(rows[i].key, forest_confidence(model, rows[i].features));
        }
    });

    LosoResult out;
    for (auto& f : fold_findings) {
        if (f) out.findings.push_back(std::move(*f));
    }
    fill_f1(rows, subjects, by_row, out);
    for (auto& p : by_row) {
        if (p) out.predictions.push_back(std::move(*p));
    }
    return out;
}

LosoResult score_predictions(const std::vector<LabeledRow>& rows, std::vector<Prediction> predictions) {
    std::map<FrameKey, std::size_t> index;
    for (std::size_t i = 0; i < rows.size(); ++i) index.emplace(rows[i].key, i);
    std::vector<std::optional<Prediction>> by_row(rows.size());
    LosoResult out;
    for (auto& p : predictions) {
        auto it = index.find(p.key);
        if (it == index.end()) {
            out.findings.push_back(Finding{p.key.subject_id, p.key.sequence_id, p.key.frame_index, "prediction",
                                           "no labeled frame for this prediction"});
            continue;
        }
        by_row[it->second] = std::move(p);
    }
    const auto subjects = rows_by_subject(rows);
    for (const auto& [subject, idx] : subjects) {
        const bool any = std::any_of(idx.begin(), idx.end(), [&](std::size_t i) { return by_row[i].has_value(); });
        if (!any) out.findings.push_back(Finding{subject, "", std::nullopt, "prediction", "subject has no predictions"});
    }
    fill_f1(rows, subjects, by_row, out);
    for (auto& p : by_row) {
        if (p) out.predictions.push_back(std::move(*p));
    }
    return out;
}

ScenarioBuckets scenario_partition(const std::vector<Prediction>& predictions,
                                   const std::map<FrameKey, PainClass>& labels) {
    ScenarioBuckets out;
    for (const auto& p : predictions) {
        auto it = labels.find(p.key);
        if (it == labels.end()) {
            throw Error(ErrorKind::labeling, p.key.subject_id + "/" + p.key.sequence_id + ": frame " +
                                                 std::to_string(p.key.frame_index) + " has no label");
        }
        const bool truth = it->second == PainClass::pain;
        const bool said = p.predicted == PainClass::pain;
        Scenario s = truth ? (said ? Scenario::true_positive : Scenario::type2)
                           : (said ? Scenario::type1 : Scenario::true_negative);
        Prediction copy = p;
        copy.scenario = s;
        out[s].push_back(std::move(copy));
    }
    return out;
}

AgreementResult agreement_analysis(const ScenarioBuckets& buckets, const std::map<FrameKey, double>& ted_scores,
                                   const AgreementThresholds& t) {
    AgreementResult out;
    for (Scenario s : kAllScenarios) {
        auto it = buckets.find(s);
        if (it == buckets.end() || it->second.empty()) {
            out.findings.push_back(Finding{"", "", std::nullopt, std::string(to_string(s)), "empty scenario bucket omitted"});
            continue;
        }
        ScenarioAgreement agreement;
        agreement.scenario = s;
        std::vector<double> ted, conf;
        for (const auto& p : it->second) {
            auto score = ted_scores.find(p.key);
            if (score == ted_scores.end()) {
                throw Error(ErrorKind::labeling, p.key.subject_id + "/" + p.key.sequence_id + ": frame " +
                                                     std::to_string(p.key.frame_index) + " has no TED score");
            }
            agreement.pairs.emplace_back(score->second, p.confidence_pain);
            ted.push_back(score->second);
            conf.push_back(p.confidence_pain);

            std::string reason;
            if (score->second >= t.high_ted && p.confidence_pain <= t.low_confidence) {
                reason = "high TED score with low pain confidence";
            } else if (score->second <= t.low_ted && p.confidence_pain >= t.high_confidence) {
                reason = "low TED score with high pain confidence";
            }
            if (!reason.empty()) {
                out.flagged.push_back(FlaggedFrame{p.key, s, score->second, p.confidence_pain, std::move(reason)});
            }
        }
        try {
            agreement.correlation = pearson(ted, conf);
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::compute) throw;
            out.findings.push_back(Finding{"", "", std::nullopt, std::string(to_string(s)),
                                           std::string("correlation unavailable: ") + e.what()});
        }
        out.scenarios.push_back(std::move(agreement));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json key_json(const FrameKey& k) {
    return {{"subject_id", k.subject_id}, {"sequence_id", k.sequence_id}, {"frame", k.frame_index}};
}

ordered_json finding_json(const Finding& f) {
    ordered_json j;
    j["subject_id"] = f.subject_id;
    j["sequence_id"] = f.sequence_id;
    if (f.frame_index) j["frame"] = *f.frame_index;
    j["field"] = f.field;
    j["message"] = f.message;
    return j;
}

}  // namespace

std::string to_json(const InterpretReport& r) {
    ordered_json j;
    ordered_json subjects = ordered_json::array();
    for (const auto& s : r.subjects) {
        subjects.push_back({{"subject_id", s.subject_id},
                            {"f1", s.f1},
                            {"n_frames", s.n_frames},
                            {"tp", s.confusion.tp},
                            {"fp", s.confusion.fp},
                            {"fn", s.confusion.fn},
                            {"tn", s.confusion.tn}});
    }
    j["subjects"] = std::move(subjects);
    j["mean_f1"] = r.mean_f1;
    ordered_json scenarios = ordered_json::array();
    for (const auto& s : r.scenarios) {
        ordered_json e;
        e["scenario"] = std::string(to_string(s.scenario));
        e["count"] = s.pairs.size();
        e["correlation"] = s.correlation ? ordered_json(*s.correlation) : ordered_json(nullptr);
        ordered_json pairs = ordered_json::array();
        for (const auto& [ted, conf] : s.pairs) pairs.push_back({ted, conf});
        e["pairs"] = std::move(pairs);
        scenarios.push_back(std::move(e));
    }
    j["scenarios"] = std::move(scenarios);
    ordered_json flagged = ordered_json::array();
    for (const auto& f : r.flagged) {
        ordered_json e = key_json(f.key);
        e["scenario"] = std::string(to_string(f.scenario));
        e["ted_score"] = f.ted_score;
        e["confidence_pain"] = f.confidence_pain;
        e["reason"] = f.reason;
        flagged.push_back(std::move(e));
    }
    j["flagged"] = std::move(flagged);
    ordered_json findings = ordered_json::array();
    for (const auto& f : r.findings) findings.push_back(finding_json(f));
    j["findings"] = std::move(findings);
    return j.dump(2) + "\n";
}

std::string to_text(const InterpretReport& r) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::fixed << std::setprecision(4);
    os << std::left << std::setw(16) << "subject" << std::right << std::setw(8) << "f1" << std::setw(8) << "frames"
       << std::setw(7) << "tp" << std::setw(7) << "fp" << std::setw(7) << "fn" << std::setw(7) << "tn" << '\n';
    for (const auto& s : r.subjects) {
        os << std::left << std::setw(16) << s.subject_id << std::right << std::setw(8) << s.f1 << std::setw(8)
           << s.n_frames << std::setw(7) << s.confusion.tp << std::setw(7) << s.confusion.fp << std::setw(7)
           << s.confusion.fn << std::setw(7) << s.confusion.tn << '\n';
    }
    os << "mean F1 " << r.mean_f1 << "\n\n";
    os << std::left << std::setw(16) << "scenario" << std::right << std::setw(8) << "count" << std::setw(16)
       << "corr(ted,conf)" << '\n';
    for (const auto& s : r.scenarios) {
        os << std::left << std::setw(16) << to_string(s.scenario) << std::right << std::setw(8) << s.pairs.size();
        if (s.correlation) {
            os << std::setw(16) << *s.correlation;
        } else {
            os << std::setw(16) << "n/a";
        }
        os << '\n';
    }
    os << '\n' << r.flagged.size() << " flagged frame(s)\n";
    for (const auto& f : r.flagged) {
        os << "  " << f.key.subject_id << '/' << f.key.sequence_id << " frame " << f.key.frame_index << " ("
           << to_string(f.scenario) << "): ted " << f.ted_score << ", confidence " << f.confidence_pain << " - "
           << f.reason << '\n';
    }
    for (const auto& f : r.findings) os << "note: " << describe(f) << '\n';
    return os.str();
}

std::string serialize_predictions_csv(const std::vector<Prediction>& predictions) {
    std::string out = "subject,sequence,frame,confidence_pain,predicted\n";
    for (const auto& p : predictions) {
        out += p.key.subject_id + "," + p.key.sequence_id + "," + std::to_string(p.key.frame_index) + "," +
               text::format_double(p.confidence_pain) + "," + std::string(to_string(p.predicted)) + "\n";
    }
    return out;
}

std::vector<Prediction> parse_predictions_csv(std::string_view body, const std::string& source) {
    const auto lines = text::split_lines(body);
    std::size_t header_line = 0;
    while (header_line < lines.size() && text::trim(lines[header_line]).empty()) ++header_line;
    if (header_line == lines.size()) throw Error(ErrorKind::empty_input, source + ": empty predictions file");
    const auto header = text::split_csv_line(lines[header_line]);
    auto col = [&](const char* name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorKind::schema, source + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t cs = col("subject"), cq = col("sequence"), cf = col("frame"), cc = col("confidence_pain");

    std::vector<Prediction> out;
    std::set<FrameKey> seen;
    for (std::size_t ln = header_line + 1; ln < lines.size(); ++ln) {
        if (text::trim(lines[ln]).empty()) continue;
        const std::string where = source + ": row " + std::to_string(ln + 1);
        const auto cells = text::split_csv_line(lines[ln]);
        if (cells.size() != header.size()) throw Error(ErrorKind::parse, where + ": wrong number of cells");
        auto frame = text::parse_int(cells[cf]);
        if (!frame) throw Error(ErrorKind::parse, where + ", column 'frame': not an integer");
        auto conf = text::parse_double(cells[cc]);
        if (!conf || !(*conf >= 0.0 && *conf <= 1.0)) {
            throw Error(ErrorKind::parse, where + ", column 'confidence_pain': expected a probability");
        }
        FrameKey key{cells[cs], cells[cq], static_cast<int>(*frame)};
        if (!seen.insert(key).second) throw Error(ErrorKind::duplicate_entry, where + ": duplicate frame key");
        out.push_back(make_prediction(std::move(key), *conf));
    }
    return out;
}

}  // namespace ted
