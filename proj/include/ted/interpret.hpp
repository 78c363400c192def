#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ted/core_model.hpp"
#include "ted/ted_engine.hpp"

namespace ted {

enum class PainClass { neutral = 0, pain = 1 };
std::string_view to_string(PainClass c);

struct FrameKey {
    std::string subject_id;
    std::string sequence_id;
    int frame_index = 0;

    auto operator<=>(const FrameKey&) const = default;
    bool operator==(const FrameKey&) const = default;
};

/// One classifier sample: the profile AU levels of a frame and its class.
struct LabeledRow {
    FrameKey key;
    std::vector<double> features;
    PainClass label = PainClass::neutral;
};

/// Rows for every frame of every record; a frame is pain iff its PSPI
/// exceeds `pspi_threshold`. Throws Error(manifest) for a record without PSPI.
std::vector<LabeledRow> build_frame_rows(const std::vector<SequenceRecord>& records, const AuProfile& profile,
                                         double pspi_threshold = 0.0);

// ---------------------------------------------------------------------------
// Random forest

struct ForestParams {
    int n_trees = 100;
    int max_depth = 0;         // 0: unlimited
    int min_samples_leaf = 1;
    int max_features = 0;      // 0: floor(sqrt(n_features)), at least 1
    bool balanced_bootstrap = false;

    bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when value <= threshold
    int left = -1;
    int right = -1;
    std::array<std::uint32_t, 2> counts{};  // bootstrap samples per class reaching the node

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    /// Majority class of the leaf the row falls into (ties vote pain).
    PainClass vote(std::span<const double> row) const;
    bool operator==(const DecisionTree&) const = default;
};

struct ForestModel {
    std::vector<int> feature_au_ids;
    std::vector<DecisionTree> trees;
    ForestParams params;
    std::uint64_t seed = 0;

    bool operator==(const ForestModel&) const = default;
};

/// Bootstrap-sampled Gini trees over a random feature subset per node.
/// Deterministic given the seed, for any `jobs`. Throws
/// Error(degenerate_labels) when fewer than two classes are present.
ForestModel train_forest(const std::vector<std::vector<double>>& features, const std::vector<PainClass>& labels,
                         std::vector<int> feature_au_ids, const ForestParams& params, std::uint64_t seed,
                         int jobs = 1);
ForestModel train_forest(const std::vector<LabeledRow>& rows, std::vector<int> feature_au_ids,
                         const ForestParams& params, std::uint64_t seed, int jobs = 1);

/// Fraction of trees voting pain.
double forest_confidence(const ForestModel& model, std::span<const double> row);

inline constexpr double kDecisionThreshold = 0.5;

enum class Scenario { true_positive, true_negative, type1, type2 };
std::string_view to_string(Scenario s);
inline constexpr std::array<Scenario, 4> kAllScenarios = {Scenario::true_positive, Scenario::true_negative,
                                                          Scenario::type1, Scenario::type2};

struct Prediction {
    FrameKey key;
    double confidence_pain = 0.0;
    PainClass predicted = PainClass::neutral;
    std::optional<Scenario> scenario;

    bool operator==(const Prediction&) const = default;
};

Prediction make_prediction(FrameKey key, double confidence_pain);

/// Throws Error(schema) when the row lacks one of the model's AU features.
Prediction predict(const ForestModel& model, const FrameKey& key, const AuLevels& row);

std::string serialize_model_json(const ForestModel& model);
ForestModel parse_model_json(std::string_view json_text, const std::string& source = "<memory>");

// ---------------------------------------------------------------------------
// Validation

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool operator==(const Confusion&) const = default;
};

/// F1 of the pain class; nullopt when tp + fp + fn = 0.
std::optional<double> f1_score(const Confusion& c);

struct SubjectF1 {
    std::string subject_id;
    Confusion confusion;
    double f1 = 0.0;
    std::size_t n_frames = 0;

    bool operator==(const SubjectF1&) const = default;
};

struct LosoResult {
    std::vector<SubjectF1> subjects;      // ordered by subject id
    double mean_f1 = 0.0;
    std::vector<Prediction> predictions;  // held-out predictions in row order
    std::vector<Finding> findings;
};

/// Leave-one-subject-out: for every subject a forest trained on the other
/// subjects predicts the held-out frames.
LosoResult loso_validate(const std::vector<LabeledRow>& rows, const std::vector<int>& feature_au_ids,
                         const ForestParams& params, std::uint64_t seed, int jobs = 1);

/// Per-subject F1 of existing predictions against the rows' labels.
LosoResult score_predictions(const std::vector<LabeledRow>& rows, std::vector<Prediction> predictions);

// ---------------------------------------------------------------------------
// Expectation / agreement

using ScenarioBuckets = std::map<Scenario, std::vector<Prediction>>;

/// TP pain->pain, TN neutral->neutral, type1 neutral->pain, type2 pain->neutral.
/// Every returned prediction carries its scenario. Throws Error(labeling)
/// for a prediction without a label.
ScenarioBuckets scenario_partition(const std::vector<Prediction>& predictions,
                                   const std::map<FrameKey, PainClass>& labels);

struct AgreementThresholds {
    double high_ted = 100.0;
    double low_confidence = 0.1;
    double low_ted = 10.0;
    double high_confidence = 0.9;

    bool operator==(const AgreementThresholds&) const = default;
};

struct ScenarioAgreement {
    Scenario scenario = Scenario::true_positive;
    std::vector<std::pair<double, double>> pairs;  // (ted_score, confidence_pain)
    std::optional<double> correlation;

    bool operator==(const ScenarioAgreement&) const = default;
};

struct FlaggedFrame {
    FrameKey key;
    Scenario scenario = Scenario::true_positive;
    double ted_score = 0.0;
    double confidence_pain = 0.0;
    std::string reason;

    bool operator==(const FlaggedFrame&) const = default;
};

struct AgreementResult {
    std::vector<ScenarioAgreement> scenarios;
    std::vector<FlaggedFrame> flagged;
    std::vector<Finding> findings;
};

/// Confidence is expected to rise with the TED score. Flags frames where
/// ted >= high_ted but confidence <= low_confidence, or ted <= low_ted but
/// confidence >= high_confidence. Throws Error(labeling) for a prediction
/// with no TED score.
AgreementResult agreement_analysis(const ScenarioBuckets& buckets, const std::map<FrameKey, double>& ted_scores,
                                   const AgreementThresholds& thresholds = {});

struct InterpretReport {
    std::vector<SubjectF1> subjects;
    double mean_f1 = 0.0;
    std::vector<ScenarioAgreement> scenarios;
    std::vector<FlaggedFrame> flagged;
    std::vector<Finding> findings;
};

std::string to_json(const InterpretReport& r);
std::string to_text(const InterpretReport& r);

/// subject,sequence,frame,confidence_pain,predicted
std::string serialize_predictions_csv(const std::vector<Prediction>& predictions);
/// Accepts files with or without the `predicted` column; the class is
/// always re-derived from the confidence.
std::vector<Prediction> parse_predictions_csv(std::string_view text, const std::string& source = "<memory>");

}  // namespace ted
