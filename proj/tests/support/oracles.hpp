#pragma once

// Deliberately naive reference implementations. They share no code with the
// library beyond the plain data types, so agreement is meaningful.

#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ted/core_model.hpp"
#include "ted/interpret.hpp"

namespace oracle {

double static_score(const std::vector<double>& levels);

/// Textbook two-pass unbiased variance.
double variance(const std::vector<double>& v);
double relative_change(const std::vector<double>& prev, const std::vector<double>& next);
int direction(const std::vector<double>& prev, const std::vector<double>& next);

/// Flattened layout of one feature set, written out independently.
std::vector<double> layout(const ted::FrameFeatures& f, ted::FeatureSet fs, const std::vector<int>& au_ids);

struct NaiveFrame {
    double s = 0.0;
    std::array<double, ted::kFeatureSetCount> m{};
    double ted = 0.0;
};

/// Whole-pipeline TED recomputed from scratch for every frame: every
/// window mean re-derives each product from the raw frames.
std::vector<NaiveFrame> score(const std::vector<ted::FrameFeatures>& frames, const ted::TedConfig& cfg);

/// Sort-based quantile: linear interpolation between closest ranks.
double quantile(std::vector<double> values, double p);
double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};
Counts confusion(const std::vector<ted::PainClass>& truth, const std::vector<ted::PainClass>& predicted);
/// -1 when undefined.
double f1(const Counts& c);

}  // namespace oracle

namespace gen {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi);
int integer(Rng& rng, int lo, int hi);  // inclusive
std::vector<double> vector(Rng& rng, std::size_t n, double lo, double hi);

/// A random frame for the pain profile (plus AU7 so PSPI is computable).
ted::FrameFeatures frame(Rng& rng, int index, std::size_t landmarks, bool integer_aus = false);

/// Random sequence with occasional repeated frames (zero change), constant
/// feature vectors (guard branch) and failed-tracking frames.
std::vector<ted::FrameFeatures> sequence(Rng& rng, std::size_t length, std::size_t landmarks,
                                         double failure_rate = 0.05);

}  // namespace gen
