#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "ted/core_model.hpp"

// Seeded synthetic datasets with a planted pain signal. Used by the test
// suites and the `ted_synth` demo tool; real data is never shipped.
namespace ted::synthetic {

/// Portable generator: mt19937_64 plus hand-rolled uniform/normal draws, so
/// a seed yields the same dataset on every standard library.
class Random {
public:
    explicit Random(std::uint64_t seed);
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double normal();   // standard normal (Box-Muller)
    std::size_t below(std::size_t n);

private:
    std::mt19937_64 gen_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

struct PainDatasetParams {
    int subjects = 25;
    int sequences = 8;
    int frames = 300;
    std::size_t landmarks = 68;
    // Each burst rises over `onset` frames, holds, then falls over `offset`.
    int bursts_per_sequence = 3;
    int onset = 10;
    int hold = 6;
    int offset = 10;
    double min_peak = 1.0;  // peak intensity on the 0..5 AU scale
    double max_peak = 3.0;
    double au_noise = 0.25;       // added before rounding to manual grades
    double feature_noise = 1.0;   // per-component jitter of the motion streams
    double feature_shape = 0.2;   // fixed per-component offsets (spread of the shape)
    double motion_gain = 10.0;    // common-mode displacement per unit of intensity
    int motion_lead = 4;          // head and gaze motion precede the AU response by this many frames
    std::uint64_t seed = 2024;
};

/// Frames carry integer (manual-grade) AU levels for AUs 4, 6, 7, 9, 10, 25,
/// 43 and PSPI computed from them; labels and gender are filled in.
std::vector<SequenceRecord> pain_dataset(const PainDatasetParams& params = {});

struct SeparableParams {
    int subjects = 10;
    int sequences = 2;
    int frames = 120;
    double pain_fraction = 0.35;
    double noise = 0.3;  // uniform jitter on the non-decisive AUs
    std::uint64_t seed = 7;
};

/// Pain iff AU4 >= 3: pain frames draw AU4 from {3, 4, 5}, neutral frames
/// from {0, 1, 2}; the other pain AUs are noise. PSPI = AU4 on pain frames, 0
/// otherwise.
std::vector<SequenceRecord> separable_dataset(const SeparableParams& params = {});

/// Writes feature CSVs, manual AU files, PSPI files and manifest.json under
/// `dir`; returns the manifest path.
std::filesystem::path write_dataset(const std::vector<SequenceRecord>& records, const std::filesystem::path& dir,
                                    const AuProfile& manual_profile = AuProfile::pain());

}  // namespace ted::synthetic
