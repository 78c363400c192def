#include "ted/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ted/ingestion.hpp"
#include "ted/text_io.hpp"

namespace ted::synthetic {

namespace fs = std::filesystem;

namespace {

constexpr std::array<int, 7> kPainAus = {4, 6, 7, 9, 10, 25, 43};

std::string subject_name(int s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%03d", s + 1);
    return buf;
}

std::string sequence_name(int q) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%02d", q + 1);
    return buf;
}

int grade(double x) { return static_cast<int>(std::clamp(std::round(x), 0.0, 5.0)); }

}  // namespace

Random::Random(std::uint64_t seed) : gen_(seed) {}

double Random::uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

double Random::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Random::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Random::below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = gen_();
        if (r >= threshold) return static_cast<std::size_t>(r % bound);
    }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    };
    return mix(seed ^ mix(a ^ mix(b)));
}

std::vector<SequenceRecord> pain_dataset(const PainDatasetParams& p) {
    std::vector<SequenceRecord> out;
    const int burst_len = p.onset + p.hold + p.offset;
    for (int s = 0; s < p.subjects; ++s) {
        // subject traits
        Random traits(mix_seed(p.seed, static_cast<std::uint64_t>(s), 0xA11CE));
        std::map<int, double> au_gain;
        for (int au : kPainAus) au_gain[au] = traits.uniform(0.7, 1.1);
        std::array<std::vector<double>, kFeatureSetCount> shape;
        std::array<double, kFeatureSetCount> gain{};
        for (FeatureSet fs_ : kAllFeatureSets) {
            const std::size_t k = index_of(fs_);
            const std::size_t dim = fs_ == FeatureSet::landmarks ? 2 * p.landmarks : 3;
            for (std::size_t j = 0; j < dim; ++j) shape[k].push_back(p.feature_shape * traits.normal());
            gain[k] = p.motion_gain * traits.uniform(0.8, 1.2);
        }
        const Gender gender = s % 2 == 0 ? Gender::female : Gender::male;

        for (int q = 0; q < p.sequences; ++q) {
            Random rng(mix_seed(p.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(q) + 1));

            // planted expression intensity
            std::vector<double> intensity(static_cast<std::size_t>(p.frames), 0.0);
            double peak_sum = 0.0, peak_max = 0.0;
            const int slot = p.bursts_per_sequence > 0 ? p.frames / p.bursts_per_sequence : p.frames;
            for (int b = 0; b < p.bursts_per_sequence && slot > burst_len; ++b) {
                const int start = b * slot + static_cast<int>(rng.below(static_cast<std::size_t>(slot - burst_len)));
                const double peak = rng.uniform(p.min_peak, p.max_peak);
                peak_sum += peak;
                peak_max = std::max(peak_max, peak);
                for (int t = 0; t < burst_len; ++t) {
                    double v;
                    if (t < p.onset) v = peak * (t + 1) / p.onset;
                    else if (t < p.onset + p.hold) v = peak;
                    else v = peak * (burst_len - t - 1) / std::max(p.offset, 1);
                    intensity[static_cast<std::size_t>(start + t)] = v;
                }
            }

            SequenceRecord rec;
            rec.subject_id = subject_name(s);
            rec.sequence_id = sequence_name(q);
            rec.gender = gender;
            std::vector<double> pspi;
            for (int t = 0; t < p.frames; ++t) {
                const double level = intensity[static_cast<std::size_t>(t)];
                FrameFeatures f;
                f.frame_index = t + 1;
                for (int au : kPainAus) {
                    if (au == 43) continue;
                    const double noise = level > 0.0 ? p.au_noise * rng.normal() : 0.0;
                    f.au_intensities[au] = grade(au_gain[au] * level + noise);
                }
                f.au_intensities[43] = au_gain[43] * level >= 3.0 ? 1.0 : 0.0;

                const std::size_t lead_t = static_cast<std::size_t>(t + p.motion_lead);
                const double motion = lead_t < intensity.size() ? intensity[lead_t] : 0.0;
                std::array<std::vector<double>, kFeatureSetCount> values;
                for (FeatureSet fs_ : kAllFeatureSets) {
                    if (fs_ == FeatureSet::au_intensity) continue;
                    const std::size_t k = index_of(fs_);
                    for (double base : shape[k]) {
                        values[k].push_back(base + gain[k] * motion + p.feature_noise * rng.normal());
                    }
                }
                const auto& lm = values[index_of(FeatureSet::landmarks)];
                for (std::size_t i = 0; i < p.landmarks; ++i) f.landmarks.push_back(Point2{lm[2 * i], lm[2 * i + 1]});
                auto vec3 = [&](FeatureSet fs_) {
                    const auto& v = values[index_of(fs_)];
                    return Vec3{v[0], v[1], v[2]};
                };
                f.head_translation = vec3(FeatureSet::head_translation);
                f.head_rotation = vec3(FeatureSet::head_rotation);
                f.gaze_left = vec3(FeatureSet::gaze_left);
                f.gaze_right = vec3(FeatureSet::gaze_right);
                pspi.push_back(compute_pspi(f));
                rec.frames.push_back(std::move(f));
            }
            rec.pspi = std::move(pspi);
            const double mean_peak = p.bursts_per_sequence > 0 ? peak_sum / p.bursts_per_sequence : 0.0;
            Labels labels;
            labels.vas = std::clamp(static_cast<int>(std::round(mean_peak * 2.0)), 0, 10);
            labels.sen = std::clamp(static_cast<int>(std::round(mean_peak * 2.2)), 0, 10);
            labels.aff = std::clamp(static_cast<int>(std::round(mean_peak * 1.8)), 0, 10);
            labels.opi = std::clamp(static_cast<int>(std::round(peak_max)), 0, 5);
            rec.labels = labels;
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<SequenceRecord> separable_dataset(const SeparableParams& p) {
    std::vector<SequenceRecord> out;
    for (int s = 0; s < p.subjects; ++s) {
        for (int q = 0; q < p.sequences; ++q) {
            Random rng(mix_seed(p.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(q) + 101));
            SequenceRecord rec;
            rec.subject_id = subject_name(s);
            rec.sequence_id = sequence_name(q);
            rec.gender = s % 2 == 0 ? Gender::female : Gender::male;
            std::vector<double> pspi;
            for (int t = 0; t < p.frames; ++t) {
                FrameFeatures f;
                f.frame_index = t + 1;
                f.landmarks.assign(4, Point2{});
                for (std::size_t i = 0; i < f.landmarks.size(); ++i) {
                    f.landmarks[i] = Point2{static_cast<double>(i) + 0.1 * rng.normal(), 0.1 * rng.normal()};
                }
                for (double* v : {&f.head_translation[0], &f.head_rotation[0], &f.gaze_left[0], &f.gaze_right[0]}) {
                    for (int j = 0; j < 3; ++j) v[j] = static_cast<double>(j) + 0.05 * rng.normal();
                }
                const bool pain = rng.uniform() < p.pain_fraction;
                const int au4 = pain ? 3 + static_cast<int>(rng.below(3)) : static_cast<int>(rng.below(3));
                f.au_intensities[4] = au4;
                for (int au : {6, 7, 9, 10, 25}) f.au_intensities[au] = grade(rng.uniform(0.0, 2.0) + p.noise * rng.normal());
                f.au_intensities[43] = rng.uniform() < 0.1 ? 1.0 : 0.0;
                pspi.push_back(pain ? static_cast<double>(au4) : 0.0);
                rec.frames.push_back(std::move(f));
            }
            rec.pspi = std::move(pspi);
            rec.labels = Labels{static_cast<int>(rng.below(11)), static_cast<int>(rng.below(11)),
                                static_cast<int>(rng.below(11)), static_cast<int>(rng.below(6))};
            out.push_back(std::move(rec));
        }
    }
    return out;
}

fs::path write_dataset(const std::vector<SequenceRecord>& records, const fs::path& dir, const AuProfile& manual_profile) {
    fs::create_directories(dir / "features");
    fs::create_directories(dir / "manual");
    fs::create_directories(dir / "pspi");
    DatasetManifest manifest;
    manifest.base_dir = dir;
    for (const auto& rec : records) {
        const std::string stem = rec.subject_id + "_" + rec.sequence_id;
        ManifestEntry e;
        e.subject_id = rec.subject_id;
        e.sequence_id = rec.sequence_id;
        e.labels = rec.labels;
        e.gender = rec.gender;
        e.feature_file_path = fs::path("features") / (stem + ".csv");
        text::write_file(dir / e.feature_file_path, serialize_feature_csv(rec.frames));

        std::string manual = "frame,au,level\n";
        for (const auto& f : rec.frames) {
            for (int id : manual_profile.au_ids) {
                auto it = f.au_intensities.find(id);
                const int level = it == f.au_intensities.end() ? 0 : grade(it->second);
                manual += std::to_string(f.frame_index) + "," + std::to_string(id) + "," + std::to_string(level) + "\n";
            }
        }
        e.manual_au_file_path = fs::path("manual") / (stem + ".csv");
        text::write_file(dir / *e.manual_au_file_path, manual);

        if (rec.pspi) {
            std::string body;
            for (double v : *rec.pspi) body += text::format_double(v) + "\n";
            e.pspi_file_path = fs::path("pspi") / (stem + ".txt");
            text::write_file(dir / *e.pspi_file_path, body);
        }
        manifest.entries.push_back(std::move(e));
    }
    const fs::path manifest_path = dir / "manifest.json";
    text::write_file(manifest_path, serialize_manifest_json(manifest));
    return manifest_path;
}

}  // namespace ted::synthetic
