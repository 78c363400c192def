// Writes a seeded synthetic dataset (feature CSVs, manual AU files, PSPI
// files and manifest.json) for trying the `ted` CLI without licensed data.
#include <CLI11.hpp>
#include <iostream>

#include "ted/errors.hpp"
#include "ted/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic TED dataset", "ted_synth"};
    std::string out = "synthetic_data";
    std::string kind = "pain";
    ted::synthetic::PainDatasetParams pain;
    ted::synthetic::SeparableParams sep;
    int subjects = 0, sequences = 0, frames = 0;
    std::uint64_t seed = 0;
    app.add_option("--out", out, "Output directory")->capture_default_str();
    app.add_option("--kind", kind, "pain (ramping AU bursts) | separable (pain iff AU4 >= 3)")->capture_default_str();
    app.add_option("--subjects", subjects, "Subjects (0: generator default)");
    app.add_option("--sequences", sequences, "Sequences per subject (0: generator default)");
    app.add_option("--frames", frames, "Frames per sequence (0: generator default)");
    app.add_option("--seed", seed, "Seed (0: generator default)");
    CLI11_PARSE(app, argc, argv);

    try {
        std::vector<ted::SequenceRecord> records;
        if (kind == "pain") {
            if (subjects > 0) pain.subjects = subjects;
            if (sequences > 0) pain.sequences = sequences;
            if (frames > 0) pain.frames = frames;
            if (seed != 0) pain.seed = seed;
            records = ted::synthetic::pain_dataset(pain);
        } else if (kind == "separable") {
            if (subjects > 0) sep.subjects = subjects;
            if (sequences > 0) sep.sequences = sequences;
            if (frames > 0) sep.frames = frames;
            if (seed != 0) sep.seed = seed;
            records = ted::synthetic::separable_dataset(sep);
        } else {
            std::cerr << "error: unknown kind '" << kind << "'\n";
            return 2;
        }
        const auto manifest = ted::synthetic::write_dataset(records, out);
        std::cout << manifest.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
