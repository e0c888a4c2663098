#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idol/scm/mixing.hpp"
#include "idol/scm/process.hpp"

namespace idol::scm {

// Generated corpus of observation windows with their ground-truth latents.
// Storage is float32, sequence major: element (k, t, i) sits at
// (k * L + t) * n + i. The validation split is the leading val_count
// sequences, the remainder is the training split.
struct Dataset {
    LatentProcessSpec spec;
    MixingSpec mixing;
    std::string preset_name;  // empty for custom specs
    std::uint64_t seed = 0;
    int num_sequences = 0;
    int burn_in = 0;
    int val_count = 0;
    std::vector<float> x;  // N * L * n
    std::vector<float> z;  // N * L * n

    int n() const { return spec.n; }
    int seq_len() const { return spec.seq_len; }
    int train_count() const { return num_sequences - val_count; }

    const float* x_seq(int k) const {
        return x.data() + static_cast<std::size_t>(k) * seq_len() * n();
    }
    const float* z_seq(int k) const {
        return z.data() + static_cast<std::size_t>(k) * seq_len() * n();
    }
};

// Draws each sequence from its own labeled RNG stream (seed, "datagen", k):
// an initial state from the noise law, burn_in discarded transitions, then
// seq_len recorded transitions, observations mixed per timestep. Identical
// inputs give bitwise-identical output for any thread count.
// val_count -1 selects the default: min(1024, N / 4), at least 1.
Dataset generate(const LatentProcessSpec& spec, const MixingSpec& mixing, int num_sequences,
                 int burn_in, std::uint64_t seed, int val_count = -1, int threads = 1);

// Directory layout: manifest.json + x.bin + z.bin (row-major little-endian
// float32). Loading verifies the stored checksums.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

} // namespace idol::scm
