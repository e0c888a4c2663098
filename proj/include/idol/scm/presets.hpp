#pragma once

#include <string>

#include "idol/scm/mixing.hpp"
#include "idol/scm/process.hpp"

namespace idol::scm {

// Named benchmark processes. Latent dimensions are 3, 5, 8, 8, 8, 16 for
// A through F. The mixing spec comes back without weights; materialize it
// with make_random_mixing(preset.mixing.n, preset.mixing.depth, seed) so the
// observation map varies with the run seed while the process stays fixed.
struct Preset {
    std::string name;
    LatentProcessSpec process;
    MixingSpec mixing;  // depth/slope filled in, weights empty
};

Preset preset(const std::string& name);

// "A B C D E F"
std::string preset_names();

} // namespace idol::scm
