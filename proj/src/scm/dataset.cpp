#include "idol/scm/dataset.hpp"

#include <algorithm>

#include "json.hpp"

#include "idol/util/binio.hpp"
#include "idol/util/errors.hpp"
#include "idol/util/hash.hpp"
#include "idol/util/log.hpp"
#include "idol/util/parallel.hpp"
#include "idol/util/rng.hpp"

namespace idol::scm {

Dataset generate(const LatentProcessSpec& spec, const MixingSpec& mixing, int num_sequences,
                 int burn_in, std::uint64_t seed, int val_count, int threads) {
    spec.validate();
    mixing.validate();
    if (mixing.n != spec.n) throw ConfigError("generate: mixing dimension differs from process n");
    if (num_sequences < 1) throw ConfigError("generate: need at least one sequence");
    if (burn_in < 0) throw ConfigError("generate: burn_in must be nonnegative");
    if (val_count < 0) {
        val_count = std::min(1024, std::max(1, num_sequences / 4));
    }
    if (val_count >= num_sequences) {
        throw ConfigError("generate: validation count " + std::to_string(val_count) +
                          " leaves no training sequences out of " + std::to_string(num_sequences));
    }

    Dataset ds;
    ds.spec = spec;
    ds.mixing = mixing;
    ds.seed = seed;
    ds.num_sequences = num_sequences;
    ds.burn_in = burn_in;
    ds.val_count = val_count;
    const int L = spec.seq_len;
    const int n = spec.n;
    ds.x.assign(static_cast<std::size_t>(num_sequences) * L * n, 0.0f);
    ds.z.assign(static_cast<std::size_t>(num_sequences) * L * n, 0.0f);

    util::parallel_for(num_sequences, threads, [&](std::int64_t k) {
        util::Rng rng(seed, "datagen", static_cast<std::uint64_t>(k));
        std::vector<double> state(n), eps(n);
        for (auto& v : state) v = rng.normal(0.0, spec.noise_std);
        for (int t = 0; t < burn_in; ++t) {
            for (auto& v : eps) v = rng.normal(0.0, spec.noise_std);
            state = step(state, eps, spec);
        }
        float* zrow = ds.z.data() + static_cast<std::size_t>(k) * L * n;
        float* xrow = ds.x.data() + static_cast<std::size_t>(k) * L * n;
        for (int t = 0; t < L; ++t) {
            for (auto& v : eps) v = rng.normal(0.0, spec.noise_std);
            state = step(state, eps, spec);
            const std::vector<double> obs = mix(state, mixing);
            for (int i = 0; i < n; ++i) {
                zrow[t * n + i] = static_cast<float>(state[i]);
                xrow[t * n + i] = static_cast<float>(obs[i]);
            }
        }
    });
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    util::ensure_dir(dir);
    util::write_f32_file(dir + "/x.bin", ds.x);
    util::write_f32_file(dir + "/z.bin", ds.z);

    nlohmann::json j;
    j["n"] = ds.n();
    j["d_x"] = ds.n();
    j["L"] = ds.seq_len();
    j["N"] = ds.num_sequences;
    j["preset"] = ds.preset_name;
    j["seed"] = ds.seed;
    j["burn_in"] = ds.burn_in;
    j["split"] = {{"val_begin", 0},
                  {"val_end", ds.val_count},
                  {"train_begin", ds.val_count},
                  {"train_end", ds.num_sequences}};
    j["process"] = {{"lag", ds.spec.lag},
                    {"noise_std", ds.spec.noise_std},
                    {"slope", ds.spec.slope},
                    {"w", ds.spec.w},
                    {"v", ds.spec.v}};
    j["mixing"] = {{"depth", ds.mixing.depth},
                   {"slope", ds.mixing.slope},
                   {"seed", ds.mixing.seed},
                   {"weights", ds.mixing.weights}};
    j["checksums"] = {{"x.bin", util::hex64(util::file_checksum(dir + "/x.bin"))},
                      {"z.bin", util::hex64(util::file_checksum(dir + "/z.bin"))}};
    util::write_text_file(dir + "/manifest.json", j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(util::read_text_file(dir + "/manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir + "/manifest.json: " + e.what());
    }
    Dataset ds;
    try {
        ds.spec.n = j.at("n").get<int>();
        ds.spec.seq_len = j.at("L").get<int>();
        ds.num_sequences = j.at("N").get<int>();
        ds.preset_name = j.at("preset").get<std::string>();
        ds.seed = j.at("seed").get<std::uint64_t>();
        ds.burn_in = j.at("burn_in").get<int>();
        ds.val_count = j.at("split").at("val_end").get<int>();
        const auto& p = j.at("process");
        ds.spec.lag = p.at("lag").get<int>();
        ds.spec.noise_std = p.at("noise_std").get<double>();
        ds.spec.slope = p.at("slope").get<double>();
        ds.spec.w = p.at("w").get<std::vector<double>>();
        ds.spec.v = p.at("v").get<std::vector<double>>();
        const auto& m = j.at("mixing");
        ds.mixing.n = ds.spec.n;
        ds.mixing.depth = m.at("depth").get<int>();
        ds.mixing.slope = m.at("slope").get<double>();
        ds.mixing.seed = m.at("seed").get<std::uint64_t>();
        ds.mixing.weights = m.at("weights").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir + "/manifest.json: missing or mistyped field: " + e.what());
    }
    ds.spec.validate();
    ds.mixing.validate();

    for (const char* name : {"x.bin", "z.bin"}) {
        const std::string want = j.at("checksums").at(name).get<std::string>();
        const std::string got = util::hex64(util::file_checksum(dir + "/" + name));
        if (want != got) {
            throw DataError(dir + "/" + name + ": checksum mismatch, manifest says " + want +
                            " but file hashes to " + got);
        }
    }
    ds.x = util::read_f32_file(dir + "/x.bin");
    ds.z = util::read_f32_file(dir + "/z.bin");
    const auto want_len = static_cast<std::size_t>(ds.num_sequences) * ds.seq_len() * ds.n();
    if (ds.x.size() != want_len || ds.z.size() != want_len) {
        throw DataError(dir + ": binary sizes disagree with manifest dimensions");
    }
    return ds;
}

} // namespace idol::scm
