#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ansp/data.hpp"
#include "ansp/rng.hpp"

namespace ansp {

// Planted-structure corpus generator.  Binary truth is carried by side tokens
// and a correlated source field; the fine class is carried only by class
// tokens, so a classifier must look past the easy binary signal.
struct SyntheticSpec {
    std::size_t classes = 6;
    std::size_t count = 2500;
    std::size_t length = 12;        // statement tokens per record
    double noise_rate = 0.2;        // chance a planted signal token is corrupted
    std::size_t common_plants = 2;  // side tokens per record
    std::size_t private_plants = 1; // class tokens per record
    std::size_t common_per_side = 4;
    std::size_t private_per_class = 2;
    std::size_t noise_vocab = 40;
    double meta_fidelity = 0.85;    // P(source category matches the binary side)
    std::uint64_t seed = 1;
};

namespace detail {

inline std::size_t first_true_class(std::size_t classes) { return (classes + 1) / 2; }

}  // namespace detail

inline DatasetSchema synthetic_schema(const SyntheticSpec& spec) {
    DatasetSchema s;
    const std::size_t split = detail::first_true_class(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        s.classes.push_back("class" + std::to_string(c));
        s.class_is_true.push_back(c >= split);
    }
    s.field_names = {"source", "venue"};
    return s;
}

inline RawDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 2) throw ContractError("synthetic: need at least 2 classes");
    if (spec.length < spec.common_plants + spec.private_plants)
        throw ContractError("synthetic: sequence length too short for planted tokens");
    RawDataset ds;
    ds.schema = synthetic_schema(spec);
    Rng rng = Rng::derive(spec.seed, "synthetic");
    const std::size_t split = detail::first_true_class(spec.classes);

    auto common_token = [&](bool true_side, std::size_t j) {
        return "cmn_" + std::string(true_side ? "t" : "f") + "_" + std::to_string(j);
    };
    auto private_token = [&](std::size_t c, std::size_t j) {
        return "cls_" + std::to_string(c) + "_" + std::to_string(j);
    };

    for (std::size_t i = 0; i < spec.count; ++i) {
        const bool y_true = rng.bernoulli(0.5);
        const std::size_t side_lo = y_true ? split : 0;
        const std::size_t side_n = y_true ? spec.classes - split : split;
        const std::size_t y_multi = side_lo + rng.uniform_index(side_n);

        std::vector<std::size_t> pos(spec.length);
        for (std::size_t p = 0; p < spec.length; ++p) pos[p] = p;
        rng.shuffle(pos);

        std::vector<std::string> toks(spec.length);
        std::size_t cursor = 0;
        for (std::size_t p = 0; p < spec.common_plants; ++p) {
            bool side = y_true;
            if (rng.bernoulli(spec.noise_rate)) side = rng.bernoulli(0.5);
            toks[pos[cursor++]] = common_token(side, rng.uniform_index(spec.common_per_side));
        }
        for (std::size_t p = 0; p < spec.private_plants; ++p) {
            std::size_t c = y_multi;
            if (rng.bernoulli(spec.noise_rate)) c = rng.uniform_index(spec.classes);
            toks[pos[cursor++]] = private_token(c, rng.uniform_index(spec.private_per_class));
        }
        while (cursor < spec.length)
            toks[pos[cursor++]] = "nz_" + std::to_string(rng.uniform_index(spec.noise_vocab));

        RawRecord rec;
        rec.id = "syn" + std::to_string(i);
        rec.label = y_multi;
        rec.tokens = std::move(toks);
        bool meta_side = y_true;
        if (!rng.bernoulli(spec.meta_fidelity)) meta_side = !meta_side;
        std::string source = "src_" + std::string(meta_side ? "t" : "f") + "_" +
                             std::to_string(rng.uniform_index(2));
        std::string venue = "ven_" + std::to_string(rng.uniform_index(5));
        rec.meta_values = {source, venue};
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// Reads off the planted class token; perfect classifier when noise_rate is 0.
inline std::size_t synthetic_oracle_label(const RawRecord& rec, const SyntheticSpec& spec) {
    for (const auto& tok : rec.tokens) {
        if (tok.rfind("cls_", 0) != 0) continue;
        auto second = tok.find('_', 4);
        if (second == std::string::npos) continue;
        return static_cast<std::size_t>(std::stoul(tok.substr(4, second - 4)));
    }
    return spec.classes;  // no class token survived
}

}  // namespace ansp
