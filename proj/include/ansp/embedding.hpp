#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ansp/data.hpp"
#include "ansp/error.hpp"
#include "ansp/tensor.hpp"

namespace ansp {

// Word table trains jointly with the model; metadata tables are fixed one-hot
// rows zero-extended to the embedding width.  The padding row stays all-zero
// and never receives gradient updates.
struct EmbeddingTable {
    Tensor word;               // V x d
    std::vector<Tensor> meta;  // per field: categories x d, constant
    std::size_t dim = 0;

    static EmbeddingTable init(const Vocab& vocab, const std::vector<MetaField>& fields,
                               std::size_t d, Rng& rng) {
        EmbeddingTable table;
        table.dim = d;
        table.word = Tensor::uniform({vocab.size(), d}, rng, -0.1, 0.1, true);
        for (std::size_t j = 0; j < d; ++j) table.word.at(Vocab::kPad * d + j) = 0.0;
        for (const auto& field : fields) {
            if (field.size() > d)
                throw ContractError("embedding width " + std::to_string(d) +
                                    " too small for field '" + field.name + "' with " +
                                    std::to_string(field.size()) + " categories");
            Tensor rows = Tensor::zeros({field.size(), d});
            for (std::size_t c = 0; c < field.size(); ++c) rows.at(c * d + c) = 1.0;
            table.meta.push_back(std::move(rows));
        }
        return table;
    }

    std::size_t field_count() const { return meta.size(); }
};

// One-hot metadata rows for a single sequence, as a constant k-by-d block.
inline Tensor embed_metadata(const EmbeddingTable& table, const std::vector<std::size_t>& meta_ids) {
    if (meta_ids.size() != table.meta.size())
        throw ContractError("embed_metadata: " + std::to_string(meta_ids.size()) +
                            " ids for " + std::to_string(table.meta.size()) + " fields");
    const std::size_t d = table.dim;
    Tensor out = Tensor::zeros({meta_ids.size(), d});
    for (std::size_t f = 0; f < meta_ids.size(); ++f) {
        const Tensor& rows = table.meta[f];
        if (meta_ids[f] >= rows.rows())
            throw std::out_of_range("embed_metadata: id " + std::to_string(meta_ids[f]) +
                                    " out of range for field " + std::to_string(f));
        for (std::size_t j = 0; j < d; ++j) out.at(f * d + j) = rows.at(meta_ids[f] * d + j);
    }
    return out;
}

// Full model input: L word rows (padding rows zero) followed by k metadata
// rows.  Differentiable into the word table only.
inline Tensor build_input(Tape& tape, const InputSequence& seq, const EmbeddingTable& table) {
    Tensor words = tape.gather_rows(table.word, seq.token_ids, Vocab::kPad);
    Tensor meta = embed_metadata(table, seq.meta_ids);
    return tape.concat_rows({words, meta});
}

// Rows actually consumed by the encoders: the true_len word rows plus the
// metadata block, with padding rows dropped entirely so trailing padding can
// never leak into a final state.
inline Tensor encoder_rows(Tape& tape, const InputSequence& seq, const EmbeddingTable& table) {
    std::vector<std::size_t> ids(seq.token_ids.begin(),
                                 seq.token_ids.begin() + static_cast<long>(seq.true_len));
    Tensor words = tape.gather_rows(table.word, ids, Vocab::kPad);
    Tensor meta = embed_metadata(table, seq.meta_ids);
    if (seq.true_len == 0) return meta;
    return tape.concat_rows({words, meta});
}

// Raw (non-differentiable) copy of the encoder rows for rollout evaluation.
inline std::vector<std::vector<double>> encoder_rows_raw(const InputSequence& seq,
                                                         const EmbeddingTable& table) {
    const std::size_t d = table.dim;
    std::vector<std::vector<double>> rows;
    rows.reserve(seq.true_len + table.meta.size());
    for (std::size_t t = 0; t < seq.true_len; ++t) {
        const std::size_t id = seq.token_ids[t];
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j) row[j] = table.word.at(id * d + j);
        rows.push_back(std::move(row));
    }
    for (std::size_t f = 0; f < table.meta.size(); ++f) {
        std::vector<double> row(d, 0.0);
        const Tensor& m = table.meta[f];
        for (std::size_t j = 0; j < d; ++j) row[j] = m.at(seq.meta_ids[f] * d + j);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Textual vectors, one line per word: token then exactly d decimals.
// Returns how many vocabulary rows were filled.  The padding row stays zero.
inline std::size_t load_word_vectors(const std::filesystem::path& path, const Vocab& vocab,
                                     EmbeddingTable& table) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word vectors: " + path.string());
    const std::size_t d = table.dim;
    std::string line;
    std::size_t line_no = 0, loaded = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vals;
        vals.reserve(d);
        double v;
        while (ss >> v) vals.push_back(v);
        if (!ss.eof() || vals.size() != d)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(d) + " values, found " + std::to_string(vals.size()));
        auto it = vocab.index.find(token);
        if (it == vocab.index.end() || it->second == Vocab::kPad) continue;
        for (std::size_t j = 0; j < d; ++j) table.word.at(it->second * d + j) = vals[j];
        ++loaded;
    }
    return loaded;
}

}  // namespace ansp
