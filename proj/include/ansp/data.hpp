#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ansp/error.hpp"
#include "ansp/rng.hpp"

namespace ansp {

// Token ids are contiguous; id 0 is reserved padding, id 1 the unknown token.
struct Vocab {
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;

    Vocab() : tokens{"<pad>", "<unk>"} {
        index[tokens[0]] = 0;
        index[tokens[1]] = 1;
    }

    std::size_t add(const std::string& tok) {
        auto it = index.find(tok);
        if (it != index.end()) return it->second;
        std::size_t id = tokens.size();
        index.emplace(tok, id);
        tokens.push_back(tok);
        return id;
    }

    std::size_t id(const std::string& tok) const {
        auto it = index.find(tok);
        return it == index.end() ? kUnk : it->second;
    }

    std::size_t size() const { return tokens.size(); }

    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::string> tokens;
};

// Category inventory for one metadata column.  Id 0 is the reserved OTHER
// bucket; unknown or overflow values land there instead of failing.
struct MetaField {
    std::string name;
    std::vector<std::string> categories;  // id -> value; [0] is OTHER
    std::unordered_map<std::string, std::size_t> index;

    explicit MetaField(std::string n = "") : name(std::move(n)), categories{"<other>"} {}

    std::size_t add(const std::string& value) {
        auto it = index.find(value);
        if (it != index.end()) return it->second;
        std::size_t id = categories.size();
        index.emplace(value, id);
        categories.push_back(value);
        return id;
    }

    std::size_t id(const std::string& value) const {
        if (value.empty()) return 0;
        auto it = index.find(value);
        return it == index.end() ? 0 : it->second;
    }

    std::size_t size() const { return categories.size(); }
};

struct DatasetSchema {
    std::vector<std::string> classes;    // ordered label names
    std::vector<bool> class_is_true;     // binary merge per class
    std::vector<std::string> field_names;

    std::size_t class_id(const std::string& label) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == label) return i;
        std::string expected;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (i) expected += ", ";
            expected += classes[i];
        }
        throw DataError("unknown label '" + label + "' (expected one of: " + expected + ")");
    }
};

struct RawRecord {
    std::string id;
    std::size_t label = 0;
    std::vector<std::string> tokens;
    std::vector<std::string> meta_values;  // one per schema field
    long credit_total = -1;                // folded history counts, -1 if absent
};

struct RawDataset {
    DatasetSchema schema;
    std::vector<RawRecord> records;
    int credit_field = -1;  // schema field index holding bucketed history, or -1
};

// Token ids padded to the corpus maximum; rows past true_len are padding.
struct InputSequence {
    std::vector<std::size_t> token_ids;
    std::size_t true_len = 0;
    std::vector<std::size_t> meta_ids;
    bool y_binary = false;
    std::size_t y_multi = 0;
};

struct EncodedDataset {
    DatasetSchema schema;
    Vocab vocab;
    std::vector<MetaField> fields;
    std::size_t max_len = 0;
    std::vector<double> credit_thresholds;  // empty when no history field
    std::vector<InputSequence> train, dev, test;

    std::size_t num_classes() const { return schema.classes.size(); }
    std::size_t field_count() const { return fields.size(); }
};

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> cols;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            cols.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cols.push_back(cur);
    return cols;
}

inline std::vector<std::string> split_csv_list(const std::string& value) {
    std::vector<std::string> out;
    for (auto& piece : split_line(value, ',')) {
        std::string trimmed = piece;
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
            trimmed.erase(trimmed.begin());
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
            trimmed.pop_back();
        if (!trimmed.empty()) out.push_back(trimmed);
    }
    return out;
}

// ---- schema files ----

inline DatasetSchema load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path.string());
    std::vector<std::string> classes, binary_true, fields;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "classes")
            classes = split_csv_list(value);
        else if (key == "binary_true")
            binary_true = split_csv_list(value);
        else if (key == "fields")
            fields = split_csv_list(value);
        else
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": unknown schema key '" + key + "'");
    }
    if (classes.size() < 2) throw DataError(path.string() + ": schema needs at least 2 classes");
    if (fields.empty()) throw DataError(path.string() + ": schema needs at least 1 metadata field");
    DatasetSchema schema;
    schema.classes = classes;
    schema.field_names = fields;
    schema.class_is_true.assign(classes.size(), false);
    for (const auto& name : binary_true) {
        bool found = false;
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == name) {
                schema.class_is_true[i] = true;
                found = true;
            }
        if (!found)
            throw DataError(path.string() + ": binary_true entry '" + name +
                            "' is not a declared class");
    }
    return schema;
}

inline void write_schema(const DatasetSchema& schema, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write schema file: " + path.string());
    out << "classes=";
    for (std::size_t i = 0; i < schema.classes.size(); ++i)
        out << (i ? "," : "") << schema.classes[i];
    out << "\nbinary_true=";
    bool first = true;
    for (std::size_t i = 0; i < schema.classes.size(); ++i)
        if (schema.class_is_true[i]) {
            out << (first ? "" : ",") << schema.classes[i];
            first = false;
        }
    out << "\nfields=";
    for (std::size_t i = 0; i < schema.field_names.size(); ++i)
        out << (i ? "," : "") << schema.field_names[i];
    out << "\n";
}

// ---- generic TSV ----
// Columns: id, label, statement, then one column per schema field.

inline void append_generic_tsv(RawDataset& ds, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    const std::size_t want = 3 + ds.schema.field_names.size();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cols = split_line(line, '\t');
        if (cols.size() != want)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(want) + " columns, found " +
                            std::to_string(cols.size()));
        RawRecord rec;
        rec.id = cols[0];
        try {
            rec.label = ds.schema.class_id(cols[1]);
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        rec.tokens = tokenize(cols[2]);
        rec.meta_values.assign(cols.begin() + 3, cols.end());
        ds.records.push_back(std::move(rec));
    }
}

inline RawDataset load_generic(const std::filesystem::path& data_path,
                               const std::filesystem::path& schema_path) {
    RawDataset ds;
    ds.schema = load_schema(schema_path);
    append_generic_tsv(ds, data_path);
    return ds;
}

inline void write_generic_tsv(const RawDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file: " + path.string());
    for (const auto& rec : ds.records) {
        out << rec.id << '\t' << ds.schema.classes[rec.label] << '\t';
        for (std::size_t i = 0; i < rec.tokens.size(); ++i) out << (i ? " " : "") << rec.tokens[i];
        for (const auto& v : rec.meta_values) out << '\t' << v;
        out << '\n';
    }
}

// ---- LIAR layout ----
// 14 tab-separated columns: id, label, statement, subject, speaker, job,
// state, party, five history count columns, context.  The five counts fold
// into one bucketed categorical field at encoding time.

inline DatasetSchema liar_schema() {
    DatasetSchema s;
    s.classes = {"pants-fire", "false", "barely-true", "half-true", "mostly-true", "true"};
    s.class_is_true = {false, false, false, true, true, true};
    s.field_names = {"subject", "speaker", "job", "state", "party", "credit_history", "context"};
    return s;
}

inline void append_liar_tsv(RawDataset& ds, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cols = split_line(line, '\t');
        if (cols.size() != 14)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 14 columns, found " + std::to_string(cols.size()));
        RawRecord rec;
        rec.id = cols[0];
        try {
            rec.label = ds.schema.class_id(cols[1]);
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        rec.tokens = tokenize(cols[2]);
        long total = 0;
        for (std::size_t c = 8; c <= 12; ++c) {
            try {
                total += cols[c].empty() ? 0 : std::stol(cols[c]);
            } catch (const std::exception&) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": non-numeric history count '" + cols[c] + "'");
            }
        }
        rec.credit_total = total;
        // field order: subject, speaker, job, state, party, credit_history, context
        rec.meta_values = {cols[3], cols[4], cols[5], cols[6], cols[7], "", cols[13]};
        ds.records.push_back(std::move(rec));
    }
}

inline RawDataset load_liar(const std::filesystem::path& path) {
    RawDataset ds;
    ds.schema = liar_schema();
    ds.credit_field = 5;
    namespace fs = std::filesystem;
    if (fs::is_directory(path)) {
        bool any = false;
        for (const char* name : {"train.tsv", "valid.tsv", "test.tsv"}) {
            fs::path p = path / name;
            if (fs::exists(p)) {
                append_liar_tsv(ds, p);
                any = true;
            }
        }
        if (!any) throw DataError("no train.tsv/valid.tsv/test.tsv under " + path.string());
    } else {
        append_liar_tsv(ds, path);
    }
    return ds;
}

// ---- split and encoding ----

struct SplitIndices {
    std::vector<std::size_t> train, dev, test;
};

// Seeded shuffle, then 80/10/10; each part is within one of its exact share.
inline SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ContractError("split: empty corpus");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = Rng::derive(seed, "split");
    rng.shuffle(order);
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const std::size_t n_dev = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + n_train);
    out.dev.assign(order.begin() + n_train, order.begin() + n_train + n_dev);
    out.test.assign(order.begin() + n_train + n_dev, order.end());
    return out;
}

namespace detail {

// Keeps the 19 most frequent categories plus OTHER; ties break by value so
// the inventory is independent of record order.
inline MetaField build_field(const std::string& name,
                             const std::map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    MetaField field(name);
    constexpr std::size_t kMaxCategories = 20;  // incl. OTHER
    for (const auto& [value, count] : ranked) {
        if (field.size() >= kMaxCategories) break;
        if (!value.empty()) field.add(value);
    }
    return field;
}

inline std::string bucket_label(long total, const std::vector<double>& thresholds) {
    std::size_t b = 0;
    while (b < thresholds.size() && static_cast<double>(total) > thresholds[b]) ++b;
    return "hist_q" + std::to_string(b);
}

}  // namespace detail

// Splits, then derives vocabulary, field inventories, and history-bucket
// thresholds from the training part only.  Sequence padding uses the maximum
// length over the whole corpus.
inline EncodedDataset encode_corpus(const RawDataset& raw, std::uint64_t seed) {
    if (raw.records.empty()) throw ContractError("encode: empty corpus");
    EncodedDataset out;
    out.schema = raw.schema;
    SplitIndices idx = split_indices(raw.records.size(), seed);

    std::vector<double> thresholds;
    if (raw.credit_field >= 0) {
        std::vector<long> totals;
        totals.reserve(idx.train.size());
        for (auto i : idx.train) totals.push_back(raw.records[i].credit_total);
        std::sort(totals.begin(), totals.end());
        constexpr std::size_t kBuckets = 5;
        for (std::size_t q = 1; q < kBuckets; ++q) {
            std::size_t pos = q * totals.size() / kBuckets;
            if (pos >= totals.size()) pos = totals.size() - 1;
            thresholds.push_back(static_cast<double>(totals[pos]));
        }
        out.credit_thresholds = thresholds;
    }

    auto field_value = [&](const RawRecord& rec, std::size_t f) -> std::string {
        if (raw.credit_field >= 0 && f == static_cast<std::size_t>(raw.credit_field))
            return detail::bucket_label(rec.credit_total, thresholds);
        return rec.meta_values[f];
    };

    const std::size_t k = raw.schema.field_names.size();
    std::vector<std::map<std::string, std::size_t>> counts(k);
    for (auto i : idx.train) {
        const auto& rec = raw.records[i];
        if (rec.meta_values.size() != k)
            throw DataError("record '" + rec.id + "' has " + std::to_string(rec.meta_values.size()) +
                            " metadata values, schema declares " + std::to_string(k));
        for (std::size_t f = 0; f < k; ++f) ++counts[f][field_value(rec, f)];
        for (const auto& tok : rec.tokens) out.vocab.add(tok);
    }
    for (std::size_t f = 0; f < k; ++f)
        out.fields.push_back(detail::build_field(raw.schema.field_names[f], counts[f]));

    for (const auto& rec : raw.records) out.max_len = std::max(out.max_len, rec.tokens.size());

    auto encode_one = [&](const RawRecord& rec) {
        InputSequence seq;
        seq.true_len = rec.tokens.size();
        seq.token_ids.assign(out.max_len, Vocab::kPad);
        for (std::size_t t = 0; t < rec.tokens.size(); ++t)
            seq.token_ids[t] = out.vocab.id(rec.tokens[t]);
        seq.meta_ids.resize(k);
        for (std::size_t f = 0; f < k; ++f) seq.meta_ids[f] = out.fields[f].id(field_value(rec, f));
        seq.y_multi = rec.label;
        seq.y_binary = raw.schema.class_is_true[rec.label];
        return seq;
    };
    for (auto i : idx.train) out.train.push_back(encode_one(raw.records[i]));
    for (auto i : idx.dev) out.dev.push_back(encode_one(raw.records[i]));
    for (auto i : idx.test) out.test.push_back(encode_one(raw.records[i]));
    return out;
}

}  // namespace ansp
