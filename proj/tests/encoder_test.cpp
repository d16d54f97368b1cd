#include "ansp/bilstm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ansp/embedding.hpp"
#include "ansp/gradcheck.hpp"

using namespace ansp;
namespace fs = std::filesystem;

namespace {

// Independent recurrence oracle: plain loops straight from the gate
// definitions, sharing no code with the library path.
std::vector<std::vector<double>> oracle_lstm(const LstmDir& dir,
                                             const std::vector<std::vector<double>>& xs,
                                             bool reversed) {
    const std::size_t T = xs.size();
    const std::size_t h = dir.in_g.bias.size();
    const std::size_t d = xs[0].size();
    std::vector<double> hh(h, 0.0), cc(h, 0.0);
    std::vector<std::vector<double>> out(T);
    auto sigm = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (std::size_t step = 0; step < T; ++step) {
        const std::size_t t = reversed ? T - 1 - step : step;
        std::vector<double> ig(h), fg(h), gg(h), og(h);
        for (std::size_t i = 0; i < h; ++i) {
            auto lin = [&](const GateParams& g) {
                double z = g.bias.at(i);
                for (std::size_t j = 0; j < d; ++j) z += g.w_in.at(i * d + j) * xs[t][j];
                for (std::size_t j = 0; j < h; ++j) z += g.w_rec.at(i * h + j) * hh[j];
                return z;
            };
            ig[i] = sigm(lin(dir.in_g));
            fg[i] = sigm(lin(dir.forget_g));
            gg[i] = std::tanh(lin(dir.cell_g));
            og[i] = sigm(lin(dir.out_g));
        }
        for (std::size_t i = 0; i < h; ++i) {
            cc[i] = fg[i] * cc[i] + ig[i] * gg[i];
            hh[i] = og[i] * std::tanh(cc[i]);
        }
        out[t] = hh;
    }
    return out;
}

Vocab small_vocab() {
    Vocab v;
    v.add("aa");
    v.add("bb");
    return v;
}

}  // namespace

TEST(EmbeddingTest, MetadataOneHotZeroExtended) {
    Vocab v = small_vocab();
    MetaField f3("party");
    f3.add("red");
    f3.add("blue");
    MetaField f1("only");
    Rng rng(1);
    EmbeddingTable table = EmbeddingTable::init(v, {f3, f1}, 8, rng);
    Tensor rows = embed_metadata(table, {1, 0});
    ASSERT_EQ(rows.shape(), (Shape{2, 8}));
    std::vector<double> expect0 = {0, 1, 0, 0, 0, 0, 0, 0};
    std::vector<double> expect1 = {1, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_DOUBLE_EQ(rows.at(j), expect0[j]);
        EXPECT_DOUBLE_EQ(rows.at(8 + j), expect1[j]);
    }
}

TEST(EmbeddingTest, BuildInputExplicitMatrix) {
    Vocab v = small_vocab();
    MetaField f("src");
    f.add("x");
    Rng rng(2);
    EmbeddingTable table = EmbeddingTable::init(v, {f}, 2, rng);
    table.word.at(2 * 2 + 0) = 1.0;
    table.word.at(2 * 2 + 1) = 2.0;
    table.word.at(3 * 2 + 0) = 3.0;
    table.word.at(3 * 2 + 1) = 4.0;
    InputSequence seq;
    seq.token_ids = {2, 3, 0, 0};
    seq.true_len = 2;
    seq.meta_ids = {1};
    Tape tape;
    Tensor in = build_input(tape, seq, table);
    ASSERT_EQ(in.shape(), (Shape{5, 2}));
    std::vector<double> expect = {1, 2, 3, 4, 0, 0, 0, 0, 0, 1};
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_DOUBLE_EQ(in.at(i), expect[i]);

    // Encoder rows drop the padding rows entirely.
    Tensor enc = encoder_rows(tape, seq, table);
    ASSERT_EQ(enc.shape(), (Shape{3, 2}));
    EXPECT_DOUBLE_EQ(enc.at(2), 3.0);
    EXPECT_DOUBLE_EQ(enc.at(5), 1.0);
}

TEST(EmbeddingTest, PadRowZeroAndExcludedFromGradients) {
    Vocab v = small_vocab();
    MetaField f("src");
    Rng rng(3);
    EmbeddingTable table = EmbeddingTable::init(v, {f}, 4, rng);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(table.word.at(j), 0.0);
    InputSequence seq;
    seq.token_ids = {2, 0, 0};
    seq.true_len = 1;
    seq.meta_ids = {0};
    Tape tape;
    Tensor in = build_input(tape, seq, table);
    tape.backward(tape.sum(in));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(table.word.grad_at(j), 0.0);
    EXPECT_DOUBLE_EQ(table.word.grad_at(2 * 4), 1.0);
}

TEST(EmbeddingTest, EmptyTextUsesMetadataRowsOnly) {
    Vocab v = small_vocab();
    MetaField f("src");
    f.add("x");
    Rng rng(4);
    EmbeddingTable table = EmbeddingTable::init(v, {f, f}, 4, rng);
    InputSequence seq;
    seq.token_ids = {0, 0};
    seq.true_len = 0;
    seq.meta_ids = {1, 0};
    Tape tape;
    Tensor enc = encoder_rows(tape, seq, table);
    ASSERT_EQ(enc.shape(), (Shape{2, 4}));
}

TEST(BiLstmTest, MatchesIndependentOracle) {
    Rng rng(7);
    const std::size_t T = 5, d = 3, h = 4;
    BiLstmParams params = BiLstmParams::init(d, h, rng);
    Tensor inputs = Tensor::uniform({T, d}, rng, -1.0, 1.0, false);
    std::vector<double> mask = {1, 0, 1, 1, 0};

    Tape tape;
    EncodeOut out = bilstm_encode(tape, inputs, mask, params);
    ASSERT_EQ(out.states.shape(), (Shape{T, 2 * h}));
    ASSERT_EQ(out.final.shape(), (Shape{2 * h}));

    std::vector<std::vector<double>> xs(T, std::vector<double>(d));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) xs[t][j] = inputs.at(t * d + j) * mask[t];
    auto hf = oracle_lstm(params.fwd, xs, false);
    auto hb = oracle_lstm(params.bwd, xs, true);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < h; ++i) {
            EXPECT_NEAR(out.states.at(t * 2 * h + i), hf[t][i], 1e-12);
            EXPECT_NEAR(out.states.at(t * 2 * h + h + i), hb[t][i], 1e-12);
        }
    for (std::size_t i = 0; i < h; ++i) {
        EXPECT_NEAR(out.final.at(i), hf[T - 1][i], 1e-12);
        EXPECT_NEAR(out.final.at(h + i), hb[0][i], 1e-12);
    }
}

TEST(BiLstmTest, MaskingEquivalentToZeroRow) {
    Rng rng(8);
    const std::size_t T = 4, d = 3, h = 3;
    BiLstmParams params = BiLstmParams::init(d, h, rng);
    Tensor inputs = Tensor::uniform({T, d}, rng, -1.0, 1.0, false);
    std::vector<double> masked = {1, 1, 0, 1};
    Tape t1;
    EncodeOut a = bilstm_encode(t1, inputs, masked, params);

    Tensor zeroed = inputs.detached();
    for (std::size_t j = 0; j < d; ++j) zeroed.at(2 * d + j) = 0.0;
    std::vector<double> ones = {1, 1, 1, 1};
    Tape t2;
    EncodeOut b = bilstm_encode(t2, zeroed, ones, params);
    for (std::size_t i = 0; i < a.states.size(); ++i)
        EXPECT_EQ(a.states.at(i), b.states.at(i));
    for (std::size_t i = 0; i < a.final.size(); ++i) EXPECT_EQ(a.final.at(i), b.final.at(i));
}

TEST(BiLstmTest, RawPathBitIdenticalToTape) {
    Rng rng(9);
    const std::size_t T = 6, d = 4, h = 5;
    BiLstmParams params = BiLstmParams::init(d, h, rng);
    Tensor inputs = Tensor::uniform({T, d}, rng, -1.0, 1.0, false);
    std::vector<double> mask = {1, 0, 1, 0, 1, 1};
    Tape tape;
    tape.set_recording(false);
    EncodeOut tape_out = bilstm_encode(tape, inputs, mask, params);

    std::vector<std::vector<double>> rows(T, std::vector<double>(d));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) rows[t][j] = inputs.at(t * d + j);
    std::vector<double> raw = bilstm_final_raw(params, rows, mask);
    ASSERT_EQ(raw.size(), tape_out.final.size());
    for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(raw[i], tape_out.final.at(i));
}

TEST(BiLstmTest, GradientsPassFiniteDifferences) {
    Rng rng(10);
    const std::size_t T = 3, d = 2, h = 2;
    BiLstmParams params = BiLstmParams::init(d, h, rng);
    Tensor inputs = Tensor::uniform({T, d}, rng, -1.0, 1.0, true);
    std::vector<double> mask = {1, 1, 1};
    std::vector<Tensor> leaves = params.parameters();
    leaves.push_back(inputs);
    Tensor w = Tensor::uniform({2 * h}, rng, -1.0, 1.0, false);
    auto report = check_gradients(leaves, [&](Tape& t) {
        EncodeOut out = bilstm_encode(t, inputs, mask, params);
        return t.sum(t.mul(out.final, w));
    });
    EXPECT_LT(report.max_rel_err, 1e-4)
        << "leaf " << report.worst_leaf << " analytic " << report.analytic << " numeric "
        << report.numeric;
}

TEST(BiLstmTest, CloneAndAssignRoundTrip) {
    Rng rng(11);
    BiLstmParams a = BiLstmParams::init(3, 2, rng);
    BiLstmParams b = a.clone(false);
    auto pa = a.parameters();
    auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_FALSE(pb[i].requires_grad());
        EXPECT_FALSE(pa[i].same_storage(pb[i]));
        for (std::size_t j = 0; j < pa[i].size(); ++j) EXPECT_EQ(pa[i].at(j), pb[i].at(j));
    }
    pa[0].at(0) = 42.0;
    EXPECT_NE(pb[0].at(0), 42.0);
    b.assign_from(a);
    EXPECT_EQ(pb[0].at(0), 42.0);
}

TEST(DropoutTest, ScalesKeptEntriesAndIdentityAtOne) {
    Rng rng(12);
    Tensor x = Tensor::full({100}, 1.0);
    Tape tape;
    Rng drop(13);
    Tensor y = dropout(tape, x, 0.5, drop);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_TRUE(y.at(i) == 0.0 || y.at(i) == 2.0);
        if (y.at(i) != 0.0) ++kept;
    }
    EXPECT_GT(kept, 25u);
    EXPECT_LT(kept, 75u);
    Rng drop2(13);
    Tensor z = dropout(tape, x, 1.0, drop2);
    EXPECT_TRUE(z.same_storage(x));
}

TEST(WordVectorTest, LoadsAndRejectsBadLines) {
    Vocab v = small_vocab();
    Rng rng(14);
    EmbeddingTable table = EmbeddingTable::init(v, {MetaField("f")}, 3, rng);
    auto dir = fs::temp_directory_path() / "ansp_wv_test";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "good.txt");
        out << "aa 1.0 2.0 3.0\n";
        out << "unseen 9.0 9.0 9.0\n";
        out << "bb -1.0 -2.0 -3.0\n";
    }
    std::size_t n = load_word_vectors(dir / "good.txt", v, table);
    EXPECT_EQ(n, 2u);
    EXPECT_DOUBLE_EQ(table.word.at(2 * 3 + 1), 2.0);
    EXPECT_DOUBLE_EQ(table.word.at(3 * 3 + 2), -3.0);
    {
        std::ofstream out(dir / "bad.txt");
        out << "aa 1.0 2.0 3.0\n";
        out << "bb 1.0 2.0\n";
    }
    try {
        load_word_vectors(dir / "bad.txt", v, table);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}
