#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradient_check.hpp"
#include "oracles.hpp"
#include "swm/flops.hpp"
#include "swm/model_io.hpp"
#include "swm/network.hpp"

namespace swm {
namespace {

Model random_model(const Architecture& arch, std::uint64_t seed, bool projector = true) {
    std::mt19937_64 rng(seed);
    Model m = init_model(arch, Stage::two, seed, projector);
    test::randomize(m, rng);
    return m;
}

PointBatch random_batch(std::mt19937_64& rng, std::size_t count, std::size_t n) {
    std::vector<ResampledStreamline> s;
    for (std::size_t i = 0; i < count; ++i) s.push_back(test::random_resampled(rng, n));
    return make_batch(s);
}

TEST(Architecture, DefaultsAreThePublishedNetwork) {
    const Architecture a;
    EXPECT_EQ(a.points, 15u);
    EXPECT_EQ(a.encoder_widths, (std::vector<std::size_t>{64, 128, 1024}));
    EXPECT_EQ(a.classifier_widths, (std::vector<std::size_t>{512, 256}));
    EXPECT_EQ(a.projector_widths, (std::vector<std::size_t>{1024, 128}));
}

TEST(Init, LayerShapesAndUniformRange) {
    Architecture a;
    a.classes = 6;
    const Model m = init_model(a, Stage::two, 3, true);
    ASSERT_EQ(m.encoder.layers.size(), 3u);
    EXPECT_EQ(m.encoder.layers[0].in, 3u);
    EXPECT_EQ(m.encoder.layers[0].out, 64u);
    EXPECT_EQ(m.encoder.layers[1].out, 128u);
    EXPECT_EQ(m.encoder.layers[2].out, 1024u);
    ASSERT_EQ(m.classifier.layers.size(), 3u);
    EXPECT_EQ(m.classifier.layers[0].in, 1024u);
    EXPECT_EQ(m.classifier.layers[2].in, 256u);
    EXPECT_EQ(m.classifier.classes(), 6u);
    EXPECT_EQ(m.classifier.norms.size(), 2u);
    ASSERT_TRUE(m.projector);
    EXPECT_EQ(m.projector->layers[0].out, 1024u);
    EXPECT_EQ(m.projector->layers[1].out, 128u);
    for (const auto& l : m.encoder.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (double w : l.weight) EXPECT_LE(std::abs(w), bound);
        for (double b : l.bias) EXPECT_EQ(b, 0.0);
    }
    for (const auto& n : m.encoder.norms) {
        for (double v : n.running_var) EXPECT_GT(v, 0.0);
    }
    EXPECT_EQ(init_model(a, Stage::two, 3, true), m);
}

TEST(Encode, PermutationAndReversalInvariance) {
    const auto arch = test::tiny_architecture();
    const Model m = random_model(arch, 1);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = test::random_resampled(rng, arch.points);
        std::vector<std::size_t> perm(arch.points);
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<Point3> shuffled;
        for (auto i : perm) shuffled.push_back(s[i]);
        const ResampledStreamline p(std::move(shuffled));
        const std::vector<ResampledStreamline> a{s}, b{p}, c{reversed(s)};
        const auto ga = encode(m.encoder, make_batch(a));
        const auto gb = encode(m.encoder, make_batch(b));
        const auto gc = encode(m.encoder, make_batch(c));
        EXPECT_EQ(ga.values, gb.values);
        EXPECT_EQ(ga.values, gc.values);
        for (std::size_t d = 0; d < ga.argmax.size(); ++d) {
            // A zero maximum is a ReLU tie and resolves to index 0 in both orders.
            if (ga.values(0, d) > 0.0) EXPECT_EQ(s[ga.argmax[d]], p[gb.argmax[d]]);
        }
    }
}

TEST(Encode, ArgmaxIndicesAreValidAndTiesPickLowest) {
    Architecture arch = test::tiny_architecture();
    const Model m = random_model(arch, 4);
    std::mt19937_64 rng(5);
    const auto g = encode(m.encoder, random_batch(rng, 10, arch.points));
    for (auto i : g.argmax) EXPECT_LT(i, arch.points);

    // Identical points: every dimension ties, index 0 wins.
    const ResampledStreamline same(std::vector<Point3>(arch.points, Point3{1, 2, 3}));
    const std::vector<ResampledStreamline> one{same};
    for (auto i : encode(m.encoder, make_batch(one)).argmax) EXPECT_EQ(i, 0u);
}

TEST(Encode, ZeroParametersGiveZeroFeatures) {
    Architecture arch;
    Model m = init_model(arch, Stage::one, 1);
    for (auto& l : m.encoder.layers) {
        std::fill(l.weight.begin(), l.weight.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    for (auto& n : m.encoder.norms) {
        std::fill(n.gamma.begin(), n.gamma.end(), 1.0);
        std::fill(n.beta.begin(), n.beta.end(), 0.0);
        std::fill(n.running_mean.begin(), n.running_mean.end(), 0.0);
        std::fill(n.running_var.begin(), n.running_var.end(), 1.0);
    }
    std::mt19937_64 rng(6);
    const auto g = encode(m.encoder, random_batch(rng, 3, arch.points));
    for (double v : g.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, EmptyBatchIsAnError) {
    const Model m = random_model(test::tiny_architecture(), 7);
    EXPECT_THROW(encode(m.encoder, PointBatch{}), std::invalid_argument);
}

TEST(Encode, NonFiniteActivationNamesTheLayer) {
    const auto arch = test::tiny_architecture();
    Model m = random_model(arch, 8);
    m.encoder.layers[1].weight[0] = NAN;
    std::mt19937_64 rng(9);
    try {
        encode(m.encoder, random_batch(rng, 2, arch.points));
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("encoder.1"), std::string::npos) << e.what();
    }
}

TEST(Encode, EvalModeIsDeterministicAndBatchIndependent) {
    Architecture arch;
    const Model m = random_model(arch, 10);
    std::mt19937_64 rng(11);
    const auto batch = random_batch(rng, 300, arch.points);
    const auto a = encode(m.encoder, batch);
    EXPECT_EQ(a.values, encode(m.encoder, batch).values);
    // Single-streamline evaluation reproduces the corresponding row.
    std::vector<ResampledStreamline> last;
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < arch.points; ++i) {
        const auto r = batch.coords.row(299 * arch.points + i);
        pts.push_back({r[0], r[1], r[2]});
    }
    last.emplace_back(std::move(pts));
    const auto b = encode(m.encoder, make_batch(last));
    for (std::size_t c = 0; c < a.values.cols(); ++c) EXPECT_EQ(b.values(0, c), a.values(299, c));
}

// encode and classify evaluate in chunks with fused layers; the tape-recording
// passes are the reference.
TEST(Encode, ChunkedInferenceMatchesTheForwardPassExactly) {
    Architecture arch;
    arch.classes = 16;
    const Model m = random_model(arch, 13);
    std::mt19937_64 rng(14);
    const auto batch = random_batch(rng, 301, arch.points);
    const auto fast = encode(m.encoder, batch);
    const auto tape = encoder_forward(m.encoder, batch, Mode::eval);
    EXPECT_EQ(fast.values, tape.features.values);
    EXPECT_EQ(fast.argmax, tape.features.argmax);
    EXPECT_EQ(classify(m.classifier, fast.values),
              classifier_forward(m.classifier, fast.values, Mode::eval).activations.back());
}

TEST(Encode, TrainModeUpdatesRunningStatistics) {
    const auto arch = test::tiny_architecture();
    Model m = random_model(arch, 12);
    const auto before = m.encoder.norms;
    std::mt19937_64 rng(13);
    encode_train(m.encoder, random_batch(rng, 4, arch.points));
    EXPECT_NE(m.encoder.norms[0].running_mean, before[0].running_mean);
    EXPECT_EQ(m.encoder.layers, random_model(arch, 12).encoder.layers);
}

TEST(Classify, ZeroParametersGiveZeroLogitsAndClassZero) {
    Architecture arch = test::tiny_architecture();
    Model m = init_model(arch, Stage::two, 1);
    for (auto& l : m.classifier.layers) {
        std::fill(l.weight.begin(), l.weight.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    std::mt19937_64 rng(2);
    const Matrix logits = classify(m.classifier, test::random_matrix(rng, 5, arch.feature_dim()));
    for (double v : logits.values()) EXPECT_EQ(v, 0.0);
    for (auto p : predict(logits)) EXPECT_EQ(p, 0u);
}

TEST(Classify, HandComputedToyNetwork) {
    // 2-d features, one hidden layer of width 2 with identity normalisation, 2 classes.
    ClassifierParams p;
    p.layers.push_back({2, 2, {1, 2, -1, 1}, {0.5, -0.5}});
    p.layers.push_back({2, 2, {1, 0, 2, -1}, {0, 1}});
    BatchNorm n;
    n.gamma = {1, 1};
    n.beta = {0, 0};
    n.running_mean = {0, 0};
    n.running_var = {1.0 - kNormEpsilon, 1.0 - kNormEpsilon};
    p.norms.push_back(n);
    Matrix g(2, 2);
    g(0, 0) = 1;
    g(0, 1) = 1;
    g(1, 0) = 2;
    g(1, 1) = -1;
    // Row 0: hidden = relu([1+2+0.5, -1+1-0.5]) = [3.5, 0]; logits = [3.5, 7 + 1] = [3.5, 8].
    // Row 1: hidden = relu([2-2+0.5, -2-1-0.5]) = [0.5, 0]; logits = [0.5, 1 + 1] = [0.5, 2].
    const Matrix logits = classify(p, g);
    EXPECT_NEAR(logits(0, 0), 3.5, 1e-12);
    EXPECT_NEAR(logits(0, 1), 8.0, 1e-12);
    EXPECT_NEAR(logits(1, 0), 0.5, 1e-12);
    EXPECT_NEAR(logits(1, 1), 2.0, 1e-12);
}

TEST(Classify, MatchesAffineOracleOnRandomNetwork) {
    const auto arch = test::tiny_architecture();
    const Model m = random_model(arch, 3);
    std::mt19937_64 rng(4);
    const Matrix g = test::random_matrix(rng, 7, arch.feature_dim());
    Matrix h = g;
    for (std::size_t l = 0; l < m.classifier.layers.size(); ++l) {
        h = test::naive_affine(h, m.classifier.layers[l]);
        if (l < m.classifier.norms.size()) {
            const auto& n = m.classifier.norms[l];
            for (std::size_t r = 0; r < h.rows(); ++r) {
                for (std::size_t c = 0; c < h.cols(); ++c) {
                    const double x = (h(r, c) - n.running_mean[c]) / std::sqrt(n.running_var[c] + kNormEpsilon);
                    h(r, c) = std::max(0.0, n.gamma[c] * x + n.beta[c]);
                }
            }
        }
    }
    const Matrix logits = classify(m.classifier, g);
    for (std::size_t i = 0; i < logits.size(); ++i) EXPECT_NEAR(logits.values()[i], h.values()[i], 1e-12);
}

TEST(Classify, BiasShiftLeavesPredictionsUnchanged) {
    const auto arch = test::tiny_architecture();
    Model m = random_model(arch, 5);
    std::mt19937_64 rng(6);
    const Matrix g = test::random_matrix(rng, 50, arch.feature_dim());
    const auto before = predict(classify(m.classifier, g));
    for (double& b : m.classifier.layers.back().bias) b += 3.25;
    EXPECT_EQ(predict(classify(m.classifier, g)), before);
}

TEST(Classify, NonFiniteLogitsAreAnError) {
    const auto arch = test::tiny_architecture();
    Model m = random_model(arch, 7);
    m.classifier.layers.back().bias[0] = INFINITY;
    std::mt19937_64 rng(8);
    EXPECT_THROW(classify(m.classifier, test::random_matrix(rng, 2, arch.feature_dim())), NumericalError);
}

TEST(Predict, LowestIndexWinsTies) {
    Matrix logits(1, 4, 2.0);
    logits(0, 0) = 1.0;
    EXPECT_EQ(predict(logits), (std::vector<std::uint32_t>{1}));
}

TEST(Project, UnitNormScaleInvarianceAndOracle) {
    Architecture arch = test::tiny_architecture();
    Model m = random_model(arch, 9);
    std::mt19937_64 rng(10);
    const Matrix g = test::random_matrix(rng, 20, arch.feature_dim());
    const Matrix z = project(*m.projector, g);
    const Matrix ref = test::naive_project(*m.projector, g);
    for (std::size_t r = 0; r < z.rows(); ++r) {
        double sq = 0.0;
        for (double v : z.row(r)) sq += v * v;
        EXPECT_LT(std::abs(std::sqrt(sq) - 1.0), 1e-9);
        for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_NEAR(z(r, c), ref(r, c), 1e-12);
    }
    // Scaling the last layer scales the pre-normalisation vector by 7.
    for (double& w : m.projector->layers.back().weight) w *= 7.0;
    for (double& b : m.projector->layers.back().bias) b *= 7.0;
    const Matrix z7 = project(*m.projector, g);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(z7.values()[i], z.values()[i], 1e-15);
}

TEST(Project, ZeroVectorIsDegenerate) {
    Architecture arch = test::tiny_architecture();
    Model m = random_model(arch, 11);
    auto& last = m.projector->layers.back();
    std::fill(last.weight.begin(), last.weight.end(), 0.0);
    std::fill(last.bias.begin(), last.bias.end(), 0.0);
    EXPECT_THROW(project(*m.projector, Matrix(1, arch.feature_dim(), 1.0)), NumericalError);
}

// ---------------------------------------------------------------------------
// Serialization

TEST(ModelIo, RoundTripIsBitExact) {
    Architecture arch = test::tiny_architecture();
    const Model m = quantize(random_model(arch, 12));
    const auto bytes = serialize_model(m);
    EXPECT_EQ(deserialize_model(bytes), m);
    EXPECT_EQ(serialize_model(deserialize_model(bytes)), bytes);
    EXPECT_EQ(deserialize_model(bytes, &arch), m);
}

TEST(ModelIo, RoundTripWithoutProjector) {
    Architecture arch;
    arch.classes = 2;
    const Model m = quantize(init_model(arch, Stage::one, 4));
    EXPECT_EQ(deserialize_model(serialize_model(m)), m);
}

TEST(ModelIo, HeaderLayout) {
    Architecture arch = test::tiny_architecture();
    const auto bytes = serialize_model(quantize(random_model(arch, 13)));
    ASSERT_GT(bytes.size(), 21u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SWMM");
    EXPECT_EQ(bytes[4], kModelFormatVersion);
    EXPECT_EQ(bytes[8], 2);           // stage tag
    EXPECT_EQ(bytes[9], arch.points); // n, little-endian
    EXPECT_EQ(bytes[13], arch.classes);
}

TEST(ModelIo, DistinctErrors) {
    Architecture arch = test::tiny_architecture();
    const auto good = serialize_model(quantize(random_model(arch, 14)));

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_model(bad_magic), BadMagicError);

    auto bad_version = good;
    bad_version[4] = 99;
    EXPECT_THROW(deserialize_model(bad_version), VersionMismatchError);

    const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 5);
    EXPECT_THROW(deserialize_model(truncated), TruncatedError);

    Architecture other = arch;
    other.classes = 10;
    const auto ten = serialize_model(quantize(random_model(other, 15)));
    Architecture five = arch;
    five.classes = 5;
    try {
        deserialize_model(ten, &five);
        FAIL() << "expected ShapeMismatchError";
    } catch (const ShapeMismatchError& e) {
        EXPECT_NE(std::string(e.what()).find("classifier.2"), std::string::npos) << e.what();
    }
}

TEST(ModelIo, QuantizeIsIdempotent) {
    const Model q = quantize(random_model(test::tiny_architecture(), 16));
    EXPECT_EQ(quantize(q), q);
}

// ---------------------------------------------------------------------------
// FLOPs

TEST(Flops, SingleLayerMacsOnly) {
    Architecture a;
    a.encoder_widths = {64};
    FlopsConvention macs_only{false, false, false, false};
    EXPECT_EQ(count_flops(a, macs_only).layers.front().total(), 15u * 2u * 3u * 64u);
}

TEST(Flops, PublishedArchitecture) {
    Architecture a;
    a.classes = 199;
    const auto r = count_flops(a);
    EXPECT_EQ(r.total, r.encoder + r.classifier);
    EXPECT_NEAR(static_cast<double>(r.total), 5.68e6, 0.02 * 5.68e6);
}

TEST(Flops, DoublingClassesAddsLastLayerCost) {
    Architecture a;
    a.classes = 199;
    const auto base = count_flops(a).total;
    a.classes = 398;
    EXPECT_EQ(count_flops(a).total - base, 2u * 256u * 199u + 199u);
}

}  // namespace
}  // namespace swm
