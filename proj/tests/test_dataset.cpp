#include "evonas/dataset.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace evonas;

TEST(Synthetic, NoiselessIsNearestCentroidSeparable) {
    SyntheticSpec spec{4, 160, 16, 16, 1, 0.0, 5};
    auto ds = make_synthetic_dataset(spec);
    EXPECT_DOUBLE_EQ(
        oracles::nearest_centroid_accuracy(ds.train_x, ds.train_y, ds.val_x, ds.val_y, 4), 1.0);
}

TEST(Synthetic, LowNoiseStaysSeparable) {
    SyntheticSpec spec{4, 320, 16, 16, 1, 0.05, 7};
    auto ds = make_synthetic_dataset(spec);
    EXPECT_GE(oracles::nearest_centroid_accuracy(ds.train_x, ds.train_y, ds.val_x, ds.val_y, 4), 0.9);
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticSpec spec{3, 99, 12, 12, 1, 0.1, 11};
    auto a = make_synthetic_dataset(spec);
    auto b = make_synthetic_dataset(spec);
    EXPECT_EQ(a.train_x.v, b.train_x.v);
    EXPECT_EQ(a.val_x.v, b.val_x.v);
    EXPECT_EQ(a.test_x.v, b.test_x.v);
    EXPECT_EQ(a.train_y, b.train_y);
    spec.seed = 12;
    auto c = make_synthetic_dataset(spec);
    EXPECT_NE(a.train_x.v, c.train_x.v);
}

TEST(Synthetic, BalancedSplits) {
    SyntheticSpec spec{4, 322, 8, 8, 1, 0.1, 3};
    auto ds = make_synthetic_dataset(spec);
    for (const auto* y : {&ds.train_y, &ds.val_y, &ds.test_y}) {
        std::vector<int> counts(4, 0);
        for (int label : *y) ++counts[label];
        const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
        EXPECT_LE(*mx - *mn, 1) << "split sizes " << y->size();
    }
    EXPECT_EQ(ds.train_y.size() + ds.val_y.size() + ds.test_y.size(), 322u);
}

TEST(Synthetic, RejectsDegenerateSpecs) {
    EXPECT_THROW(make_synthetic_dataset({1, 10, 8, 8, 1, 0.0, 1}), ValidationError);
}

TEST(Normalize, ZScoresTrainSplit) {
    SyntheticSpec spec{4, 200, 8, 8, 2, 0.1, 9};
    auto ds = make_synthetic_dataset(spec);
    ds.normalize();
    for (int c = 0; c < 2; ++c) {
        double sum = 0, sq = 0;
        size_t count = 0;
        for (int n = 0; n < ds.train_x.n; ++n) {
            const float* p = ds.train_x.at(n, c);
            for (size_t i = 0; i < ds.train_x.plane(); ++i) {
                sum += p[i];
                sq += p[i] * p[i];
                ++count;
            }
        }
        const double mean = sum / count;
        const double var = sq / count - mean * mean;
        EXPECT_NEAR(mean, 0.0, 1e-4);
        EXPECT_NEAR(var, 1.0, 1e-3);
    }
}

TEST(Idx, MagicAndScaling) {
    // One 2x2 image of all 255 -> all pixels exactly 1.0 before z-scoring.
    std::string img;
    for (std::uint32_t v : {0x00000803u, 1u, 2u, 2u})
        for (int shift : {24, 16, 8, 0}) img.push_back(static_cast<char>((v >> shift) & 0xff));
    img += std::string(4, static_cast<char>(0xff));
    std::string lab;
    for (std::uint32_t v : {0x00000801u, 1u})
        for (int shift : {24, 16, 8, 0}) lab.push_back(static_cast<char>((v >> shift) & 0xff));
    lab.push_back(2);

    Dataset ds;
    load_idx_split(ds, Split::Train, img, lab);
    ASSERT_EQ(ds.train_x.n, 1);
    EXPECT_EQ(ds.height, 2);
    for (float v : ds.train_x.v) EXPECT_FLOAT_EQ(v, 1.0f);
    EXPECT_EQ(ds.train_y[0], 2);
}

TEST(Idx, DistinctParseErrors) {
    std::string good_img;
    for (std::uint32_t v : {0x00000803u, 1u, 2u, 2u})
        for (int shift : {24, 16, 8, 0}) good_img.push_back(static_cast<char>((v >> shift) & 0xff));
    good_img += std::string(4, '\0');
    std::string good_lab;
    for (std::uint32_t v : {0x00000801u, 2u})
        for (int shift : {24, 16, 8, 0}) good_lab.push_back(static_cast<char>((v >> shift) & 0xff));
    good_lab += std::string(2, '\0');

    EXPECT_THROW(parse_idx_images("bad!"), ParseError);                     // truncated header
    EXPECT_THROW(parse_idx_images(good_lab), ParseError);                   // wrong magic
    EXPECT_THROW(parse_idx_images(good_img.substr(0, 18)), ParseError);     // truncated data
    Dataset ds;
    EXPECT_THROW(load_idx_split(ds, Split::Train, good_img, good_lab), ParseError);  // 1 vs 2
}

TEST(Idx, SyntheticRoundTripIsLossless) {
    // The generator quantizes to 1/255 steps, so IDX write -> read -> write is
    // byte-identical and the decoded tensor matches exactly.
    SyntheticSpec spec{3, 60, 8, 8, 1, 0.2, 21};
    auto ds = make_synthetic_dataset(spec);
    const auto img = idx_image_bytes(ds.train_x);
    const auto lab = idx_label_bytes(ds.train_y);
    Dataset back;
    load_idx_split(back, Split::Train, img, lab);
    EXPECT_EQ(back.train_x.v, ds.train_x.v);
    EXPECT_EQ(back.train_y, ds.train_y);
    EXPECT_EQ(idx_image_bytes(back.train_x), img);
    EXPECT_EQ(idx_label_bytes(back.train_y), lab);
}

TEST(Augment, ShapePreservedAndDeterministicCore) {
    Tensor<float> batch(1, 1, 16, 16);
    Rng rng(41);
    for (auto& v : batch.v) v = static_cast<float>(rng.uniform());
    const auto original = batch.v;
    const auto p = augment_params(16, 16);
    EXPECT_EQ(p.pad_x, 2);
    EXPECT_EQ(p.cut_h, 4);

    // Centered crop, no flip, cutout pinned to the top-left corner: pixels
    // outside the clipped window are untouched.
    augment_sample(batch, 0, p, p.pad_y, p.pad_x, false, 0, 0);
    EXPECT_EQ(batch.v.size(), original.size());
    const int wy = (p.cut_h + 1) / 2, wx = (p.cut_w + 1) / 2;  // clipped window extent
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const float got = batch.at(0, 0, y, x);
            if (y < wy && x < wx) EXPECT_EQ(got, 0.0f);
            else EXPECT_EQ(got, original[static_cast<size_t>(y) * 16 + x]);
        }
}

TEST(Augment, CutoutZeroesExactlyTheClippedWindow) {
    Tensor<float> batch(1, 1, 12, 10);
    for (auto& v : batch.v) v = 1.0f;
    const auto p = augment_params(12, 10);
    const int cy = 11, cx = 1;
    augment_sample(batch, 0, p, p.pad_y, p.pad_x, false, cy, cx);
    const int y0 = std::max(cy - p.cut_h / 2, 0), y1 = std::min(cy + (p.cut_h + 1) / 2, 12);
    const int x0 = std::max(cx - p.cut_w / 2, 0), x1 = std::min(cx + (p.cut_w + 1) / 2, 10);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 10; ++x) {
            const bool inside = y >= y0 && y < y1 && x >= x0 && x < x1;
            EXPECT_EQ(batch.at(0, 0, y, x), inside ? 0.0f : 1.0f) << y << "," << x;
        }
}

TEST(Augment, FullBatchKeepsShape) {
    Tensor<float> batch(5, 2, 16, 16);
    Rng rng(42);
    for (auto& v : batch.v) v = static_cast<float>(rng.uniform());
    augment(batch, rng);
    EXPECT_EQ(batch.n, 5);
    EXPECT_EQ(batch.c, 2);
    EXPECT_EQ(batch.h, 16);
    EXPECT_EQ(batch.w, 16);
}
