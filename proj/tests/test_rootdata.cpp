#include <random>

#include <gtest/gtest.h>

#include "plancherel/rootdata.hpp"

using namespace plancherel;

TEST(RootData, RankOneRho) {
    for (int m : {1, 2, 3}) {
        const RootDatum rd = build_root_datum(RootFamily::RankOne, m, 0.7);
        ASSERT_EQ(rd.positive.size(), 1u);
        EXPECT_NEAR(rd.rho[0], 0.5 * m * 0.7, 1e-15);
    }
}

TEST(RootData, A2RhoIsSumOfSimpleRoots) {
    const RootDatum rd = build_root_datum(RootFamily::A2);
    // enumerate the positive roots and take the half sum by hand
    Vec half = Vec::Zero(2);
    int count = 0;
    for (std::size_t i = 0; i < rd.roots.size(); ++i)
        if (rd.is_positive(static_cast<int>(i))) {
            half += 0.5 * rd.roots[i];
            ++count;
        }
    EXPECT_EQ(count, 3);
    const Vec simple_sum = rd.roots[rd.simple[0]] + rd.roots[rd.simple[1]];
    EXPECT_LT((half - simple_sum).norm(), 1e-15);
    EXPECT_LT((rd.rho - simple_sum).norm(), 1e-15);
}

TEST(RootData, InvalidMultiplicity) {
    EXPECT_THROW(build_root_datum(RootFamily::RankOne, 0), ParameterError);
    EXPECT_THROW(build_root_datum(RootFamily::A2, 2), ParameterError);
    EXPECT_THROW(build_root_datum(RootFamily::A1, 1, -1.0), ParameterError);
}

TEST(RootData, JsonRoundTrip) {
    const RootDatum rd = build_root_datum(RootFamily::RankOne, 2, 0.5);
    nlohmann::json j = rd;
    const RootDatum back = root_datum_from_json(j);
    EXPECT_EQ(back.family, rd.family);
    EXPECT_EQ(back.multiplicities, rd.multiplicities);
    EXPECT_DOUBLE_EQ(back.rho[0], rd.rho[0]);
    EXPECT_THROW(root_datum_from_json({{"family", "B2"}}), ParameterError);
}

TEST(WeylGroup, RankOne) {
    const RootDatum rd = build_root_datum(RootFamily::RankOne, 2);
    const WeylGroup wg = weyl_group(rd);
    ASSERT_EQ(wg.order(), 2);
    EXPECT_NEAR(wg.elements[wg.longest](0, 0), -1.0, 1e-15);
    const SpectralParam l = SpectralParam::imaginary(Vec::Constant(1, 1.3));
    EXPECT_EQ(wg.act(wg.identity, l).im[0], 1.3);
}

TEST(WeylGroup, A2ClosureByBruteForce) {
    const RootDatum rd = build_root_datum(RootFamily::A2);
    const WeylGroup wg = weyl_group(rd);
    EXPECT_EQ(wg.order(), 6);
    // all words of length <= 4 in the two reflections give the same 6 matrices
    const Mat s1 = reflection_matrix(rd, rd.roots[rd.simple[0]]);
    const Mat s2 = reflection_matrix(rd, rd.roots[rd.simple[1]]);
    std::vector<Mat> seen;
    for (int len = 0; len <= 4; ++len)
        for (int bits = 0; bits < (1 << len); ++bits) {
            Mat m = Mat::Identity(2, 2);
            for (int k = 0; k < len; ++k)
                m = ((bits >> k) & 1 ? s1 : s2) * m;
            bool found = false;
            for (const Mat& s : seen)
                found = found || (s - m).cwiseAbs().maxCoeff() < 1e-12;
            if (!found)
                seen.push_back(m);
            EXPECT_GE(wg.find(m), 0);
        }
    EXPECT_EQ(seen.size(), 6u);
    EXPECT_EQ(wg.length(wg.longest), 3);
    for (int a = 0; a < 6; ++a)
        EXPECT_EQ(wg.product[a][wg.inverse[a]], wg.identity);
}

TEST(WeylGroup, ElementCap) {
    EXPECT_THROW(weyl_group(build_root_datum(RootFamily::A2), 4), SizeError);
}

TEST(WeylGroup, InversionSets) {
    const RootDatum rd = build_root_datum(RootFamily::A2);
    const WeylGroup wg = weyl_group(rd);
    for (int w = 0; w < wg.order(); ++w)
        EXPECT_EQ(static_cast<int>(inversion_set(rd, wg, w).size()), wg.length(w));
}

TEST(DominantRepresentative, RankOne) {
    const RootDatum rd = build_root_datum(RootFamily::RankOne, 1);
    const WeylGroup wg = weyl_group(rd);
    const SpectralParam l = SpectralParam::imaginary(-2.0 * rd.roots[0]);
    const auto [d, w] = dominant_representative(l, wg, rd);
    EXPECT_NEAR(d.im[0], 2.0 * rd.roots[0][0], 1e-15);
    EXPECT_EQ(w, wg.longest);
    const auto [d2, w2] = dominant_representative(d, wg, rd);
    EXPECT_EQ(w2, wg.identity);
    EXPECT_EQ(d2.im[0], d.im[0]);
    EXPECT_THROW(dominant_representative(SpectralParam::real(rd.rho), wg, rd), ParameterError);
}

TEST(DominantRepresentative, A2ExhaustiveOrbitScan) {
    const RootDatum rd = build_root_datum(RootFamily::A2);
    const WeylGroup wg = weyl_group(rd);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        Vec v(2);
        v << nd(rng), nd(rng);
        const auto [d, w] = dominant_representative(SpectralParam::imaginary(v), wg, rd);
        int hits = 0;
        Vec oracle;
        for (int u = 0; u < 6; ++u) {
            const Vec img = wg.elements[u] * v;
            if (img.dot(rd.roots[rd.simple[0]]) >= 0 && img.dot(rd.roots[rd.simple[1]]) >= 0) {
                ++hits;
                oracle = img;
            }
        }
        ASSERT_EQ(hits, 1);
        EXPECT_LT((d.im - oracle).norm(), 1e-14);
        EXPECT_LT((wg.elements[w] * v - d.im).norm(), 1e-14);
    }
}

TEST(SpectralParam, Regularity) {
    const RootDatum rd = build_root_datum(RootFamily::A2);
    Vec wall(2);
    wall << 0.0, 1.0;  // orthogonal to alpha_1
    EXPECT_FALSE(rd.is_regular(SpectralParam::imaginary(wall)));
    EXPECT_FALSE(rd.is_regular(SpectralParam::imaginary(Vec::Zero(2))));
    Vec gen(2);
    gen << 0.3, 1.1;
    EXPECT_TRUE(rd.is_regular(SpectralParam::imaginary(gen)));
}
