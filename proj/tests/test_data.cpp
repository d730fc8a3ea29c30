#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "heat/data.hpp"
#include "support.hpp"

using namespace heat;
using namespace heat::test;

namespace {

// Values exactly representable in f32, as every binary round trip requires.
FeatureSet random_features(Rng& rng, std::size_t n, std::size_t d, bool labels, std::size_t vol_hw = 0) {
    Matrix x(n, d);
    for (double& v : x.data()) v = static_cast<double>(static_cast<float>(rng.normal()));
    std::optional<std::vector<int>> y;
    if (labels) {
        y.emplace(n);
        for (std::size_t i = 0; i < n; ++i) (*y)[i] = static_cast<int>(i % 3);
    }
    std::optional<VolumeSet> vols;
    if (vol_hw) {
        const StdPoolConfig layout{d, vol_hw, vol_hw};
        Matrix v(n, layout.volume_size());
        for (double& e : v.data()) e = static_cast<double>(static_cast<float>(rng.normal()));
        vols = VolumeSet{layout, std::move(v)};
    }
    return FeatureSet(std::move(x), std::move(y), std::move(vols));
}

bool same_bits(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

// Little-endian header written by hand.
std::vector<std::uint8_t> hand_header(std::uint32_t version, std::uint32_t n, std::uint32_t d, std::uint8_t labels) {
    std::vector<std::uint8_t> out{'H', 'E', 'A', 'T', 'F', 'E', 'A', 'T'};
    for (std::uint32_t v : {version, n, d})
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    out.push_back(labels);
    return out;
}

}  // namespace

TEST_CASE("binary encoding matches the documented layout") {
    const FeatureSet fs(Matrix::from_rows({{1.0, -2.0}}), std::vector<int>{0});
    const auto bytes = encode_features_binary(fs);
    auto want = hand_header(1, 1, 2, 1);
    for (float f : {1.0f, -2.0f}) {
        std::uint8_t b[4];
        std::memcpy(b, &f, 4);
        want.insert(want.end(), b, b + 4);
    }
    want.insert(want.end(), {0, 0, 0, 0});
    CHECK(bytes == want);
}

TEST_CASE("binary and CSV files round-trip bitwise") {
    Rng rng(1);
    const auto dir = temp_dir("data_roundtrip");
    for (bool labels : {false, true}) {
        for (std::size_t hw : {0u, 3u}) {
            const FeatureSet fs = random_features(rng, 30, 4, labels, hw);
            save_features(dir / "a.feat", fs);
            const FeatureSet back = load_features(dir / "a.feat");
            CHECK(same_bits(back.features(), fs.features()));
            CHECK(back.has_labels() == labels);
            if (labels) CHECK(back.labels() == fs.labels());
            CHECK(back.has_volumes() == (hw > 0));
            if (hw) {
                CHECK(back.volumes().layout == fs.volumes().layout);
                CHECK(same_bits(back.volumes().volumes, fs.volumes().volumes));
            }
            CHECK(encode_features_binary(back) == encode_features_binary(fs));
        }
        const FeatureSet fs = random_features(rng, 20, 3, labels);
        save_features(dir / "a.csv", fs);
        CHECK(format_for_path(dir / "a.csv") == FeatureFormat::Csv);
        const FeatureSet back = load_features(dir / "a.csv");
        CHECK(same_bits(back.features(), fs.features()));
    }
}

TEST_CASE("CSV with a label column") {
    const FeatureSet fs = decode_features_csv("f0,f1,label\n0,0,0\n4,0,1\n");
    CHECK(fs.n() == 2);
    CHECK(fs.d() == 2);
    CHECK(fs.labels() == std::vector<int>{0, 1});
    CHECK(fs.class_count() == 2);
    CHECK(fs.features()(1, 0) == 4.0);
    CHECK_FALSE(decode_features_csv("a,b\n1,2\n").has_labels());
}

TEST_CASE("malformed CSV reports the line") {
    try {
        decode_features_csv("f0,f1\n1,2\n3,x\n");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_HEAT_ERROR(decode_features_csv("f0,f1\n1,2,3\n"), ErrorCode::ShapeMismatch);
    CHECK_HEAT_ERROR(decode_features_csv(""), ErrorCode::ParseError);
    CHECK_HEAT_ERROR(decode_features_csv("f0,label\n1,2\n"), ErrorCode::ShapeMismatch);
}

TEST_CASE("truncated or foreign binary files never load partially") {
    Rng rng(2);
    const auto bytes = encode_features_binary(random_features(rng, 5, 3, true, 2));
    CHECK_HEAT_ERROR(decode_features_binary(std::span(bytes).first(4)), ErrorCode::BadMagic);
    for (std::size_t cut : {std::size_t{8}, std::size_t{15}, std::size_t{21}, std::size_t{40}, bytes.size() - 1})
        CHECK_HEAT_ERROR(decode_features_binary(std::span(bytes).first(cut)), ErrorCode::ParseError);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_HEAT_ERROR(decode_features_binary(bad), ErrorCode::BadMagic);
    CHECK_HEAT_ERROR(decode_features_binary(hand_header(2, 0, 1, 0)), ErrorCode::UnsupportedVersion);
    CHECK_HEAT_ERROR(load_features("/nonexistent/heat.feat"), ErrorCode::IoError);
}

TEST_CASE("feature sets validate labels and volumes") {
    CHECK_HEAT_ERROR(FeatureSet(Matrix(2, 1), std::vector<int>{0}), ErrorCode::ShapeMismatch);
    CHECK_HEAT_ERROR(FeatureSet(Matrix(2, 1), std::vector<int>{0, 2}), ErrorCode::ShapeMismatch);
    CHECK_HEAT_ERROR(FeatureSet(Matrix(2, 1), std::vector<int>{0, -1}), ErrorCode::ShapeMismatch);
    CHECK_HEAT_ERROR(FeatureSet(Matrix(2, 1), std::nullopt, VolumeSet{{1, 2, 2}, Matrix(2, 3)}),
                     ErrorCode::ShapeMismatch);
    CHECK_HEAT_ERROR(FeatureSet(Matrix(2, 1)).labels(), ErrorCode::ShapeMismatch);
}

TEST_CASE("score files accept commas, whitespace and comments") {
    CHECK(decode_scores("1, 2 3\n# note\n4.5 # trailing\n\n-1e2") == std::vector<double>{1, 2, 3, 4.5, -100});
    try {
        decode_scores("1\n2\nabc\n");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_HEAT_ERROR(decode_scores("1 inf"), ErrorCode::NonFiniteValue);
}

TEST_CASE("default centers follow the axes") {
    const auto c = default_centers(3, 2);
    CHECK(c == std::vector<Vector>{{0, 0}, {6, 0}, {0, 6}});
    CHECK(default_centers(4, 1, 2.0) == std::vector<Vector>{{0}, {2}, {4}, {6}});
}

TEST_CASE("gmm-clusters: empirical means near the centers") {
    SyntheticSpec s;
    s.centers = default_centers(3, 2);
    s.n = 300;
    s.seed = 3;
    const FeatureSet fs = generate(s);
    CHECK(fs.class_count() == 3);
    std::vector<Vector> sum(3, Vector(2, 0.0));
    std::vector<int> count(3, 0);
    for (std::size_t i = 0; i < fs.n(); ++i) {
        const int y = fs.labels()[i];
        sum[y][0] += fs.features()(i, 0);
        sum[y][1] += fs.features()(i, 1);
        ++count[y];
    }
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(count[c] == 100);
        for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(sum[c][j] / 100.0 - s.centers[c][j]) < 0.5);
    }
    CHECK(encode_features_binary(generate(s)) == encode_features_binary(fs));
    s.seed = 4;
    CHECK(encode_features_binary(generate(s)) != encode_features_binary(fs));
}

TEST_CASE("noise-free ring lies on its circle") {
    SyntheticSpec s;
    s.kind = SyntheticKind::Ring;
    s.radius = 3.0;
    s.n = 500;
    const FeatureSet fs = generate(s);
    CHECK_FALSE(fs.has_labels());
    for (std::size_t i = 0; i < fs.n(); ++i) {
        const double r = std::hypot(fs.features()(i, 0), fs.features()(i, 1));
        CHECK(std::abs(r - 3.0) <= 4 * 3.0 * std::numeric_limits<double>::epsilon());
    }
}

TEST_CASE("between-modes and box generators") {
    SyntheticSpec s;
    s.kind = SyntheticKind::BetweenModes;
    s.centers = default_centers(3, 2);
    s.n = 6;
    const FeatureSet mid = generate(s);
    CHECK(Vector(mid.features().row(0).begin(), mid.features().row(0).end()) == Vector{3, 0});
    CHECK(Vector(mid.features().row(2).begin(), mid.features().row(2).end()) == Vector{3, 3});

    SyntheticSpec b;
    b.kind = SyntheticKind::UniformBox;
    b.box_low = {30, 30};
    b.box_high = {40, 41};
    b.n = 400;
    b.volume_hw = 2;
    const FeatureSet box = generate(b);
    for (std::size_t i = 0; i < box.n(); ++i) {
        CHECK(box.features()(i, 0) >= 30.0);
        CHECK(box.features()(i, 1) < 41.0);
    }
    CHECK(box.volumes().layout == StdPoolConfig{2, 2, 2});
    CHECK(box.std_pooled().cols() == 2);

    b.box_high = {20, 41};
    CHECK_HEAT_ERROR(generate(b), ErrorCode::InvalidSpec);
    s.centers.resize(1);
    CHECK_HEAT_ERROR(generate(s), ErrorCode::InvalidSpec);
    CHECK(synthetic_kind_from_string("between-modes") == SyntheticKind::BetweenModes);
    CHECK_HEAT_ERROR(synthetic_kind_from_string("spiral"), ErrorCode::InvalidSpec);
}

TEST_CASE("volumes average back to the features") {
    SyntheticSpec s;
    s.centers = default_centers(2, 3);
    s.n = 10;
    s.volume_hw = 4;
    const FeatureSet fs = generate(s);
    const auto& v = fs.volumes();
    for (std::size_t i = 0; i < fs.n(); ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (std::size_t k = 0; k < 16; ++k) mean += v.volumes(i, c * 16 + k);
            CHECK(mean / 16.0 == doctest::Approx(fs.features()(i, c)).epsilon(1e-12));
        }
}

TEST_CASE("stratified split") {
    Matrix x(100, 1);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        x(i, 0) = static_cast<double>(i);
        y[i] = static_cast<int>(i % 2);
    }
    const FeatureSet fs(x, y);
    const auto [train, test] = split(fs, 0.5, 1);
    for (const FeatureSet* part : {&train, &test}) {
        CHECK(part->n() == 50);
        CHECK(std::count(part->labels().begin(), part->labels().end(), 0) == 25);
    }
    std::vector<double> all;
    for (const FeatureSet* part : {&train, &test})
        for (std::size_t i = 0; i < part->n(); ++i) all.push_back(part->features()(i, 0));
    std::sort(all.begin(), all.end());
    CHECK(std::equal(all.begin(), all.end(), x.data().begin(), x.data().end()));

    const auto [train2, test2] = split(fs, 0.5, 2);
    CHECK(train2.features() != train.features());
    CHECK(split(fs, 0.5, 1).first.features() == train.features());
}

TEST_CASE("split totals follow the requested fraction") {
    SyntheticSpec s;
    s.centers = default_centers(3, 2);
    s.n = 4000;
    const auto [train, test] = split(generate(s), 0.75, 9);
    CHECK(train.n() == 3000);
    CHECK(test.n() == 1000);
    const FeatureSet tiny(Matrix(3, 1), std::vector<int>{0, 1, 1});
    CHECK_HEAT_ERROR(split(tiny, 0.5, 1), ErrorCode::TooSmall);
    CHECK_HEAT_ERROR(split(tiny, 1.0, 1), ErrorCode::InvalidSpec);
}

TEST_CASE("atomic text writes replace the target") {
    const auto dir = temp_dir("data_atomic");
    write_text_atomic(dir / "r.csv", "one\n");
    write_text_atomic(dir / "r.csv", "two\n");
    std::ifstream in(dir / "r.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "two");
    CHECK(std::distance(std::filesystem::directory_iterator(dir), std::filesystem::directory_iterator{}) == 1);
}
