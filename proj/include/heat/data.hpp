#pragma once

// Feature sets, their on-disk formats, the synthetic desk-scale generators and
// the stratified split.
//
// Binary feature file (little-endian):
//   "HEATFEAT" | u32 version=1 | u32 n | u32 d | u8 has_labels
//   | f32 features[n*d] row-major | i32 labels[n] (if has_labels)
// optionally followed by a volume trailer used by std pooling:
//   "HEATVOLS" | u32 channels | u32 height | u32 width | f32 volumes[n*C*H*W]

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "heat/linalg.hpp"
#include "heat/priors.hpp"

namespace heat {

struct VolumeSet {
    StdPoolConfig layout;
    Matrix volumes;  // n x (C*H*W), channel-major per row
};

class FeatureSet {
public:
    FeatureSet() = default;
    // Labels must be non-negative and cover 0..C-1 without gaps.
    explicit FeatureSet(Matrix features, std::optional<std::vector<int>> labels = std::nullopt,
                        std::optional<VolumeSet> volumes = std::nullopt);

    std::size_t n() const noexcept { return features_.rows(); }
    std::size_t d() const noexcept { return features_.cols(); }
    const Matrix& features() const noexcept { return features_; }
    bool has_labels() const noexcept { return labels_.has_value(); }
    const std::vector<int>& labels() const;
    std::size_t class_count() const noexcept { return class_count_; }
    bool has_volumes() const noexcept { return volumes_.has_value(); }
    const VolumeSet& volumes() const;

    // Per-sample std-pooled volumes (n x channels).
    Matrix std_pooled() const;
    FeatureSet subset(std::span<const std::size_t> indices) const;

private:
    Matrix features_;
    std::optional<std::vector<int>> labels_;
    std::optional<VolumeSet> volumes_;
    std::size_t class_count_ = 0;
};

enum class FeatureFormat { Csv, Binary };

// Csv when the extension is ".csv", Binary otherwise.
FeatureFormat format_for_path(const std::filesystem::path& path);

FeatureSet load_features(const std::filesystem::path& path, FeatureFormat format);
FeatureSet load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const FeatureSet& fs, FeatureFormat format);
void save_features(const std::filesystem::path& path, const FeatureSet& fs);

std::vector<std::uint8_t> encode_features_binary(const FeatureSet& fs);
FeatureSet decode_features_binary(std::span<const std::uint8_t> bytes);
std::string encode_features_csv(const FeatureSet& fs);
FeatureSet decode_features_csv(std::string_view text);

// Score files for standalone evaluation: numbers separated by whitespace or
// commas, '#' starts a comment. ParseError names the offending line.
std::vector<double> decode_scores(std::string_view text);
std::vector<double> load_scores(const std::filesystem::path& path);

// Writes text to a temporary sibling and renames it over path.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

enum class SyntheticKind { GmmClusters, Ring, UniformBox, BetweenModes };

std::string_view to_string(SyntheticKind kind) noexcept;
SyntheticKind synthetic_kind_from_string(std::string_view name);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::GmmClusters;
    std::vector<Vector> centers;  // gmm-clusters, between-modes
    Vector stds{1.0};             // per-center std; a single value is broadcast
    double noise_std = 0.0;       // between-modes jitter, ring radial noise
    Vector ring_center;           // defaults to the origin
    double radius = 1.0;
    Vector box_low;
    Vector box_high;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    // Side of the square spatial grid of the generated feature volumes; 0
    // generates no volumes.
    std::size_t volume_hw = 0;
    std::size_t dim = 2;  // used when neither centers nor box bounds fix it

    void validate() const;
    std::size_t feature_dim() const;
};

// count centers spaced `spacing` apart: the origin, then one per axis
// direction, cycling outward (3 centers in 2-D: (0,0), (6,0), (0,6)).
std::vector<Vector> default_centers(std::size_t count, std::size_t dim, double spacing = 6.0);

// Deterministic in the spec. gmm-clusters carries labels (balanced, sample i
// belongs to cluster i mod C); the other kinds are unlabeled.
FeatureSet generate(const SyntheticSpec& spec);

// Stratified (per label, or globally when unlabeled) and deterministic in seed.
std::pair<FeatureSet, FeatureSet> split(const FeatureSet& fs, double train_fraction, std::uint64_t seed);

}  // namespace heat
