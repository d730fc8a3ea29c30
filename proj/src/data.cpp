#include "heat/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "bytes.hpp"
#include "heat/rng.hpp"

namespace heat {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    require(!in.bad(), ErrorCode::IoError, "error reading " + path.string());
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    require(!ec, ErrorCode::IoError, "cannot create directory " + path.parent_path().string());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        require(out.good(), ErrorCode::IoError, "error writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorCode::IoError, "cannot move output into place at " + path.string());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// FeatureSet

FeatureSet::FeatureSet(Matrix features, std::optional<std::vector<int>> labels,
                       std::optional<VolumeSet> volumes)
    : features_(std::move(features)), labels_(std::move(labels)), volumes_(std::move(volumes)) {
    if (labels_) {
        require(labels_->size() == features_.rows(), ErrorCode::ShapeMismatch,
                std::to_string(labels_->size()) + " labels for " + std::to_string(features_.rows()) + " rows");
        std::set<int> seen;
        for (int y : *labels_) {
            require(y >= 0, ErrorCode::ShapeMismatch, "negative label " + std::to_string(y));
            seen.insert(y);
        }
        if (!seen.empty()) {
            require(*seen.rbegin() + 1 == static_cast<int>(seen.size()), ErrorCode::ShapeMismatch,
                    "labels must cover a contiguous range starting at 0");
            class_count_ = seen.size();
        }
    }
    if (volumes_) {
        require(volumes_->volumes.rows() == features_.rows(), ErrorCode::ShapeMismatch,
                "one volume per feature row required");
        require(volumes_->volumes.cols() == volumes_->layout.volume_size() && volumes_->layout.volume_size() > 0,
                ErrorCode::ShapeMismatch, "volume length does not match its C*H*W layout");
    }
}

const std::vector<int>& FeatureSet::labels() const {
    require(labels_.has_value(), ErrorCode::ShapeMismatch, "feature set has no labels");
    return *labels_;
}

const VolumeSet& FeatureSet::volumes() const {
    require(volumes_.has_value(), ErrorCode::ShapeMismatch, "feature set has no feature volumes");
    return *volumes_;
}

Matrix FeatureSet::std_pooled() const { return std_pool_rows(volumes().volumes, volumes().layout); }

FeatureSet FeatureSet::subset(std::span<const std::size_t> indices) const {
    Matrix f(indices.size(), d());
    std::optional<std::vector<int>> labels;
    std::optional<VolumeSet> vols;
    if (labels_) labels.emplace();
    if (volumes_) vols = VolumeSet{volumes_->layout, Matrix(indices.size(), volumes_->volumes.cols())};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        require(i < n(), ErrorCode::ShapeMismatch, "subset index out of range");
        std::copy(features_.row(i).begin(), features_.row(i).end(), f.row(r).begin());
        if (labels) labels->push_back((*labels_)[i]);
        if (vols) std::copy(volumes_->volumes.row(i).begin(), volumes_->volumes.row(i).end(), vols->volumes.row(r).begin());
    }
    return FeatureSet(std::move(f), std::move(labels), std::move(vols));
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr std::string_view kFeatMagic = "HEATFEAT";
constexpr std::string_view kVolMagic = "HEATVOLS";
constexpr std::uint32_t kFeatVersion = 1;

std::uint32_t checked_u32(std::size_t v, const char* what) {
    require(v <= 0xffffffffULL, ErrorCode::ShapeMismatch, std::string(what) + " does not fit in u32");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_features_binary(const FeatureSet& fs) {
    detail::ByteWriter w;
    w.put_tag(kFeatMagic);
    w.put_u32(kFeatVersion);
    w.put_u32(checked_u32(fs.n(), "n"));
    w.put_u32(checked_u32(fs.d(), "d"));
    w.put_u8(fs.has_labels() ? 1 : 0);
    for (double v : fs.features().data()) w.put_f32(static_cast<float>(v));
    if (fs.has_labels())
        for (int y : fs.labels()) w.put_i32(y);
    if (fs.has_volumes()) {
        const auto& vs = fs.volumes();
        w.put_tag(kVolMagic);
        w.put_u32(checked_u32(vs.layout.channels, "channels"));
        w.put_u32(checked_u32(vs.layout.height, "height"));
        w.put_u32(checked_u32(vs.layout.width, "width"));
        for (double v : vs.volumes.data()) w.put_f32(static_cast<float>(v));
    }
    return std::move(w.bytes());
}

FeatureSet decode_features_binary(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    require(r.peek_tag(kFeatMagic), ErrorCode::BadMagic, "not a HEATFEAT feature file");
    r.get_bytes(kFeatMagic.size());
    const std::uint32_t version = r.get_u32();
    require(version == kFeatVersion, ErrorCode::UnsupportedVersion,
            "feature file version " + std::to_string(version) + " (supported: 1)");
    const std::size_t n = r.get_u32();
    const std::size_t d = r.get_u32();
    const std::uint8_t has_labels = r.get_u8();
    require(has_labels <= 1, ErrorCode::ParseError, "has_labels flag must be 0 or 1");

    require(d == 0 || n <= r.remaining() / (4 * d), ErrorCode::ParseError,
            "feature file truncated: header declares more data than present");
    const std::size_t need = n * d * 4 + (has_labels ? n * 4 : 0);
    require(r.remaining() >= need, ErrorCode::ParseError,
            "feature file truncated: payload needs " + std::to_string(need) + " bytes, " +
                std::to_string(r.remaining()) + " present");
    std::vector<double> data(n * d);
    for (double& v : data) {
        v = r.get_f32();
        require(std::isfinite(v), ErrorCode::ParseError, "non-finite feature at offset " + std::to_string(r.offset() - 4));
    }
    std::optional<std::vector<int>> labels;
    if (has_labels) {
        labels.emplace(n);
        for (int& y : *labels) y = r.get_i32();
    }
    std::optional<VolumeSet> vols;
    if (r.remaining() > 0) {
        require(r.peek_tag(kVolMagic), ErrorCode::ParseError,
                "unexpected trailing bytes at offset " + std::to_string(r.offset()));
        r.get_bytes(kVolMagic.size());
        StdPoolConfig layout{r.get_u32(), r.get_u32(), r.get_u32()};
        const std::size_t len = layout.volume_size();
        require(len > 0 && n <= r.remaining() / (4 * len) && r.remaining() == n * len * 4, ErrorCode::ParseError, "volume trailer has the wrong length");
        std::vector<double> vdata(n * len);
        for (double& v : vdata) v = r.get_f32();
        vols = VolumeSet{layout, Matrix(n, len, std::move(vdata))};
    }
    return FeatureSet(Matrix(n, d, std::move(data)), std::move(labels), std::move(vols));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, std::size_t col) {
    T value{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty())
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                                        ": cannot parse '" + std::string(field) + "'");
    return value;
}

}  // namespace

FeatureSet decode_features_csv(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        while (pos < text.size()) {
            const std::size_t nl = text.find('\n', pos);
            line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
            pos = nl == std::string_view::npos ? text.size() : nl + 1;
            ++line_no;
            if (!line.empty()) return true;
        }
        return false;
    };

    std::string_view line;
    require(next_line(line), ErrorCode::ParseError, "CSV is empty (a header row is required)");
    const auto header = split_commas(line);
    const bool has_labels = header.back() == "label";
    const std::size_t d = header.size() - (has_labels ? 1 : 0);
    require(d >= 1, ErrorCode::ParseError, "CSV header names no feature columns");

    std::vector<double> data;
    std::vector<int> labels;
    std::size_t n = 0;
    while (next_line(line)) {
        const auto fields = split_commas(line);
        require(fields.size() == header.size(), ErrorCode::ShapeMismatch,
                "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " columns, got " +
                    std::to_string(fields.size()));
        for (std::size_t c = 0; c < d; ++c) {
            const double v = parse_number<double>(fields[c], line_no, c);
            require(std::isfinite(v), ErrorCode::ParseError, "line " + std::to_string(line_no) + ": non-finite value");
            data.push_back(v);
        }
        if (has_labels) labels.push_back(parse_number<int>(fields[d], line_no, d));
        ++n;
    }
    std::optional<std::vector<int>> lab;
    if (has_labels) lab = std::move(labels);
    return FeatureSet(Matrix(n, d, std::move(data)), std::move(lab));
}

std::string encode_features_csv(const FeatureSet& fs) {
    std::string out;
    for (std::size_t j = 0; j < fs.d(); ++j) {
        if (j) out += ',';
        out += "f" + std::to_string(j);
    }
    if (fs.has_labels()) out += ",label";
    out += '\n';
    char buf[64];
    for (std::size_t i = 0; i < fs.n(); ++i) {
        for (std::size_t j = 0; j < fs.d(); ++j) {
            if (j) out += ',';
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, fs.features()(i, j));
            out.append(buf, ptr);
        }
        if (fs.has_labels()) out += "," + std::to_string(fs.labels()[i]);
        out += '\n';
    }
    return out;
}

FeatureFormat format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? FeatureFormat::Csv : FeatureFormat::Binary;
}

FeatureSet load_features(const std::filesystem::path& path, FeatureFormat format) {
    const auto bytes = detail::read_file(path);
    if (format == FeatureFormat::Binary) return decode_features_binary(bytes);
    return decode_features_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

FeatureSet load_features(const std::filesystem::path& path) { return load_features(path, format_for_path(path)); }

void save_features(const std::filesystem::path& path, const FeatureSet& fs, FeatureFormat format) {
    if (format == FeatureFormat::Binary)
        detail::write_file_atomic(path, encode_features_binary(fs));
    else
        detail::write_file_atomic(path, encode_features_csv(fs));
}

void save_features(const std::filesystem::path& path, const FeatureSet& fs) {
    save_features(path, fs, format_for_path(path));
}

std::vector<double> decode_scores(std::string_view text) {
    std::vector<double> scores;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        std::size_t i = 0;
        while (i < line.size()) {
            const char c = line[i];
            if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' && line[j] != ',') ++j;
            const std::string_view tok = line.substr(i, j - i);
            double v = 0.0;
            const char* first = tok.data();
            if (!tok.empty() && tok.front() == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
            require(ec == std::errc() && ptr == tok.data() + tok.size(), ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": '" + std::string(tok) + "' is not a number");
            require(std::isfinite(v), ErrorCode::NonFiniteValue, "line " + std::to_string(line_no) + ": non-finite score");
            scores.push_back(v);
            i = j;
        }
    }
    return scores;
}

std::vector<double> load_scores(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    try {
        return decode_scores(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.message());
    }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    detail::write_file_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Synthetic data

std::string_view to_string(SyntheticKind kind) noexcept {
    switch (kind) {
        case SyntheticKind::GmmClusters: return "gmm-clusters";
        case SyntheticKind::Ring: return "ring";
        case SyntheticKind::UniformBox: return "uniform-box";
        case SyntheticKind::BetweenModes: return "between-modes";
    }
    return "unknown";
}

SyntheticKind synthetic_kind_from_string(std::string_view name) {
    for (auto k : {SyntheticKind::GmmClusters, SyntheticKind::Ring, SyntheticKind::UniformBox, SyntheticKind::BetweenModes})
        if (to_string(k) == name) return k;
    fail(ErrorCode::InvalidSpec, "unknown synthetic kind '" + std::string(name) + "'");
}

std::size_t SyntheticSpec::feature_dim() const {
    if (!centers.empty()) return centers.front().size();
    if (!box_low.empty()) return box_low.size();
    if (!ring_center.empty()) return ring_center.size();
    return dim;
}

void SyntheticSpec::validate() const {
    require(n >= 1, ErrorCode::InvalidSpec, "n must be >= 1");
    require(noise_std >= 0.0, ErrorCode::InvalidSpec, "noise std must be >= 0");
    const std::size_t d = feature_dim();
    require(d >= 1, ErrorCode::InvalidSpec, "dimension must be >= 1");
    for (const auto& c : centers) require(c.size() == d, ErrorCode::InvalidSpec, "centers have mixed dimensions");
    switch (kind) {
        case SyntheticKind::GmmClusters:
            require(!centers.empty(), ErrorCode::InvalidSpec, "gmm-clusters needs at least one center");
            require(stds.size() == 1 || stds.size() == centers.size(), ErrorCode::InvalidSpec,
                    "give one std or one per center");
            for (double s : stds) require(s >= 0.0, ErrorCode::InvalidSpec, "cluster std must be >= 0");
            break;
        case SyntheticKind::BetweenModes:
            require(centers.size() >= 2, ErrorCode::InvalidSpec, "between-modes needs at least two centers");
            break;
        case SyntheticKind::Ring:
            require(radius >= 0.0, ErrorCode::InvalidSpec, "radius must be >= 0");
            require(ring_center.empty() || ring_center.size() == d, ErrorCode::InvalidSpec, "ring center dimension");
            break;
        case SyntheticKind::UniformBox:
            require(box_low.size() == d && box_high.size() == d, ErrorCode::InvalidSpec,
                    "uniform-box needs low/high bounds of the feature dimension");
            for (std::size_t i = 0; i < d; ++i)
                require(box_low[i] <= box_high[i], ErrorCode::InvalidSpec, "box low bound exceeds high bound");
            break;
    }
}

std::vector<Vector> default_centers(std::size_t count, std::size_t dim, double spacing) {
    require(dim >= 1, ErrorCode::InvalidSpec, "dimension must be >= 1");
    std::vector<Vector> out;
    for (std::size_t i = 0; i < count; ++i) {
        Vector c(dim, 0.0);
        if (i > 0) {
            const std::size_t axis = (i - 1) % dim;
            const std::size_t shell = (i - 1) / dim + 1;
            c[axis] = spacing * static_cast<double>(shell);
        }
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

// Channel c of sample z: z_c plus a spatial pattern of population std
// (1 + 0.3|z_c|) * exp(0.1 eps), so that mean pooling recovers z_c.
Vector make_volume(std::span<const double> z, std::size_t hw, Rng& rng) {
    const std::size_t cells = hw * hw;
    Vector vol(z.size() * cells);
    Vector pattern(cells);
    for (std::size_t c = 0; c < z.size(); ++c) {
        const double sigma = (1.0 + 0.3 * std::abs(z[c])) * std::exp(0.1 * rng.normal());
        for (double& p : pattern) p = rng.normal();
        double mean = 0.0;
        for (double p : pattern) mean += p;
        mean /= static_cast<double>(cells);
        double ss = 0.0;
        for (double& p : pattern) {
            p -= mean;
            ss += p * p;
        }
        const double sd = std::sqrt(ss / static_cast<double>(cells));
        for (std::size_t k = 0; k < cells; ++k) vol[c * cells + k] = z[c] + (sd > 0.0 ? sigma * pattern[k] / sd : 0.0);
    }
    return vol;
}

}  // namespace

FeatureSet generate(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t d = spec.feature_dim();
    Matrix features(spec.n, d);
    std::optional<std::vector<int>> labels;
    Rng rng = Rng::derive(spec.seed, "synthetic", {static_cast<std::uint64_t>(spec.kind)});

    switch (spec.kind) {
        case SyntheticKind::GmmClusters: {
            labels.emplace(spec.n);
            const std::size_t k = spec.centers.size();
            for (std::size_t i = 0; i < spec.n; ++i) {
                const std::size_t c = i % k;
                const double sd = spec.stds.size() == 1 ? spec.stds[0] : spec.stds[c];
                auto row = features.row(i);
                for (std::size_t j = 0; j < d; ++j) row[j] = spec.centers[c][j] + sd * rng.normal();
                (*labels)[i] = static_cast<int>(c);
            }
            break;
        }
        case SyntheticKind::BetweenModes: {
            std::vector<std::pair<std::size_t, std::size_t>> pairs;
            for (std::size_t a = 0; a < spec.centers.size(); ++a)
                for (std::size_t b = a + 1; b < spec.centers.size(); ++b) pairs.emplace_back(a, b);
            for (std::size_t i = 0; i < spec.n; ++i) {
                const auto [a, b] = pairs[i % pairs.size()];
                auto row = features.row(i);
                for (std::size_t j = 0; j < d; ++j)
                    row[j] = 0.5 * (spec.centers[a][j] + spec.centers[b][j]) + spec.noise_std * rng.normal();
            }
            break;
        }
        case SyntheticKind::Ring: {
            const Vector center = spec.ring_center.empty() ? Vector(d, 0.0) : spec.ring_center;
            Vector dir(d);
            for (std::size_t i = 0; i < spec.n; ++i) {
                const double r = spec.radius + spec.noise_std * rng.normal();
                if (d == 2) {
                    const double theta = 2.0 * std::numbers::pi * rng.uniform();
                    dir[0] = std::cos(theta);
                    dir[1] = std::sin(theta);
                } else {
                    double norm = 0.0;
                    do {
                        for (double& v : dir) v = rng.normal();
                        norm = std::sqrt(squared_norm(dir));
                    } while (norm == 0.0);
                    for (double& v : dir) v /= norm;
                }
                auto row = features.row(i);
                for (std::size_t j = 0; j < d; ++j) row[j] = center[j] + r * dir[j];
            }
            break;
        }
        case SyntheticKind::UniformBox:
            for (std::size_t i = 0; i < spec.n; ++i) {
                auto row = features.row(i);
                for (std::size_t j = 0; j < d; ++j) row[j] = rng.uniform(spec.box_low[j], spec.box_high[j]);
            }
            break;
    }

    std::optional<VolumeSet> vols;
    if (spec.volume_hw > 0) {
        const StdPoolConfig layout{d, spec.volume_hw, spec.volume_hw};
        Matrix v(spec.n, layout.volume_size());
        Rng vrng = Rng::derive(spec.seed, "synthetic-volume", {static_cast<std::uint64_t>(spec.kind)});
        for (std::size_t i = 0; i < spec.n; ++i) {
            const Vector vol = make_volume(features.row(i), spec.volume_hw, vrng);
            std::copy(vol.begin(), vol.end(), v.row(i).begin());
        }
        vols = VolumeSet{layout, std::move(v)};
    }
    return FeatureSet(std::move(features), std::move(labels), std::move(vols));
}

// ---------------------------------------------------------------------------
// Split

std::pair<FeatureSet, FeatureSet> split(const FeatureSet& fs, double train_fraction, std::uint64_t seed) {
    require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::InvalidSpec, "train fraction must be in (0, 1)");
    require(fs.n() > 0, ErrorCode::TooSmall, "cannot split an empty feature set");

    const std::size_t groups = fs.has_labels() ? fs.class_count() : 1;
    std::vector<std::vector<std::size_t>> members(groups);
    for (std::size_t i = 0; i < fs.n(); ++i) members[fs.has_labels() ? static_cast<std::size_t>(fs.labels()[i]) : 0].push_back(i);

    // Largest-remainder allocation: the train total is round(f * n) and each
    // class gets floor(f * n_g) or one more.
    std::vector<std::size_t> quota(groups);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        const double exact = train_fraction * static_cast<double>(members[g].size());
        quota[g] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[g];
        remainders.emplace_back(exact - std::floor(exact), g);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const auto total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(fs.n())));
    for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) ++quota[remainders[k].second];

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t g = 0; g < groups; ++g) {
        auto& m = members[g];
        Rng rng = Rng::derive(seed, "split", {g});
        for (std::size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[rng.below(i)]);
        const std::size_t n_train = quota[g];
        require(n_train > 0, ErrorCode::TooSmall, "class " + std::to_string(g) + " would receive no training samples");
        require(n_train < m.size(), ErrorCode::TooSmall, "class " + std::to_string(g) + " would receive no test samples");
        train_idx.insert(train_idx.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.insert(test_idx.end(), m.begin() + static_cast<std::ptrdiff_t>(n_train), m.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {fs.subset(train_idx), fs.subset(test_idx)};
}

}  // namespace heat
