#include "heat/bundle.hpp"

#include <sstream>

#include <zlib.h>

#include "bytes.hpp"
#include "json_util.hpp"

namespace heat {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "HEATBNDL";

enum SectionTag : std::uint32_t { kConf = 1, kPrior = 2, kNet = 3, kStdz = 4 };

const char* tag_name(std::uint32_t tag) {
    switch (tag) {
        case kConf: return "CONF";
        case kPrior: return "PRIO";
        case kNet: return "RNET";
        case kStdz: return "STDZ";
    }
    return "????";
}

std::uint32_t crc(std::span<const std::uint8_t> payload) {
    uLong c = crc32(0L, Z_NULL, 0);
    c = crc32(c, payload.data(), static_cast<uInt>(payload.size()));
    return static_cast<std::uint32_t>(c);
}

void put_matrix(detail::ByteWriter& w, const Matrix& m) {
    w.put_u32(static_cast<std::uint32_t>(m.rows()));
    w.put_u32(static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) w.put_f64(v);
}

Matrix get_matrix(detail::ByteReader& r) {
    const std::size_t rows = r.get_u32();
    const std::size_t cols = r.get_u32();
    require(cols == 0 || rows <= r.remaining() / (8 * cols), ErrorCode::ParseError, "matrix larger than its section");
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.get_f64();
    return Matrix(rows, cols, std::move(data));
}

void put_vector(detail::ByteWriter& w, std::span<const double> v) {
    w.put_u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) w.put_f64(x);
}

Vector get_vector(detail::ByteReader& r) {
    const std::size_t n = r.get_u32();
    require(n <= r.remaining() / 8, ErrorCode::ParseError, "vector larger than its section");
    Vector v(n);
    for (double& x : v) x = r.get_f64();
    return v;
}

std::vector<std::uint8_t> encode_prior(const PriorScorer& prior) {
    detail::ByteWriter w;
    w.put_u8(static_cast<std::uint8_t>(prior.kind()));
    switch (prior.kind()) {
        case PriorKind::Gmm: {
            const auto& g = static_cast<const GmmPrior&>(prior);
            w.put_f64(g.temperature());
            w.put_f64(g.factor().jitter());
            put_matrix(w, g.means());
            put_matrix(w, g.factor().lower());
            break;
        }
        case PriorKind::EnergyLogits: {
            const auto& l = static_cast<const LogitPrior&>(prior);
            put_matrix(w, l.head().weight);
            put_vector(w, l.head().bias);
            w.put_u8(l.has_proposal() ? 1 : 0);
            if (l.has_proposal()) {
                put_vector(w, l.proposal_mean());
                put_vector(w, l.proposal_std());
            }
            break;
        }
        case PriorKind::Flat: {
            const auto& f = static_cast<const FlatPrior&>(prior);
            put_vector(w, f.low());
            put_vector(w, f.high());
            break;
        }
    }
    return std::move(w.bytes());
}

PriorPtr decode_prior(detail::ByteReader& r) {
    const auto kind = static_cast<PriorKind>(r.get_u8());
    switch (kind) {
        case PriorKind::Gmm: {
            const double temperature = r.get_f64();
            const double jitter = r.get_f64();
            Matrix means = get_matrix(r);
            Matrix lower = get_matrix(r);
            return std::make_shared<GmmPrior>(std::move(means), CholeskyFactor::from_lower(std::move(lower), jitter),
                                              temperature);
        }
        case PriorKind::EnergyLogits: {
            LogitHead head{get_matrix(r), get_vector(r)};
            if (r.get_u8() == 0) return std::make_shared<LogitPrior>(std::move(head));
            Vector mean = get_vector(r);
            Vector sd = get_vector(r);
            return std::make_shared<LogitPrior>(std::move(head), std::move(mean), std::move(sd));
        }
        case PriorKind::Flat: {
            Vector lo = get_vector(r);
            Vector hi = get_vector(r);
            return std::make_shared<FlatPrior>(std::move(lo), std::move(hi));
        }
    }
    fail(ErrorCode::ParseError, "unknown prior kind " + std::to_string(static_cast<int>(kind)));
}

std::vector<std::uint8_t> encode_net(const EnergyNet& net) {
    detail::ByteWriter w;
    w.put_u8(static_cast<std::uint8_t>(net.activation()));
    w.put_u32(static_cast<std::uint32_t>(net.depth()));
    for (const auto& l : net.layers()) {
        put_matrix(w, l.weight);
        put_vector(w, l.bias);
    }
    return std::move(w.bytes());
}

EnergyNet decode_net(detail::ByteReader& r) {
    const std::uint8_t act = r.get_u8();
    require(act <= 1, ErrorCode::ParseError, "unknown activation tag");
    const std::size_t depth = r.get_u32();
    require(depth <= r.remaining(), ErrorCode::ParseError, "layer count larger than its section");
    NetParameters layers;
    for (std::size_t l = 0; l < depth; ++l) {
        Matrix w = get_matrix(r);
        Vector b = get_vector(r);
        layers.push_back({std::move(w), std::move(b)});
    }
    return EnergyNet(std::move(layers), static_cast<Activation>(act));
}

std::vector<std::uint8_t> encode_stdz(const std::optional<Standardization>& s) {
    detail::ByteWriter w;
    w.put_u8(s ? 1 : 0);
    w.put_f64(s ? s->mean : 0.0);
    w.put_f64(s ? s->std : 0.0);
    return std::move(w.bytes());
}

const char* source_name(FeatureSource s) { return s == FeatureSource::StdPooled ? "std" : "pooled"; }

FeatureSource source_from_name(const std::string& s) {
    if (s == "pooled") return FeatureSource::Pooled;
    if (s == "std") return FeatureSource::StdPooled;
    fail(ErrorCode::ParseError, "unknown feature source '" + s + "'");
}

void put_section(detail::ByteWriter& w, std::uint32_t tag, std::span<const std::uint8_t> payload) {
    w.put_u32(tag);
    w.put_u64(payload.size());
    w.put_bytes(payload);
    w.put_u32(crc(payload));
}

struct RawSection {
    std::uint32_t tag;
    std::span<const std::uint8_t> payload;
};

}  // namespace

std::vector<std::uint8_t> encode_bundle(const Bundle& bundle) {
    const auto& comp = bundle.composition;
    require(bundle.names.size() == comp.scorers.size(), ErrorCode::MismatchedScorerCount,
            "bundle needs one name per scorer");
    json conf;
    conf["beta"] = detail::beta_to_json(comp.beta);
    conf["standardize"] = comp.standardize;
    conf["scorers"] = json::array();
    for (std::size_t k = 0; k < comp.scorers.size(); ++k)
        conf["scorers"].push_back({{"name", bundle.names[k]}, {"source", source_name(comp.scorers[k].source())}});
    conf["metadata"] = json::parse(bundle.metadata_json);
    const std::string conf_text = conf.dump();

    detail::ByteWriter w;
    w.put_tag(kMagic);
    w.put_u32(kBundleVersion);
    w.put_u32(static_cast<std::uint32_t>(1 + 3 * comp.scorers.size()));
    put_section(w, kConf, std::span(reinterpret_cast<const std::uint8_t*>(conf_text.data()), conf_text.size()));
    for (const auto& s : comp.scorers) {
        put_section(w, kPrior, encode_prior(s.prior()));
        put_section(w, kNet, encode_net(s.residual()));
        put_section(w, kStdz, encode_stdz(s.standardization()));
    }
    return std::move(w.bytes());
}

Bundle decode_bundle(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    require(r.peek_tag(kMagic), ErrorCode::BadMagic, "not a HEATBNDL bundle");
    r.get_bytes(kMagic.size());
    const std::uint32_t version = r.get_u32();
    require(version <= kBundleVersion && version >= 1, ErrorCode::UnsupportedVersion,
            "bundle format version " + std::to_string(version) + " (supported: 1)");
    const std::uint32_t count = r.get_u32();

    // Frame and checksum every section before interpreting any of them.
    std::vector<RawSection> sections;
    for (std::uint32_t i = 0; i < count; ++i) {
        require(r.remaining() >= 12, ErrorCode::CorruptSection, "bundle truncated in section header " + std::to_string(i));
        const std::uint32_t tag = r.get_u32();
        const std::uint64_t len = r.get_u64();
        require(len + 4 <= r.remaining(), ErrorCode::CorruptSection,
                "section " + std::to_string(i) + " length exceeds the file");
        auto payload = r.get_bytes(static_cast<std::size_t>(len));
        const std::uint32_t expected = r.get_u32();
        require(crc(payload) == expected, ErrorCode::CorruptSection,
                std::string("checksum mismatch in section ") + std::to_string(i) + " (" + tag_name(tag) + ")");
        sections.push_back({tag, payload});
    }
    require(r.remaining() == 0, ErrorCode::CorruptSection, "trailing bytes after the last section");
    require(!sections.empty() && sections[0].tag == kConf, ErrorCode::CorruptSection, "bundle must start with CONF");
    require((sections.size() - 1) % 3 == 0, ErrorCode::CorruptSection, "unexpected section count");

    Bundle out;
    try {
        const auto& cp = sections[0].payload;
        const json conf = json::parse(std::string(reinterpret_cast<const char*>(cp.data()), cp.size()));
        out.composition.beta = detail::beta_from_json(conf.at("beta"));
        out.composition.standardize = conf.at("standardize").get<bool>();
        out.metadata_json = conf.at("metadata").dump();
        const auto& scorers = conf.at("scorers");
        require(scorers.size() * 3 + 1 == sections.size(), ErrorCode::CorruptSection,
                "CONF lists a different number of scorers than the bundle holds");
        for (std::size_t k = 0; k < scorers.size(); ++k) {
            const auto& ps = sections[1 + 3 * k];
            const auto& ns = sections[2 + 3 * k];
            const auto& ss = sections[3 + 3 * k];
            require(ps.tag == kPrior && ns.tag == kNet && ss.tag == kStdz, ErrorCode::CorruptSection,
                    "scorer " + std::to_string(k) + " sections out of order");
            detail::ByteReader pr(ps.payload), nr(ns.payload), sr(ss.payload);
            PriorPtr prior = decode_prior(pr);
            EnergyNet net = decode_net(nr);
            require(pr.remaining() == 0 && nr.remaining() == 0, ErrorCode::CorruptSection, "section has trailing bytes");
            HybridScorer scorer(std::move(prior), std::move(net), source_from_name(scorers[k].at("source").get<std::string>()));
            const bool has_std = sr.get_u8() != 0;
            const double mean = sr.get_f64();
            const double sd = sr.get_f64();
            if (has_std) scorer.set_standardization({mean, sd});
            out.composition.scorers.push_back(std::move(scorer));
            out.names.push_back(scorers[k].at("name").get<std::string>());
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptSection) throw;
        fail(ErrorCode::CorruptSection, std::string("invalid section content: ") + e.message());
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptSection, std::string("invalid CONF section: ") + e.what());
    }
    return out;
}

void save_bundle(const std::filesystem::path& path, const Bundle& bundle) {
    detail::write_file_atomic(path, encode_bundle(bundle));
}

Bundle load_bundle(const std::filesystem::path& path) { return decode_bundle(detail::read_file(path)); }

std::string describe_bundle(const Bundle& bundle) {
    std::ostringstream os;
    const auto& c = bundle.composition;
    os << "format version: " << kBundleVersion << "\n";
    os << "beta: " << detail::beta_label(c.beta) << "\n";
    os << "standardize: " << (c.standardize ? "yes" : "no") << "\n";
    os << "scorers: " << c.scorers.size() << "\n";
    for (std::size_t k = 0; k < c.scorers.size(); ++k) {
        const auto& s = c.scorers[k];
        os << "  [" << k << "] " << bundle.names[k] << ": prior=" << to_string(s.prior().kind())
           << " dim=" << s.dim() << " source=" << source_name(s.source())
           << " residual(depth=" << s.residual().depth() << ", hidden=" << s.residual().hidden_dim()
           << ", params=" << parameter_count(s.residual().layers()) << ")";
        if (s.standardization())
            os << " standardization(mean=" << s.standardization()->mean << ", std=" << s.standardization()->std << ")";
        os << "\n";
    }
    os << "metadata: " << bundle.metadata_json << "\n";
    return os.str();
}

}  // namespace heat
