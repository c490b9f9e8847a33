#include "outskirt/model_file.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

#include "outskirt/error.hpp"

namespace outskirt {

std::string FormatVersion::str() const {
    return std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
}

namespace {

using nnet::DenseNet;
using nnet::Matrix;

constexpr char kMagic[8] = {'O', 'S', 'K', 'M', 'O', 'D', 'E', 'L'};

class Writer {
public:
    std::vector<unsigned char> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        le(bits, 8);
    }
    void raw(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), c, c + n);
    }

    void matrix(const Matrix& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
    }
    void vector(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    void net(const DenseNet& n) {
        u32(static_cast<std::uint32_t>(n.layers().size()));
        for (const auto& l : n.layers()) {
            u32(static_cast<std::uint32_t>(l.out()));
            u32(static_cast<std::uint32_t>(l.in()));
            u8(static_cast<std::uint8_t>(l.activation));
            for (Eigen::Index i = 0; i < l.weight.size(); ++i) f64(l.weight.data()[i]);
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) f64(l.bias[i]);
        }
    }
    void kernel(const classify::KernelSpec& k) {
        u8(static_cast<std::uint8_t>(k.type));
        f64(k.gamma);
        f64(k.coef0);
        i32(k.degree);
    }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
};

class Reader {
public:
    Reader(const unsigned char* data, std::size_t size, std::string where)
        : p_(data), n_(size), where_(std::move(where)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
    double f64() {
        const auto bits = le(8);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    Matrix matrix() {
        const auto r = u64(), c = u64();
        need_values(r * c);
        Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
        return m;
    }
    Eigen::VectorXd vector() {
        const auto n = u64();
        need_values(n);
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
        return v;
    }
    DenseNet net() {
        const auto count = u32();
        std::vector<nnet::Layer> layers;
        for (std::uint32_t k = 0; k < count; ++k) {
            nnet::Layer l;
            const auto out = u32(), in = u32();
            const auto act = u8();
            if (act > 3) fail("unknown activation code " + std::to_string(act));
            l.activation = static_cast<nnet::Activation>(act);
            need_values(std::uint64_t{out} * in + out);
            l.weight.resize(out, in);
            for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = f64();
            l.bias.resize(out);
            for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = f64();
            if (!layers.empty() && layers.back().out() != in) fail("layer shapes do not chain");
            layers.push_back(std::move(l));
        }
        return layers.empty() ? DenseNet{} : DenseNet(std::move(layers));
    }
    classify::KernelSpec kernel() {
        classify::KernelSpec k;
        const auto t = u8();
        if (t > 3) fail("unknown kernel code " + std::to_string(t));
        k.type = static_cast<classify::KernelType>(t);
        k.gamma = f64();
        k.coef0 = f64();
        k.degree = i32();
        return k;
    }

    std::string rest() { return {reinterpret_cast<const char*>(p_ + at_), n_ - at_}; }
    bool done() const { return at_ == n_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("model file " + where_ + " at byte " + std::to_string(at_) + ": " + what);
    }

private:
    std::uint64_t le(int n) {
        if (at_ + static_cast<std::size_t>(n) > n_) fail("unexpected end of section");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{p_[at_ + static_cast<std::size_t>(i)]} << (8 * i);
        at_ += static_cast<std::size_t>(n);
        return v;
    }
    void need_values(std::uint64_t count) const {
        if (count > (n_ - at_) / 8) fail("declared size exceeds section length");
    }

    const unsigned char* p_;
    std::size_t n_;
    std::size_t at_ = 0;
    std::string where_;
};

std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
    return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

std::vector<unsigned char> ae_section(const hierarchy::Hierarchy& h) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(h.aes.size()));
    for (const auto& ae : h.aes) {
        w.u64(ae.feature_index);
        w.f64(ae.noise_sigma);
        w.net(ae.encoder);
        w.net(ae.decoder);
    }
    return w.bytes;
}

std::vector<unsigned char> scaler_section(const hierarchy::FeatureScaler& sc) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(sc.mean.size()));
    for (std::size_t i = 0; i < sc.mean.size(); ++i) {
        w.vector(sc.mean[i].transpose());
        w.vector(sc.scale[i].transpose());
    }
    return w.bytes;
}

std::vector<unsigned char> vae_section(const hierarchy::FusionVAE& v) {
    Writer w;
    w.u8(v.variational ? 1 : 0);
    w.net(v.trunk);
    w.net(v.mu_head);
    w.net(v.logvar_head);
    w.net(v.decoder);
    return w.bytes;
}

std::vector<unsigned char> catalog_section(const hierarchy::LatentCatalog& q) {
    Writer w;
    w.matrix(q.means());
    w.matrix(q.sigmas());
    return w.bytes;
}

std::vector<unsigned char> classifier_section(const classify::Classifier& c) {
    Writer w;
    w.u8(static_cast<std::uint8_t>(classify::kind_of(c)));
    if (const auto* s = std::get_if<classify::SvmModel>(&c)) {
        w.kernel(s->kernel);
        w.f64(s->C);
        w.f64(s->bias);
        w.u8(s->converged ? 1 : 0);
        w.u64(s->iterations);
        w.matrix(s->support_vectors);
        w.vector(s->dual_coef);
        w.vector(s->labels);
    } else if (const auto* o = std::get_if<classify::OneClassSvm>(&c)) {
        w.kernel(o->kernel);
        w.f64(o->nu);
        w.f64(o->rho);
        w.u8(o->converged ? 1 : 0);
        w.matrix(o->support_vectors);
        w.vector(o->dual_coef);
    } else if (const auto* nb = std::get_if<classify::GaussianNaiveBayes>(&c)) {
        w.vector(nb->mean_pos);
        w.vector(nb->var_pos);
        w.vector(nb->mean_neg);
        w.vector(nb->var_neg);
        w.f64(nb->log_prior_pos);
        w.f64(nb->log_prior_neg);
    } else {
        w.net(std::get<classify::MlpClassifier>(c).net);
    }
    return w.bytes;
}

std::vector<unsigned char> config_section(const pipeline::PipelineModel& m) {
    nlohmann::ordered_json j;
    j["format"] = kModelFormat.str();
    j["fold"] = m.fold;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : pipeline::config_entries(m.config)) cfg[k] = v;
    j["config"] = cfg;
    const auto text = j.dump(2);
    return {text.begin(), text.end()};
}

}  // namespace

std::vector<unsigned char> serialize_model(const pipeline::PipelineModel& model) {
    std::vector<std::pair<std::string, std::vector<unsigned char>>> sections;
    if (!model.hierarchy.scaler.empty()) sections.emplace_back("SCAL", scaler_section(model.hierarchy.scaler));
    sections.emplace_back("AEWT", ae_section(model.hierarchy));
    if (model.hierarchy.fusion) sections.emplace_back("VAEW", vae_section(*model.hierarchy.fusion));
    if (model.catalog) sections.emplace_back("CATQ", catalog_section(*model.catalog));
    sections.emplace_back("CLSF", classifier_section(model.classifier));
    sections.emplace_back("CONF", config_section(model));

    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u16(kModelFormat.major);
    w.u16(kModelFormat.minor);
    w.u16(kModelFormat.patch);
    w.u16(0);
    w.u32(static_cast<std::uint32_t>(sections.size()));
    std::uint64_t offset = w.bytes.size() + sections.size() * 20;
    for (const auto& [tag, body] : sections) {
        w.raw(tag.data(), 4);
        w.u64(offset);
        w.u64(body.size());
        offset += body.size();
    }
    for (const auto& s : sections) w.raw(s.second.data(), s.second.size());
    w.u32(crc32_of(w.bytes.data(), w.bytes.size()));
    return w.bytes;
}

ModelFileInfo inspect_model_file(const std::vector<unsigned char>& bytes) {
    constexpr std::size_t header = sizeof kMagic + 8 + 4;
    if (bytes.size() < header + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw DataError("not an outskirt model file (bad magic at offset 0)");
    }
    ModelFileInfo info;
    info.size = bytes.size();
    Reader tail(bytes.data() + bytes.size() - 4, 4, "trailer");
    info.crc = tail.u32();
    if (crc32_of(bytes.data(), bytes.size() - 4) != info.crc) {
        throw DataError("model file checksum mismatch (file is corrupted)");
    }
    Reader r(bytes.data() + sizeof kMagic, bytes.size() - sizeof kMagic - 4, "header");
    info.version.major = r.u16();
    info.version.minor = r.u16();
    info.version.patch = r.u16();
    r.u16();
    if (info.version > kModelFormat) {
        throw DataError("model file format " + info.version.str() + " is newer than supported " + kModelFormat.str());
    }
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        SectionInfo s;
        for (int k = 0; k < 4; ++k) s.tag.push_back(static_cast<char>(r.u8()));
        s.offset = r.u64();
        s.length = r.u64();
        if (s.offset + s.length > bytes.size() - 4 || s.offset + s.length < s.offset) {
            r.fail("section " + s.tag + " extends past the payload");
        }
        info.sections.push_back(std::move(s));
    }
    return info;
}

pipeline::PipelineModel deserialize_model(const std::vector<unsigned char>& bytes) {
    const auto info = inspect_model_file(bytes);
    auto find = [&](const char* tag) -> const SectionInfo* {
        for (const auto& s : info.sections)
            if (s.tag == tag) return &s;
        return nullptr;
    };
    auto reader = [&](const SectionInfo& s) { return Reader(bytes.data() + s.offset, s.length, s.tag); };

    pipeline::PipelineModel m;
    const auto* conf = find("CONF");
    if (!conf) throw DataError("model file has no CONF section");
    {
        auto r = reader(*conf);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(r.rest());
            m.fold = j.at("fold").get<std::size_t>();
            for (const auto& [k, v] : j.at("config").items()) {
                pipeline::apply_setting(m.config, k, v.get<std::string>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("model file CONF section: ") + e.what());
        } catch (const ConfigError& e) {
            throw DataError(std::string("model file CONF section: ") + e.what());
        }
    }
    m.hierarchy.config = m.config.hierarchy_config(pipeline::fold_seed(m.config, m.fold));

    if (const auto* s = find("SCAL")) {
        auto r = reader(*s);
        const auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            const Eigen::VectorXd mean = r.vector();
            const Eigen::VectorXd scale = r.vector();
            if (mean.size() != scale.size()) r.fail("scaler shapes differ");
            if ((scale.array() <= 0.0).any()) r.fail("non-positive scale");
            m.hierarchy.scaler.mean.push_back(mean.transpose());
            m.hierarchy.scaler.scale.push_back(scale.transpose());
        }
        if (!r.done()) r.fail("trailing bytes");
    }
    const auto* aew = find("AEWT");
    if (!aew) throw DataError("model file has no AEWT section");
    {
        auto r = reader(*aew);
        const auto n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            hierarchy::FeatureAE ae;
            ae.feature_index = r.u64();
            ae.noise_sigma = r.f64();
            ae.encoder = r.net();
            ae.decoder = r.net();
            m.hierarchy.aes.push_back(std::move(ae));
        }
        if (!r.done()) r.fail("trailing bytes");
    }
    if (const auto* s = find("VAEW")) {
        auto r = reader(*s);
        hierarchy::FusionVAE v;
        v.variational = r.u8() != 0;
        v.trunk = r.net();
        v.mu_head = r.net();
        v.logvar_head = r.net();
        v.decoder = r.net();
        if (!r.done()) r.fail("trailing bytes");
        m.hierarchy.fusion = std::move(v);
    }
    if (const auto* s = find("CATQ")) {
        auto r = reader(*s);
        const auto mu = r.matrix();
        const auto sigma = r.matrix();
        if (mu.rows() != sigma.rows() || mu.cols() != sigma.cols()) r.fail("catalog shapes differ");
        hierarchy::LatentCatalog q;
        for (Eigen::Index i = 0; i < mu.rows(); ++i) {
            q.entries.push_back({mu.row(i).transpose(), sigma.row(i).transpose()});
        }
        m.catalog = std::move(q);
    }
    const auto* cls = find("CLSF");
    if (!cls) throw DataError("model file has no CLSF section");
    {
        auto r = reader(*cls);
        const auto kind = r.u8();
        switch (kind) {
            case static_cast<std::uint8_t>(classify::ClassifierKind::svm): {
                classify::SvmModel s;
                s.kernel = r.kernel();
                s.C = r.f64();
                s.bias = r.f64();
                s.converged = r.u8() != 0;
                s.iterations = r.u64();
                s.support_vectors = r.matrix();
                s.dual_coef = r.vector();
                s.labels = r.vector();
                m.classifier = std::move(s);
                break;
            }
            case static_cast<std::uint8_t>(classify::ClassifierKind::ocsvm): {
                classify::OneClassSvm o;
                o.kernel = r.kernel();
                o.nu = r.f64();
                o.rho = r.f64();
                o.converged = r.u8() != 0;
                o.support_vectors = r.matrix();
                o.dual_coef = r.vector();
                m.classifier = std::move(o);
                break;
            }
            case static_cast<std::uint8_t>(classify::ClassifierKind::nb): {
                classify::GaussianNaiveBayes nb;
                nb.mean_pos = r.vector();
                nb.var_pos = r.vector();
                nb.mean_neg = r.vector();
                nb.var_neg = r.vector();
                nb.log_prior_pos = r.f64();
                nb.log_prior_neg = r.f64();
                m.classifier = std::move(nb);
                break;
            }
            case static_cast<std::uint8_t>(classify::ClassifierKind::mlp): {
                classify::MlpClassifier mlp;
                mlp.net = r.net();
                m.classifier = std::move(mlp);
                break;
            }
            default: r.fail("unknown classifier code " + std::to_string(kind));
        }
        if (!r.done()) r.fail("trailing bytes");
    }
    return m;
}

void save_model(const std::filesystem::path& path, const pipeline::PipelineModel& model) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing model file " + path.string());
}

pipeline::PipelineModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read model file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace outskirt
