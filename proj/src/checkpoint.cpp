#include "mobiload/checkpoint.hpp"

#include "mobiload/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mobiload {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'L', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void put_layer(std::string& out, const Layer& l) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put(out, l.weights(r, c));
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) put(out, l.bias(i));
}

class Reader {
public:
    Reader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Layer layer(std::size_t in, std::size_t out) {
        Layer l;
        l.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
        l.bias.resize(static_cast<Eigen::Index>(out));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = get<double>();
        }
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = get<double>();
        return l;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        require(bytes_.size() - pos_ >= n, ErrorKind::CorruptCheckpoint, source_ + ": truncated checkpoint");
    }
    std::string_view bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace

json to_json(const ArchitectureSpec& spec) {
    std::vector<std::string> acts;
    for (auto a : spec.activations) acts.push_back(to_string(a));
    return {{"widths", spec.widths}, {"activations", acts}, {"dropout", spec.dropout}, {"trunk_depth", spec.trunk_depth}};
}

ArchitectureSpec architecture_from_json(const json& j) {
    ArchitectureSpec s;
    s.widths = j.at("widths").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("activations")) s.activations.push_back(parse_activation(a.get<std::string>()));
    s.dropout = j.at("dropout").get<std::vector<double>>();
    s.trunk_depth = j.at("trunk_depth").get<std::size_t>();
    return s;
}

json to_json(const NormalizationState& n) {
    return {{"load_min", n.load_min},           {"load_max", n.load_max},       {"weather_names", n.weather_names},
            {"weather_min", n.weather_min},     {"weather_max", n.weather_max}, {"mobility_scale", n.mobility_scale}};
}

NormalizationState normalizer_from_json(const json& j) {
    NormalizationState n;
    n.load_min = j.at("load_min").get<double>();
    n.load_max = j.at("load_max").get<double>();
    n.weather_names = j.at("weather_names").get<std::vector<std::string>>();
    n.weather_min = j.at("weather_min").get<std::vector<double>>();
    n.weather_max = j.at("weather_max").get<std::vector<double>>();
    n.mobility_scale = j.at("mobility_scale").get<double>();
    return n;
}

const MultiTaskModel& Checkpoint::model_for(std::string_view task_id) const {
    for (const auto& m : models) {
        if (m.has_task(task_id)) return m;
    }
    fail(ErrorKind::UnknownTask, "checkpoint has no model for task \"" + std::string(task_id) + "\"");
}

bool Checkpoint::operator==(const Checkpoint& other) const {
    return metadata == other.metadata && models == other.models;
}

std::string serialize_layers(const std::vector<Layer>& layers) {
    std::string out;
    for (const auto& l : layers) put_layer(out, l);
    return out;
}

std::string serialize(const Checkpoint& ckpt) {
    json models = json::array();
    for (const auto& m : ckpt.models) {
        json heads = json::array();
        for (const auto& h : m.heads) {
            json jh{{"task_id", h.task_id}, {"normalizer", to_json(h.normalizer)}};
            if (h.layout.segments.empty()) {
                jh["layout"] = nullptr;
            } else {
                jh["layout"] = h.layout.descriptor();
                jh["layout_hash"] = h.layout.hash();
            }
            heads.push_back(std::move(jh));
        }
        models.push_back({{"architecture", to_json(m.spec)}, {"heads", heads}});
    }
    const std::string header = json{{"metadata", ckpt.metadata}, {"models", models}}.dump();

    std::string out(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, header.size());
    out += header;
    for (const auto& m : ckpt.models) {
        out += serialize_layers(m.trunk);
        for (const auto& h : m.heads) out += serialize_layers(h.layers);
    }
    return out;
}

Checkpoint deserialize(std::string_view bytes, const std::string& source) {
    Reader rd(bytes, source);
    require(rd.take(4) == std::string_view(kMagic, 4), ErrorKind::CorruptCheckpoint, source + ": not a checkpoint");
    const auto version = rd.get<std::uint32_t>();
    require(version == kCheckpointVersion, ErrorKind::CorruptCheckpoint,
            source + ": unsupported checkpoint version " + std::to_string(version));
    const auto len = rd.get<std::uint64_t>();
    json header;
    Checkpoint ck;
    try {
        header = json::parse(rd.take(static_cast<std::size_t>(len)));
        ck.metadata = header.at("metadata");
        for (const auto& jm : header.at("models")) {
            MultiTaskModel m;
            m.spec = architecture_from_json(jm.at("architecture"));
            m.spec.validate();
            for (const auto& jh : jm.at("heads")) {
                TaskHead h;
                h.task_id = jh.at("task_id").get<std::string>();
                h.normalizer = normalizer_from_json(jh.at("normalizer"));
                if (!jh.at("layout").is_null()) {
                    h.layout = FeatureLayout::parse_descriptor(jh.at("layout").get<std::string>());
                    require(h.layout.hash() == jh.at("layout_hash").get<std::uint64_t>(), ErrorKind::CorruptCheckpoint,
                            source + ": layout hash mismatch for " + h.task_id);
                }
                m.heads.push_back(std::move(h));
            }
            ck.models.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::CorruptCheckpoint, source + ": malformed header: " + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::CorruptCheckpoint) throw;
        fail(ErrorKind::CorruptCheckpoint, source + ": " + e.what());
    }
    for (auto& m : ck.models) {
        const auto& w = m.spec.widths;
        for (std::size_t i = 0; i < m.spec.trunk_depth; ++i) m.trunk.push_back(rd.layer(w[i], w[i + 1]));
        for (auto& h : m.heads) {
            for (std::size_t i = m.spec.trunk_depth; i < m.spec.layers(); ++i) h.layers.push_back(rd.layer(w[i], w[i + 1]));
        }
    }
    require(rd.done(), ErrorKind::CorruptCheckpoint, source + ": trailing bytes");
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
    const std::string bytes = serialize(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::MissingFile, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingCheckpoint, "checkpoint not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str(), path.string());
}

}  // namespace mobiload
